//! Thin wrappers over Gauss-Legendre and double-exponential quadrature.

use gauss_quad::legendre::GaussLegendre;
use std::num::NonZeroUsize;

/// Gauss-Legendre rule with nodes and weights stored on [-1, 1].
#[derive(Clone, Debug)]
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(points: usize) -> Self {
        let n = NonZeroUsize::new(points.max(1)).unwrap();
        let rule = GaussLegendre::new(n);
        let (nodes, weights) = rule.as_node_weight_pairs().iter().copied().unzip();
        GaussRule { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let m = 0.5 * (a + b);
        let w = 0.5 * (b - a);
        let mut acc = 0.0;
        for (x, wt) in self.nodes.iter().zip(&self.weights) {
            acc += wt * f(m + w * x);
        }
        acc * w
    }

    /// Nodes and weights mapped to [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let m = 0.5 * (a + b);
        let w = 0.5 * (b - a);
        self.nodes.iter().zip(&self.weights).map(move |(x, wt)| (m + w * x, wt * w))
    }
}

/// Tanh-sinh quadrature on a finite interval; tolerates integrable endpoint singularities.
pub fn adaptive(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let guarded = |x: f64| {
        let v = f(x);
        if v.is_finite() { v } else { 0.0 }
    };
    quadrature::double_exponential::integrate(guarded, a, b, tol).integral
}

/// Integral over [a, inf) on doubling panels, stopped once two consecutive
/// panels fall below `tol` (relative to the running total when that is larger).
pub fn adaptive_to_infinity(f: impl Fn(f64) -> f64, a: f64, tol: f64) -> f64 {
    let mut w = a.abs().max(1.0);
    let mut lo = a;
    let mut acc = 0.0;
    let mut quiet = 0;
    for _ in 0..MAX_TAIL_PANELS {
        let part = adaptive(&f, lo, lo + w, tol);
        acc += part;
        lo += w;
        w *= 2.0;
        if part.abs() <= tol.max(1e-16 * acc.abs()) {
            quiet += 1;
            if quiet == 2 {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    acc
}

const MAX_TAIL_PANELS: usize = 1000;

/// Adaptive quadrature split at interior breakpoints.
pub fn adaptive_split(f: impl Fn(f64) -> f64, a: f64, b: f64, breaks: &[f64], tol: f64) -> f64 {
    let mut pts: Vec<f64> = Vec::with_capacity(breaks.len() + 2);
    pts.push(a);
    pts.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    pts.push(b);
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.windows(2).map(|w| adaptive(&f, w[0], w[1], tol)).sum()
}
