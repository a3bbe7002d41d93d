//! The iteration ladder behind the upper lifespan bound at `gamma = 2`:
//! constants, log-space sequences, lower envelopes and their comparison with
//! solved fields.

use crate::error::{config, domain, Result};
use crate::evolution::SpaceTimeField;
use crate::radial::DataFamily;
use num_bigint::{BigInt, BigUint};
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowupConstants {
    pub b: f64,
    pub c0: f64,
    pub e: f64,
    pub s: f64,
    pub f: f64,
}

impl BlowupConstants {
    pub fn new(b: f64) -> Result<Self> {
        if !(b > 0.0 && b.is_finite()) {
            return domain(format!("B must be positive, got {b}"));
        }
        let c0 = b / 2f64.powf(2.5);
        let e = PI / 1728.0;
        let s = 0.75;
        let f = c0.powi(3) * PI / 2.0 / 243.0 * 24f64.powf(-s) * e.sqrt();
        Ok(BlowupConstants { b, c0, e, s, f })
    }

    /// `C_1 = C0^3 pi eps^3 / (2 3^5)`.
    pub fn c1(&self, eps: f64) -> f64 {
        self.c0.powi(3) * PI * eps.powi(3) / 486.0
    }
}

/// `S_j = sum_{k<j} k/3^k` in closed form.
pub fn s_j(j: u32) -> f64 {
    0.75 * (1.0 - (2.0 * j as f64 + 1.0) * 3f64.powi(-(j as i32)))
}

/// One rung of the ladder. `log C_j` is carried both as a float and as exact
/// integer coefficients over `log C_1`, `log E` and `log 24`.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationSequence {
    pub j: u32,
    pub log_c: f64,
    /// `a_j = (3^j - 1)/2`.
    pub a: BigUint,
    /// `2 - l_j = 2^-j`; `l_j` itself rounds to 2 in double precision for `j >= 53`.
    pub l_deficit: f64,
    pub s: f64,
    pub coef_c1: BigUint,
    pub coef_e: BigUint,
    pub coef_24: BigUint,
}

impl IterationSequence {
    pub fn l(&self) -> f64 {
        2.0 - self.l_deficit
    }

    pub fn a_f64(&self) -> f64 {
        self.a.to_f64().unwrap_or(f64::INFINITY)
    }

    /// `log C_j` from the exact coefficients.
    pub fn log_c_from_coefficients(&self, log_c1: f64, log_e: f64) -> f64 {
        let f = |x: &BigUint| x.to_f64().unwrap_or(f64::INFINITY);
        f(&self.coef_c1) * log_c1 + f(&self.coef_e) * log_e - f(&self.coef_24) * 24f64.ln()
    }
}

/// The ladder for `j = 1..=j_max`; `C_j` for `j >= 2` from the closed form.
pub fn sequences(j_max: u32, eps: f64, b: f64) -> Result<Vec<IterationSequence>> {
    if j_max < 1 {
        return domain("j_max must be at least 1");
    }
    if !(eps > 0.0) {
        return domain(format!("eps must be positive, got {eps}"));
    }
    let k = BlowupConstants::new(b)?;
    let log_c1 = k.c1(eps).ln();
    let half_log_e = 0.5 * k.e.ln();
    let three = BigUint::from(3u32);
    let mut out = Vec::with_capacity(j_max as usize);
    let mut pow = BigUint::one(); // 3^(j-1)
    let mut coef_e = BigUint::zero();
    let mut coef_24 = BigUint::zero();
    for j in 1..=j_max {
        if j > 1 {
            coef_e = &coef_e * &three + 1u32;
            coef_24 = &coef_24 * &three + (j - 1);
            pow = &pow * &three;
        }
        let sj = s_j(j);
        let log_c = if j == 1 {
            log_c1
        } else {
            let p = pow.to_f64().unwrap_or(f64::INFINITY);
            p * (log_c1 - sj * 24f64.ln() + half_log_e) - half_log_e
        };
        out.push(IterationSequence {
            j,
            log_c,
            a: (&pow * &three - 1u32) / 2u32,
            l_deficit: 2f64.powi(-(j as i32)),
            s: sj,
            coef_c1: pow.clone(),
            coef_e: coef_e.clone(),
            coef_24: coef_24.clone(),
        });
    }
    Ok(out)
}

/// Relative log-space tolerance of [`verify_recursion`].
pub const RECURSION_TOL: f64 = 1e-10;

/// Checks `C_{j+1} = C_j^3 E / 24^j` and `a_{j+1} = 3 a_j + 1`: exactly on
/// the integer coefficients, and on the float logs to `RECURSION_TOL * max(1, |log C|)`.
pub fn verify_recursion(seq: &[IterationSequence]) -> bool {
    let log_e = (PI / 1728.0).ln();
    let log_24 = 24f64.ln();
    seq.windows(2).all(|w| {
        let (p, n) = (&w[0], &w[1]);
        let three = BigUint::from(3u32);
        let exact = n.j == p.j + 1
            && n.a == &p.a * &three + 1u32
            && n.coef_c1 == &p.coef_c1 * &three
            && n.coef_e == &p.coef_e * &three + 1u32
            && BigInt::from(n.coef_24.clone()) == BigInt::from(&p.coef_24 * &three) + BigInt::from(p.j);
        let predicted = 3.0 * p.log_c + log_e - p.j as f64 * log_24;
        let float = (n.log_c - predicted).abs() <= RECURSION_TOL * n.log_c.abs().max(1.0);
        exact && float
    })
}

/// `C0 eps / ((t+r)(t-r)^(1/2))` on `t - r >= 1`, zero elsewhere.
pub fn first_lower(eps: f64, b: f64, r: f64, t: f64) -> Result<f64> {
    let k = BlowupConstants::new(b)?;
    if t - r < 1.0 {
        return Ok(0.0);
    }
    Ok(k.c0 * eps / ((t + r) * (t - r).sqrt()))
}

/// `C_j/((t+r)(t-r)^(1/2)) log((t-r)/l_j)^(a_j)` on `t - r >= l_j`, zero elsewhere.
pub fn lower_envelope(j: u32, eps: f64, b: f64, r: f64, t: f64) -> Result<f64> {
    let seq = sequences(j, eps, b)?;
    Ok(envelope_from(&seq[j as usize - 1], r, t))
}

fn envelope_from(s: &IterationSequence, r: f64, t: f64) -> f64 {
    let d = t - r;
    if !(r >= 0.0) || d < s.l() || d <= 0.0 {
        return 0.0;
    }
    let lg = (d / s.l()).ln();
    if lg <= 0.0 {
        return 0.0;
    }
    (s.log_c - (t + r).ln() - 0.5 * d.ln() + s.a_f64() * lg.ln()).exp()
}

/// `C0^2 pi eps^2 r log(t-r)/(t+r)^3`, a lower bound for the potential on `t - r >= 1`.
pub fn potential_lower(eps: f64, b: f64, r: f64, t: f64) -> Result<f64> {
    if t - r < 1.0 {
        return domain(format!("need t - r >= 1, got r = {r}, t = {t}"));
    }
    let k = BlowupConstants::new(b)?;
    Ok(k.c0 * k.c0 * PI * eps * eps * r * (t - r).ln() / (t + r).powi(3))
}

/// An upper lifespan bound that may not fit in a double.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum LifespanBound {
    Value(f64),
    Log(f64),
}

impl LifespanBound {
    pub fn ln(&self) -> f64 {
        match *self {
            LifespanBound::Value(v) => v.ln(),
            LifespanBound::Log(l) => l,
        }
    }
}

/// `exp(2 F^(-2/3) eps^-2)`.
pub fn predicted_upper_lifespan(eps: f64, b: f64) -> Result<LifespanBound> {
    if !(eps > 0.0) {
        return domain(format!("eps must be positive, got {eps}"));
    }
    let k = BlowupConstants::new(b)?;
    let l = 2.0 * k.f.powf(-2.0 / 3.0) / (eps * eps);
    let v = l.exp();
    Ok(if v.is_finite() { LifespanBound::Value(v) } else { LifespanBound::Log(l) })
}

/// `K(t) = log(eps^3 F log(t/4)^(3/2))`, defined for `t > 4`.
pub fn k_function(eps: f64, b: f64, t: f64) -> Result<f64> {
    if !(t > 4.0) || !(eps > 0.0) {
        return domain(format!("K needs t > 4 and eps > 0, got t = {t}, eps = {eps}"));
    }
    let k = BlowupConstants::new(b)?;
    Ok((eps.powi(3) * k.f).ln() + 1.5 * (t / 4.0).ln().ln())
}

/// The root of `K`: `4 exp((eps^3 F)^(-2/3))`, in log form.
pub fn log_t_k(eps: f64, b: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return domain(format!("eps must be positive, got {eps}"));
    }
    let k = BlowupConstants::new(b)?;
    Ok(4f64.ln() + (eps.powi(3) * k.f).powf(-2.0 / 3.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub j_list: Vec<u32>,
    pub checked: usize,
    pub skipped: usize,
    pub violations: usize,
    /// Smallest `u / envelope` over checked points.
    pub worst_ratio: f64,
    pub worst_point: (f64, f64),
}

/// Compares stored nodal values with the first lower bound (`j = 0` in
/// `j_list`) and the ladder envelopes. `points` are `(i, j)` node indices;
/// `None` uses every stored node on `r = t/2` and every node in `t - r >= 2`.
pub fn envelope_vs_numeric(
    field: &SpaceTimeField,
    eps: f64,
    b: f64,
    j_list: &[u32],
    points: Option<&[(usize, usize)]>,
) -> Result<EnvelopeReport> {
    let meta = field.meta().ok_or(crate::error::Error::Config("field carries no run parameters".into()))?;
    let matches = match meta.family {
        Some(DataFamily::Blowup { b: fb, kappa }) => fb == b && kappa == 1.5,
        _ => false,
    };
    if !matches || meta.eps != eps || meta.gamma != 2.0 {
        return config("field was not produced by the blow-up family with these (eps, B), kappa = 3/2 and gamma = 2");
    }
    let j_max = j_list.iter().copied().max().unwrap_or(0).max(1);
    let seq = sequences(j_max, eps, b)?;
    let g = field.grid();
    let default: Vec<(usize, usize)>;
    let pts = match points {
        Some(p) => p,
        None => {
            default = field
                .nodes()
                .filter(|&(i, j, _)| 2 * i == j || g.t(j) - g.r(i) >= 2.0)
                .map(|(i, j, _)| (i, j))
                .collect();
            &default
        }
    };
    let mut rep = EnvelopeReport {
        j_list: j_list.to_vec(),
        checked: 0,
        skipped: 0,
        violations: 0,
        worst_ratio: f64::INFINITY,
        worst_point: (0.0, 0.0),
    };
    for &(i, j) in pts {
        let Some(u) = field.get(i, j) else {
            rep.skipped += 1;
            continue;
        };
        let (r, t) = (g.r(i), g.t(j));
        for &k in j_list {
            let env = if k == 0 { first_lower(eps, b, r, t)? } else { envelope_from(&seq[k as usize - 1], r, t) };
            if env <= 0.0 {
                rep.skipped += 1;
                continue;
            }
            rep.checked += 1;
            let q = u / env;
            if q < 1.0 {
                rep.violations += 1;
            }
            if q < rep.worst_ratio {
                rep.worst_ratio = q;
                rep.worst_point = (r, t);
            }
        }
    }
    Ok(rep)
}
