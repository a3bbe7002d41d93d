//! Radial grids and profiles, the spherical-mean reduction, the free propagator
//! W and the free solution u0.

use crate::error::{config, domain, Result};
use crate::quad;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

pub const FOUR_PI: f64 = 4.0 * PI;

/// Characteristic-aligned mesh: `dt == dr` by construction.
///
/// Slab `j` carries radial nodes `0..=n_r - j`, the trapezoid whose values are
/// fully determined by data on `[0, r_max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dr: f64,
    pub n_r: usize,
    pub n_t: usize,
}

fn steps(x: f64, dr: f64, what: &str) -> Result<usize> {
    let n = (x / dr).round();
    if !(n >= 0.0) || (n * dr - x).abs() > 1e-9 * x.abs().max(1.0) {
        return config(format!("{what} = {x} is not a multiple of dr = {dr}"));
    }
    Ok(n as usize)
}

impl Grid {
    pub fn new(dr: f64, r_max: f64, t_max: f64) -> Result<Grid> {
        if !(dr > 0.0 && dr.is_finite()) {
            return config(format!("dr must be positive, got {dr}"));
        }
        if !(t_max >= 0.0) || !(r_max >= t_max) {
            return config(format!("need r_max >= t_max >= 0, got r_max = {r_max}, t_max = {t_max}"));
        }
        let n_r = steps(r_max, dr, "r_max")?;
        let n_t = steps(t_max, dr, "t_max")?;
        if n_r < 2 {
            return config("grid needs at least two radial cells");
        }
        Ok(Grid { dr, n_r, n_t })
    }

    /// Grid whose last slab still covers `[0, radius]`.
    pub fn covering(dr: f64, t_max: f64, radius: f64) -> Result<Grid> {
        let n_t = (t_max / dr).ceil();
        let n_x = (radius / dr).ceil().max(2.0);
        Grid::new(dr, (n_t + n_x) * dr, n_t * dr)
    }

    pub fn dt(&self) -> f64 {
        self.dr
    }

    pub fn r_max(&self) -> f64 {
        self.n_r as f64 * self.dr
    }

    pub fn t_max(&self) -> f64 {
        self.n_t as f64 * self.dr
    }

    pub fn r(&self, i: usize) -> f64 {
        i as f64 * self.dr
    }

    pub fn t(&self, j: usize) -> f64 {
        j as f64 * self.dr
    }

    pub fn row_end(&self, j: usize) -> usize {
        self.n_r - j
    }

    pub fn support_radius(&self) -> f64 {
        self.r_max() - self.t_max()
    }
}

/// Behaviour of a profile beyond its last sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Tail {
    Zero,
    Constant { value: f64 },
    /// `amplitude * (offset + lambda)^(-exponent)`
    PowerLaw { amplitude: f64, exponent: f64, offset: f64 },
}

/// `y2^e - y1^e` without cancellation when `y2 ~ y1`.
pub(crate) fn pow_diff(y1: f64, y2: f64, e: f64) -> f64 {
    y1.powf(e) * (e * (y2 / y1).ln()).exp_m1()
}

/// `int_{y1}^{y2} y^m dy`, `y2` possibly infinite.
fn power_integral(m: f64, y1: f64, y2: f64) -> f64 {
    let e = m + 1.0;
    if y2.is_infinite() {
        if e < 0.0 { -y1.powf(e) / e } else { f64::INFINITY }
    } else if e.abs() < 1e-12 {
        (y2 / y1).ln()
    } else {
        pow_diff(y1, y2, e) / e
    }
}

impl Tail {
    pub fn value(&self, lam: f64) -> f64 {
        match *self {
            Tail::Zero => 0.0,
            Tail::Constant { value } => value,
            Tail::PowerLaw { amplitude, exponent, offset } => amplitude * (offset + lam).powf(-exponent),
        }
    }

    pub fn derivative(&self, lam: f64) -> f64 {
        match *self {
            Tail::PowerLaw { amplitude, exponent, offset } => {
                -exponent * amplitude * (offset + lam).powf(-exponent - 1.0)
            }
            _ => 0.0,
        }
    }

    /// Decay rate at infinity; `None` for an identically zero tail.
    pub fn decay_exponent(&self) -> Option<f64> {
        match *self {
            Tail::Zero => None,
            Tail::Constant { value } if value == 0.0 => None,
            Tail::Constant { .. } => Some(0.0),
            Tail::PowerLaw { amplitude, exponent, .. } => (amplitude != 0.0).then_some(exponent),
        }
    }

    /// Tail of `x -> factor * f(sigma x)`.
    pub fn rescaled(&self, factor: f64, sigma: f64) -> Tail {
        match *self {
            Tail::Zero => Tail::Zero,
            Tail::Constant { value } => Tail::Constant { value: factor * value },
            Tail::PowerLaw { amplitude, exponent, offset } => Tail::PowerLaw {
                amplitude: factor * amplitude * sigma.powf(-exponent),
                exponent,
                offset: offset / sigma,
            },
        }
    }

    /// `int_a^b lambda^p tail(lambda) d lambda` for `b` possibly infinite.
    pub fn moment(&self, p: u32, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        match *self {
            Tail::Zero => 0.0,
            Tail::Constant { value } => {
                if value == 0.0 {
                    0.0
                } else if b.is_infinite() {
                    value.signum() * f64::INFINITY
                } else {
                    let q = p as f64 + 1.0;
                    value * (b.powf(q) - a.powf(q)) / q
                }
            }
            Tail::PowerLaw { amplitude, exponent, offset } => {
                if amplitude == 0.0 {
                    return 0.0;
                }
                if a < offset {
                    // binomial expansion below would cancel badly
                    let f = |l: f64| l.powi(p as i32) * amplitude * (offset + l).powf(-exponent);
                    return if b.is_infinite() {
                        quad::adaptive_to_infinity(f, a, 1e-14)
                    } else {
                        quad::adaptive(f, a, b, 1e-14)
                    };
                }
                let (y1, y2) = (offset + a, offset + b);
                let mut acc = 0.0;
                let mut binom = 1.0;
                for k in 0..=p {
                    if k > 0 {
                        binom = binom * (p - k + 1) as f64 / k as f64;
                    }
                    let c = binom * (-offset).powi((p - k) as i32);
                    if c != 0.0 {
                        acc += c * power_integral(k as f64 - exponent, y1, y2);
                    }
                }
                amplitude * acc
            }
        }
    }
}

/// A function of the radial variable with exact or quadrature moments.
pub trait RadialFunction: Send + Sync {
    fn value(&self, lam: f64) -> f64;
    fn derivative(&self, lam: f64) -> f64;
    /// `int_a^b lambda^p f(lambda) d lambda`, `0 <= a <= b <= inf`.
    fn moment(&self, p: u32, a: f64, b: f64) -> f64;
}

/// Piecewise-linear samples on `0 = lambda_0 < ... < lambda_n` plus a tail.
#[derive(Clone, Debug)]
pub struct RadialProfile {
    lam: Vec<f64>,
    val: Vec<f64>,
    deriv: Option<Vec<f64>>,
    tail: Tail,
    step: Option<f64>,
    prefix: [Vec<f64>; 3],
}

/// `int_a^b lambda^p f` for `f` linear from `fa` to `fb`.
fn segment_moment(p: u32, a: f64, b: f64, fa: f64, fb: f64) -> f64 {
    let w = 0.5 * (b - a);
    if w <= 0.0 {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let fm = 0.5 * (fa + fb);
    let s = (fb - fa) / (b - a);
    let w3 = w * w * w;
    match p {
        0 => 2.0 * w * fm,
        1 => 2.0 * w * m * fm + (2.0 / 3.0) * s * w3,
        2 => 2.0 * w * fm * (m * m + w * w / 3.0) + (4.0 / 3.0) * s * m * w3,
        _ => {
            let e = p as f64;
            let g = |x: f64| x.powf(e) * (fm + s * (x - m));
            quad::GaussRule::new(p as usize / 2 + 2).integrate(a, b, g)
        }
    }
}

impl RadialProfile {
    pub fn new(lam: Vec<f64>, val: Vec<f64>, tail: Tail) -> Result<Self> {
        if lam.len() != val.len() || lam.len() < 2 {
            return domain("profile needs at least two samples with matching lengths");
        }
        if lam[0] != 0.0 {
            return domain("profile samples must start at lambda = 0");
        }
        if lam.windows(2).any(|w| !(w[1] > w[0])) {
            return domain("profile nodes must be strictly increasing");
        }
        if val.iter().any(|v| !v.is_finite()) {
            return domain("profile values must be finite");
        }
        if let Tail::PowerLaw { exponent, offset, .. } = tail {
            if !(exponent > 0.0) || !(offset >= 0.0) || offset + lam[lam.len() - 1] <= 0.0 {
                return domain("power-law tail needs exponent > 0 and offset >= 0");
            }
        }
        let n = lam.len() - 1;
        let h = lam[n] / n as f64;
        let uniform = lam.iter().enumerate().all(|(i, &x)| (x - i as f64 * h).abs() <= 1e-12 * lam[n]);
        let mut prof = RadialProfile {
            lam,
            val,
            deriv: None,
            tail,
            step: uniform.then_some(h),
            prefix: [Vec::new(), Vec::new(), Vec::new()],
        };
        prof.build_prefix();
        Ok(prof)
    }

    /// Samples `values[i]` at `i * dr`.
    pub fn uniform(dr: f64, values: Vec<f64>, tail: Tail) -> Result<Self> {
        let lam = (0..values.len()).map(|i| i as f64 * dr).collect();
        let mut p = RadialProfile::new(lam, values, tail)?;
        p.step = Some(dr);
        Ok(p)
    }

    pub fn sample(dr: f64, n: usize, f: impl Fn(f64) -> f64, tail: Tail) -> Result<Self> {
        RadialProfile::uniform(dr, (0..=n).map(|i| f(i as f64 * dr)).collect(), tail)
    }

    /// Samples with exact derivative values (C1 semantics).
    pub fn sample_c1(
        dr: f64,
        n: usize,
        f: impl Fn(f64) -> f64,
        df: impl Fn(f64) -> f64,
        tail: Tail,
    ) -> Result<Self> {
        let p = RadialProfile::sample(dr, n, f, tail)?;
        let d = (0..=n).map(|i| df(i as f64 * dr)).collect();
        p.with_derivative(d)
    }

    pub fn zero(dr: f64, n: usize) -> Self {
        RadialProfile::uniform(dr, vec![0.0; n + 1], Tail::Zero).expect("zero profile is valid")
    }

    pub fn with_derivative(mut self, d: Vec<f64>) -> Result<Self> {
        if d.len() != self.lam.len() || d.iter().any(|v| !v.is_finite()) {
            return domain("derivative samples must match nodes and be finite");
        }
        self.deriv = Some(d);
        Ok(self)
    }

    fn build_prefix(&mut self) {
        for p in 0..3u32 {
            let mut acc = Vec::with_capacity(self.lam.len());
            let mut s = 0.0;
            acc.push(0.0);
            for k in 0..self.lam.len() - 1 {
                s += segment_moment(p, self.lam[k], self.lam[k + 1], self.val[k], self.val[k + 1]);
                acc.push(s);
            }
            self.prefix[p as usize] = acc;
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.lam
    }

    pub fn values(&self) -> &[f64] {
        &self.val
    }

    pub fn derivatives(&self) -> Option<&[f64]> {
        self.deriv.as_deref()
    }

    pub fn tail(&self) -> Tail {
        self.tail
    }

    pub fn step(&self) -> Option<f64> {
        self.step
    }

    pub fn r_max(&self) -> f64 {
        self.lam[self.lam.len() - 1]
    }

    pub fn len(&self) -> usize {
        self.lam.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_zero(&self) -> bool {
        self.val.iter().all(|&v| v == 0.0) && self.tail.decay_exponent().is_none()
    }

    /// Profile of `x -> factor * self(x)`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut p = self.clone();
        p.val.iter_mut().for_each(|v| *v *= factor);
        if let Some(d) = p.deriv.as_mut() {
            d.iter_mut().for_each(|v| *v *= factor);
        }
        p.tail = p.tail.rescaled(factor, 1.0);
        p.build_prefix();
        p
    }

    /// Segment index `k` with `lam_k <= x <= lam_{k+1}`, for `x` in `[0, r_max]`.
    fn locate(&self, x: f64) -> usize {
        let n = self.lam.len() - 1;
        let k = match self.step {
            Some(h) => (x / h).floor() as usize,
            None => self.lam.partition_point(|&l| l <= x).saturating_sub(1),
        };
        k.min(n - 1)
    }

    fn interp(&self, x: f64) -> f64 {
        let k = self.locate(x);
        let (a, b) = (self.lam[k], self.lam[k + 1]);
        let w = ((x - a) / (b - a)).clamp(0.0, 1.0);
        self.val[k] + w * (self.val[k + 1] - self.val[k])
    }

    fn partial(&self, p: u32, x: f64) -> f64 {
        let k = self.locate(x);
        self.prefix[p as usize][k] + segment_moment(p, self.lam[k], x, self.val[k], self.interp(x))
    }

    fn inner_moment(&self, p: u32, a: f64, b: f64) -> f64 {
        let (ka, kb) = (self.locate(a), self.locate(b));
        if kb == ka {
            return segment_moment(p, a, b, self.interp(a), self.interp(b));
        }
        if kb - ka > 8 {
            return self.partial(p, b) - self.partial(p, a);
        }
        let mut acc = segment_moment(p, a, self.lam[ka + 1], self.interp(a), self.val[ka + 1]);
        for k in ka + 1..kb {
            acc += segment_moment(p, self.lam[k], self.lam[k + 1], self.val[k], self.val[k + 1]);
        }
        acc + segment_moment(p, self.lam[kb], b, self.val[kb], self.interp(b))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["lambda", "value"])?;
        for (l, v) in self.lam.iter().zip(&self.val) {
            out.write_record([l.to_string(), v.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

impl RadialFunction for RadialProfile {
    fn value(&self, lam: f64) -> f64 {
        let x = lam.abs();
        if x <= self.r_max() { self.interp(x) } else { self.tail.value(x) }
    }

    fn derivative(&self, lam: f64) -> f64 {
        let x = lam.abs();
        if x > self.r_max() {
            return self.tail.derivative(x);
        }
        let k = self.locate(x);
        let (a, b) = (self.lam[k], self.lam[k + 1]);
        match &self.deriv {
            Some(d) => {
                let w = ((x - a) / (b - a)).clamp(0.0, 1.0);
                d[k] + w * (d[k + 1] - d[k])
            }
            None => (self.val[k + 1] - self.val[k]) / (b - a),
        }
    }

    fn moment(&self, p: u32, a: f64, b: f64) -> f64 {
        if !(b > a) {
            return 0.0;
        }
        let a = a.max(0.0);
        let r_max = self.r_max();
        let mut acc = 0.0;
        if a < r_max {
            acc += self.inner_moment(p, a, b.min(r_max));
        }
        if b > r_max {
            acc += self.tail.moment(p, a.max(r_max), b);
        }
        acc
    }
}

/// `sum_k c_k lambda^k`, with exact moments.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    pub coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Polynomial { coeffs }
    }
}

impl RadialFunction for Polynomial {
    fn value(&self, lam: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * lam + c)
    }

    fn derivative(&self, lam: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, c)| acc * lam + k as f64 * c)
    }

    fn moment(&self, p: u32, a: f64, b: f64) -> f64 {
        if !(b > a) {
            return 0.0;
        }
        if b.is_infinite() {
            return if self.coeffs.iter().all(|&c| c == 0.0) { 0.0 } else { f64::INFINITY };
        }
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let q = (k as u32 + p + 1) as i32;
                c * (b.powi(q) - a.powi(q)) / q as f64
            })
            .sum()
    }
}

/// A closure with its derivative; moments by adaptive quadrature.
pub struct Analytic<F, D> {
    f: F,
    df: D,
}

impl<F, D> Analytic<F, D>
where
    F: Fn(f64) -> f64 + Send + Sync,
    D: Fn(f64) -> f64 + Send + Sync,
{
    pub fn new(f: F, df: D) -> Self {
        Analytic { f, df }
    }
}

impl<F, D> RadialFunction for Analytic<F, D>
where
    F: Fn(f64) -> f64 + Send + Sync,
    D: Fn(f64) -> f64 + Send + Sync,
{
    fn value(&self, lam: f64) -> f64 {
        (self.f)(lam)
    }

    fn derivative(&self, lam: f64) -> f64 {
        (self.df)(lam)
    }

    fn moment(&self, p: u32, a: f64, b: f64) -> f64 {
        let g = |l: f64| l.powi(p as i32) * (self.f)(l);
        if b.is_infinite() {
            quad::adaptive_to_infinity(g, a, 1e-13)
        } else {
            quad::adaptive(g, a, b, 1e-13)
        }
    }
}

/// Named initial-data families; `u0` and `u1` are radial profiles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DataFamily {
    /// `u0 = 0`, `u1 = B (1 + lambda)^-(kappa + 1)`
    Blowup { b: f64, kappa: f64 },
    /// `u0 = A exp(-(lambda / width)^2)`, `u1 = 0`
    GaussianBump { amplitude: f64, width: f64 },
    /// `u0 = 0`, `u1 = A (1 - (lambda / radius)^2)^2` on `lambda < radius`
    CompactBump { amplitude: f64, radius: f64 },
}

impl DataFamily {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            DataFamily::Blowup { b, kappa } => b > 0.0 && kappa > 0.0 && b.is_finite() && kappa.is_finite(),
            DataFamily::GaussianBump { amplitude, width } => amplitude.is_finite() && width > 0.0,
            DataFamily::CompactBump { amplitude, radius } => amplitude.is_finite() && radius > 0.0,
        };
        if ok { Ok(()) } else { config(format!("invalid data family parameters: {self:?}")) }
    }

    /// The decay rate the family is built for; bumps decay faster than any power.
    pub fn kappa(&self) -> Option<f64> {
        match *self {
            DataFamily::Blowup { kappa, .. } => Some(kappa),
            _ => None,
        }
    }

    pub fn u0(&self, lam: f64) -> f64 {
        match *self {
            DataFamily::GaussianBump { amplitude, width } => amplitude * (-(lam / width).powi(2)).exp(),
            _ => 0.0,
        }
    }

    pub fn du0(&self, lam: f64) -> f64 {
        match *self {
            DataFamily::GaussianBump { amplitude, width } => {
                -2.0 * lam / (width * width) * amplitude * (-(lam / width).powi(2)).exp()
            }
            _ => 0.0,
        }
    }

    pub fn u1(&self, lam: f64) -> f64 {
        match *self {
            DataFamily::Blowup { b, kappa } => b * (1.0 + lam).powf(-(kappa + 1.0)),
            DataFamily::CompactBump { amplitude, radius } if lam < radius => {
                let q = 1.0 - (lam / radius).powi(2);
                amplitude * q * q
            }
            _ => 0.0,
        }
    }

    pub fn u1_tail(&self) -> Tail {
        match *self {
            DataFamily::Blowup { b, kappa } => Tail::PowerLaw { amplitude: b, exponent: kappa + 1.0, offset: 1.0 },
            _ => Tail::Zero,
        }
    }
}

/// Scaling `u0 -> sigma^((5-gamma)/2) u0(sigma x)`, `u1 -> sigma^((7-gamma)/2) u1(sigma x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rescaling {
    pub sigma: f64,
    pub gamma: f64,
}

impl Rescaling {
    pub const IDENTITY: Rescaling = Rescaling { sigma: 1.0, gamma: 2.0 };

    pub fn u0_factor(&self) -> f64 {
        self.sigma.powf((5.0 - self.gamma) / 2.0)
    }

    pub fn u1_factor(&self) -> f64 {
        self.sigma.powf((7.0 - self.gamma) / 2.0)
    }
}

#[derive(Clone, Debug)]
pub struct InitialDataSet {
    pub u0: RadialProfile,
    pub u1: RadialProfile,
    pub kappa: f64,
    source: Option<(DataFamily, Rescaling)>,
}

impl InitialDataSet {
    pub fn new(u0: RadialProfile, u1: RadialProfile, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0) {
            return config(format!("kappa must be positive, got {kappa}"));
        }
        if u0.derivatives().is_none() {
            return domain("u0 must carry derivative samples");
        }
        let data = InitialDataSet { u0, u1, kappa, source: None };
        data.check_tails()?;
        Ok(data)
    }

    fn check_tails(&self) -> Result<()> {
        for (tail, want) in [(self.u0.tail(), self.kappa), (self.u1.tail(), self.kappa + 1.0)] {
            if let Tail::PowerLaw { exponent, .. } = tail {
                if (exponent - want).abs() > 1e-12 * want.max(1.0) {
                    return config(format!("tail exponent {exponent} does not match kappa = {}", self.kappa));
                }
            }
        }
        Ok(())
    }

    /// Samples a family on `[0, r_max]` with spacing `dr`; bumps default to `kappa = 3/2`.
    pub fn from_family(family: &DataFamily, dr: f64, r_max: f64) -> Result<Self> {
        InitialDataSet::build(family, Rescaling::IDENTITY, family.kappa().unwrap_or(1.5), dr, r_max)
    }

    fn build(family: &DataFamily, sc: Rescaling, kappa: f64, dr: f64, r_max: f64) -> Result<Self> {
        family.validate()?;
        let n = (r_max / dr).round() as usize;
        if n < 2 {
            return config("data grid needs at least two cells");
        }
        let (f0, f1, s) = (sc.u0_factor(), sc.u1_factor(), sc.sigma);
        let u0 = RadialProfile::sample_c1(
            dr,
            n,
            |l| f0 * family.u0(s * l),
            |l| f0 * s * family.du0(s * l),
            Tail::Zero,
        )?;
        let u1 = RadialProfile::sample(dr, n, |l| f1 * family.u1(s * l), family.u1_tail().rescaled(f1, s))?;
        let mut data = InitialDataSet::new(u0, u1, kappa)?;
        data.source = Some((family.clone(), sc));
        Ok(data)
    }

    pub fn with_kappa(mut self, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0) {
            return config(format!("kappa must be positive, got {kappa}"));
        }
        self.kappa = kappa;
        self.check_tails()?;
        Ok(self)
    }

    pub fn family(&self) -> Option<&DataFamily> {
        self.source.as_ref().map(|(f, _)| f)
    }

    pub fn rescaling(&self) -> Option<Rescaling> {
        self.source.as_ref().map(|(_, s)| *s)
    }

    pub fn dr(&self) -> f64 {
        self.u0.step().unwrap_or(self.u0.r_max() / (self.u0.len() - 1) as f64)
    }

    /// Data of the scaled solution `sigma^((5-gamma)/2) u(sigma x, sigma t)`, sampled on `dr / sigma`.
    pub fn rescaled(&self, sigma: f64, gamma: f64) -> Result<Self> {
        let Some((family, sc)) = &self.source else {
            return config("rescaling needs data built from a named family");
        };
        if !(sigma > 0.0) {
            return domain(format!("sigma must be positive, got {sigma}"));
        }
        if sc.sigma != 1.0 && sc.gamma != gamma {
            return config("composed rescalings must share gamma");
        }
        let next = Rescaling { sigma: sc.sigma * sigma, gamma };
        InitialDataSet::build(family, next, self.kappa, self.dr() / sigma, self.u0.r_max() / sigma)
    }

    pub fn sup_abs_u0(&self) -> f64 {
        let nodes = self.u0.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        nodes.max(self.u0.tail().value(self.u0.r_max()).abs())
    }
}

/// `int_{|omega|=1} b(|x + rho omega|) dS` with `|x| = r`.
pub fn spherical_mean(b: &impl RadialFunction, r: f64, rho: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return domain(format!("rho must be positive, got {rho}"));
    }
    if !(r >= 0.0) {
        return domain(format!("r must be non-negative, got {r}"));
    }
    if r == 0.0 {
        return Ok(FOUR_PI * b.value(rho));
    }
    Ok(2.0 * PI / (r * rho) * b.moment(1, (rho - r).abs(), rho + r))
}

/// `W(phi | r, t) = (1/2r) int_{|r-t|}^{r+t} lambda phi(lambda) d lambda`.
pub fn w_operator(phi: &impl RadialFunction, r: f64, t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    if r == 0.0 {
        return t * phi.value(t);
    }
    phi.moment(1, (r - t).abs(), r + t) / (2.0 * r)
}

/// Exact time derivative of `W(phi | r, t)`.
pub fn dt_w_operator(phi: &impl RadialFunction, r: f64, t: f64) -> f64 {
    if r == 0.0 {
        return phi.value(t) + t * phi.derivative(t);
    }
    ((r + t) * phi.value(r + t) + (r - t) * phi.value((r - t).abs())) / (2.0 * r)
}

/// `u0(r, t) = eps (dt W(u0) + W(u1))`.
pub fn free_solution(data: &InitialDataSet, eps: f64, r: f64, t: f64) -> f64 {
    if eps == 0.0 {
        return 0.0;
    }
    eps * (dt_w_operator(&data.u0, r, t) + w_operator(&data.u1, r, t))
}
