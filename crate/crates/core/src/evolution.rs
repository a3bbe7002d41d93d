//! The Duhamel operator on the characteristic mesh, the slab-by-slab solver of
//! the integral equation, a finite-difference cross-check, and lifespan sweeps.

use crate::analysis::y_norm;
use crate::convolution::{check_tail, Gamma, HartreeOperator, SlabTail};
use crate::error::{config, domain, Error, Result};
use crate::radial::{free_solution, DataFamily, Grid, InitialDataSet, RadialFunction, RadialProfile, Tail};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Run parameters attached to a solved field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    pub eps: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub family: Option<DataFamily>,
}

/// `u(lambda_i, s_j)` on the causal trapezoid; slab `j` holds nodes `0..=n_r - j`.
#[derive(Clone, Debug)]
pub struct SpaceTimeField {
    grid: Grid,
    rows: Vec<Vec<f64>>,
    finalized: usize,
    meta: Option<FieldMeta>,
}

impl SpaceTimeField {
    pub fn new(grid: Grid) -> Self {
        SpaceTimeField { grid, rows: Vec::new(), finalized: 0, meta: None }
    }

    /// Samples `f(r, t)` on every slab.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64 + Sync) -> Self {
        let rows = (0..=grid.n_t)
            .into_par_iter()
            .map(|j| (0..=grid.row_end(j)).map(|i| f(grid.r(i), grid.t(j))).collect())
            .collect::<Vec<Vec<f64>>>();
        SpaceTimeField { grid, finalized: rows.len(), rows, meta: None }
    }

    /// Rebuilds a field from slabs in order; empty slabs count as finalized but not kept.
    pub fn from_rows(grid: Grid, rows: Vec<Vec<f64>>, meta: Option<FieldMeta>) -> Result<Self> {
        let mut f = SpaceTimeField::new(grid);
        for (j, row) in rows.into_iter().enumerate() {
            if row.is_empty() {
                f.finalize_dropped(j, grid.row_end(j.min(grid.n_t)) + 1)?;
            } else {
                f.finalize(j, row)?;
            }
        }
        f.meta = meta;
        Ok(f)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn meta(&self) -> Option<&FieldMeta> {
        self.meta.as_ref()
    }

    pub fn set_meta(&mut self, meta: FieldMeta) {
        self.meta = Some(meta);
    }

    /// Number of finalized slabs.
    pub fn finalized(&self) -> usize {
        self.finalized
    }

    pub fn finalize(&mut self, j: usize, values: Vec<f64>) -> Result<()> {
        self.check_next(j, values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return domain(format!("slab {j} has non-finite values"));
        }
        self.rows.push(values);
        self.finalized += 1;
        Ok(())
    }

    fn finalize_dropped(&mut self, j: usize, len: usize) -> Result<()> {
        self.check_next(j, len)?;
        self.rows.push(Vec::new());
        self.finalized += 1;
        Ok(())
    }

    fn check_next(&self, j: usize, len: usize) -> Result<()> {
        if j != self.finalized {
            return Err(Error::Sequencing { needed: self.finalized, finalized: self.finalized });
        }
        if j > self.grid.n_t || len != self.grid.row_end(j) + 1 {
            return domain(format!("slab {j} must hold {} values", self.grid.row_end(j.min(self.grid.n_t)) + 1));
        }
        Ok(())
    }

    pub fn row(&self, j: usize) -> Option<&[f64]> {
        self.rows.get(j).filter(|r| !r.is_empty()).map(|r| r.as_slice())
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.row(j).and_then(|r| r.get(i).copied())
    }

    /// Stored nodes as `(i, j, u)`.
    pub fn nodes(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.rows.iter().enumerate().flat_map(|(j, r)| r.iter().enumerate().map(move |(i, &u)| (i, j, u)))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let rows = self.rows.iter().map(|r| r.iter().map(|&v| f(v)).collect()).collect();
        SpaceTimeField { grid: self.grid, rows, finalized: self.finalized, meta: self.meta.clone() }
    }

    /// Slab `j` as a radial profile; beyond the last node a power law with the
    /// given exponent and offset is matched to the last value.
    pub fn slice(&self, j: usize, decay: Option<(f64, f64)>) -> Result<RadialProfile> {
        let row = self.row(j).ok_or(Error::Sequencing { needed: j, finalized: self.finalized })?;
        let big_r = self.grid.r(row.len() - 1);
        let tail = match decay {
            Some((p, c)) => Tail::PowerLaw { amplitude: row[row.len() - 1] * (c + big_r).powf(p), exponent: p, offset: c },
            None => Tail::Zero,
        };
        RadialProfile::uniform(self.grid.dr, row.to_vec(), tail)
    }
}

/// `N = (V * u^2) u` on finalized slabs together with the running sums that
/// make every Duhamel node value an O(1) update.
///
/// `phi(i, j)` is the integral of `G = lambda N` over the backward triangle of
/// node `(i, j)` with `G` extended oddly to `lambda < 0`; the odd part cancels
/// the reflected piece, so `phi / (2 r)` is the Duhamel term. Adjacent
/// triangles differ by one characteristic diamond, integrated by its vertex
/// average. At `r = 0` the term is a line integral along `lambda + s = t`,
/// accumulated in `alpha`.
#[derive(Clone, Debug)]
pub struct NonlinearityField {
    grid: Grid,
    rows: Vec<Vec<f64>>,
    phi: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    finalized: usize,
    keep_history: bool,
}

/// The part of the next slab's Duhamel values that is already determined.
#[derive(Clone, Debug)]
pub struct Pending {
    pub slab: usize,
    /// `phi(i, slab)` without the contribution of `G(i, slab)`.
    pub partial: Vec<f64>,
    /// Weight of `G(i, slab)` in `phi(i, slab)`.
    pub coef: f64,
    /// Duhamel value at `r = 0`.
    pub origin: f64,
}

impl NonlinearityField {
    pub fn new(grid: Grid, keep_history: bool) -> Self {
        NonlinearityField {
            grid,
            rows: Vec::new(),
            phi: Vec::new(),
            alpha: vec![0.0; grid.n_r + 1],
            finalized: 0,
            keep_history,
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut nl = NonlinearityField::new(grid, true);
        for j in 0..=grid.n_t {
            let row = (0..=grid.row_end(j)).map(|i| f(grid.r(i), grid.t(j))).collect();
            nl.push(row).expect("rows are sized by the grid");
        }
        nl
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn finalized(&self) -> usize {
        self.finalized
    }

    pub fn row(&self, j: usize) -> Option<&[f64]> {
        self.rows.get(j).filter(|r| !r.is_empty()).map(|r| r.as_slice())
    }

    fn g(&self, i: usize, j: usize) -> f64 {
        self.grid.r(i) * self.rows[j][i]
    }

    pub fn pending(&self) -> Pending {
        let j = self.finalized;
        let h = self.grid.dr;
        let m = self.grid.row_end(j.min(self.grid.n_t));
        let origin = self.alpha.get(j).copied().unwrap_or(0.0);
        let mut partial = vec![0.0; m + 1];
        let coef = match j {
            0 => 0.0,
            1 => {
                let c = h * h / 3.0;
                for (i, p) in partial.iter_mut().enumerate().skip(1) {
                    *p = c * (self.g(i - 1, 0) + self.g(i + 1, 0));
                }
                c
            }
            _ => {
                let c = 0.5 * h * h;
                let (p1, p2) = (&self.phi[j - 1], &self.phi[j - 2]);
                for (i, p) in partial.iter_mut().enumerate().skip(1) {
                    *p = p1[i + 1] + p1[i - 1] - p2[i] + c * (self.g(i, j - 2) + self.g(i - 1, j - 1) + self.g(i + 1, j - 1));
                }
                c
            }
        };
        Pending { slab: j, partial, coef, origin }
    }

    /// Finalizes the next slab of `N`.
    pub fn push(&mut self, n_row: Vec<f64>) -> Result<()> {
        let j = self.finalized;
        if j > self.grid.n_t {
            return domain("all slabs are already finalized");
        }
        let m = self.grid.row_end(j);
        if n_row.len() != m + 1 {
            return domain(format!("slab {j} needs {} values, got {}", m + 1, n_row.len()));
        }
        let pend = self.pending();
        let h = self.grid.dr;
        let phi_row: Vec<f64> = (0..=m)
            .map(|i| if i == 0 { 0.0 } else { pend.partial[i] + pend.coef * self.grid.r(i) * n_row[i] })
            .collect();
        let w = if j == 0 { 0.5 * h } else { h };
        for (i, &v) in n_row.iter().enumerate() {
            if i + j <= self.grid.n_r {
                self.alpha[i + j] += w * self.grid.r(i) * v;
            }
        }
        self.rows.push(n_row);
        self.phi.push(phi_row);
        self.finalized += 1;
        if !self.keep_history && j >= 2 {
            self.rows[j - 2] = Vec::new();
            self.phi[j - 2] = Vec::new();
        }
        Ok(())
    }

    /// Duhamel term at node `(i, j)`.
    pub fn duhamel_node(&self, i: usize, j: usize) -> Result<f64> {
        if j >= self.finalized {
            return Err(Error::Sequencing { needed: j, finalized: self.finalized });
        }
        if i == 0 {
            return Ok(self.alpha[j]);
        }
        match self.phi[j].get(i) {
            Some(p) => Ok(p / (2.0 * self.grid.r(i))),
            None if self.phi[j].is_empty() => config(format!("slab {j} was not kept")),
            None => domain(format!("node {i} lies outside slab {j}")),
        }
    }

    fn row_moment1(&self, k: usize, a: f64, b: f64) -> f64 {
        let row = &self.rows[k];
        let p = RadialProfile::uniform(self.grid.dr, row.clone(), Tail::Zero).expect("row profile");
        p.moment(1, a, b)
    }

    /// `(1/2r) iint_{D(r,t)} lambda N d lambda ds`; node values come from the
    /// recurrence, other points from the slab trapezoid rule with exact
    /// lambda-integrals of the piecewise-linear rows.
    pub fn duhamel(&self, r: f64, t: f64) -> Result<f64> {
        if !(r >= 0.0 && t >= 0.0) {
            return domain(format!("need r, t >= 0, got ({r}, {t})"));
        }
        if t == 0.0 {
            return Ok(0.0);
        }
        let h = self.grid.dr;
        let (fi, fj) = (r / h, t / h);
        let (i, j) = (fi.round(), fj.round());
        let on_node = (fi - i).abs() < 1e-9 && (fj - j).abs() < 1e-9;
        if on_node {
            let (i, j) = (i as usize, j as usize);
            if j < self.finalized && self.phi[j].len() > i {
                return self.duhamel_node(i, j);
            }
        }
        let last = (fj + 1e-9).floor() as usize;
        if last >= self.finalized {
            return Err(Error::Sequencing { needed: last, finalized: self.finalized });
        }
        if r + t > self.grid.r_max() * (1.0 + 1e-12) {
            return domain(format!("({r}, {t}) depends on data beyond r_max"));
        }
        if (0..=last).any(|k| self.rows[k].is_empty()) {
            return config("off-grid Duhamel values need the full slab history");
        }
        let slab = |k: usize| -> f64 {
            let s = (k as f64 * h).min(t);
            if r == 0.0 {
                let lam = t - s;
                let p = RadialProfile::uniform(h, self.rows[k].clone(), Tail::Zero).expect("row profile");
                lam * p.value(lam)
            } else {
                self.row_moment1(k, (r - t + s).abs(), r + t - s)
            }
        };
        let vals: Vec<f64> = (0..=last).map(slab).collect();
        let mut acc = 0.0;
        for k in 0..last {
            acc += 0.5 * h * (vals[k] + vals[k + 1]);
        }
        acc += 0.5 * (t - last as f64 * h) * vals[last];
        Ok(if r == 0.0 { acc } else { acc / (2.0 * r) })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    PicardDivergence,
    NormThreshold,
    HorizonReached,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Termination::PicardDivergence => "picard-divergence",
            Termination::NormThreshold => "norm-threshold",
            Termination::HorizonReached => "horizon-reached",
        })
    }
}

/// Lifespan bracket; a run that reaches the horizon reports `t_low = t_high = t_max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LifespanEstimate {
    pub eps: f64,
    pub t_low: f64,
    pub t_high: f64,
    pub reason: Termination,
}

impl LifespanEstimate {
    pub fn t(&self) -> f64 {
        0.5 * (self.t_low + self.t_high)
    }

    pub fn reached_horizon(&self) -> bool {
        self.reason == Termination::HorizonReached
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Blow-up threshold on `|u|`; default `1e6 * eps * ||data||_Y`.
    pub value_cap: Option<f64>,
    /// Iterate every slab to a fixed point instead of predictor plus corrector.
    pub full_picard: bool,
    pub picard_tol: f64,
    pub max_picard: usize,
    pub store_field: bool,
    /// `false` replaces the nonlinearity by zero.
    pub nonlinearity: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            value_cap: None,
            full_picard: false,
            picard_tol: 1e-12,
            max_picard: 60,
            store_field: true,
            nonlinearity: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SlabOutcome {
    Converged { iterations: usize, correction: f64 },
    Diverged { norm_history: Vec<f64>, reason: Termination },
}

pub struct SolveReport {
    pub field: SpaceTimeField,
    pub nonlinearity: NonlinearityField,
    pub lifespan: LifespanEstimate,
    /// `max |u|` per finalized slab.
    pub slab_sup: Vec<f64>,
    /// Weighted sup `<t+r><t-r>^((3-gamma)/2) |u|` per finalized slab.
    pub slab_x_norm: Vec<f64>,
    /// Relative size of the corrector update per slab.
    pub corrections: Vec<f64>,
}

impl SolveReport {
    /// Running `X_gamma` norm up to and including slab `j`.
    pub fn x_norm_until(&self, j: usize) -> f64 {
        self.slab_x_norm[..=j.min(self.slab_x_norm.len() - 1)].iter().fold(0.0, |m, &v| m.max(v))
    }
}

pub(crate) fn x_weight(gamma: f64, r: f64, t: f64) -> f64 {
    (1.0 + t + r) * (1.0 + (t - r).abs()).powf((3.0 - gamma) / 2.0)
}

/// Far-field decay of the free solution, from the data tails.
fn slab_decay(data: &InitialDataSet) -> Option<SlabTail> {
    [data.u0.tail(), data.u1.tail()]
        .into_iter()
        .filter_map(|t| match t {
            Tail::PowerLaw { amplitude, exponent, offset } if amplitude != 0.0 => Some(SlabTail { exponent, offset }),
            _ => None,
        })
        .min_by(|a, b| a.exponent.partial_cmp(&b.exponent).unwrap())
}

/// State of a slab-by-slab solve of `u = eps u0 + L((V * u^2) u)`.
pub struct Solver<'a> {
    data: &'a InitialDataSet,
    eps: f64,
    gamma: Gamma,
    grid: Grid,
    opts: SolverOptions,
    cap: f64,
    op: Option<HartreeOperator>,
    field: SpaceTimeField,
    nl: NonlinearityField,
    slab_sup: Vec<f64>,
    slab_x_norm: Vec<f64>,
    corrections: Vec<f64>,
}

fn validate(data: &InitialDataSet, eps: f64, gamma: Gamma, grid: &Grid) -> Result<()> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return config(format!("eps must be finite and non-negative, got {eps}"));
    }
    let dr = data.dr();
    if (dr - grid.dr).abs() > 1e-12 * grid.dr {
        return config(format!("data spacing {dr} differs from grid spacing {}", grid.dr));
    }
    check_tail(data.u0.tail(), gamma)?;
    check_tail(data.u1.tail(), gamma)?;
    Ok(())
}

fn build_operator(data: &InitialDataSet, gamma: Gamma, grid: &Grid) -> Result<HartreeOperator> {
    let op = HartreeOperator::new(gamma, grid.dr, grid.n_r)?;
    match slab_decay(data) {
        Some(t) => op.with_tail(t),
        None => Ok(op),
    }
}

fn default_cap(data: &InitialDataSet, eps: f64, opts: &SolverOptions) -> Result<f64> {
    let cap = match opts.value_cap {
        Some(c) => c,
        None => 1e6 * eps * y_norm(data, data.kappa),
    };
    if eps > 0.0 && !(cap > eps * data.sup_abs_u0()) {
        return config(format!("value_cap {cap} must exceed the initial sup {}", eps * data.sup_abs_u0()));
    }
    Ok(cap)
}

fn free_row(data: &InitialDataSet, eps: f64, grid: &Grid, j: usize) -> Vec<f64> {
    let t = grid.t(j);
    (0..=grid.n_r).into_par_iter().map(|i| free_solution(data, eps, grid.r(i), t)).collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn sup_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

impl<'a> Solver<'a> {
    pub fn new(data: &'a InitialDataSet, eps: f64, gamma: Gamma, grid: Grid, opts: SolverOptions) -> Result<Self> {
        validate(data, eps, gamma, &grid)?;
        let cap = default_cap(data, eps, &opts)?;
        let op = if opts.nonlinearity && eps > 0.0 { Some(build_operator(data, gamma, &grid)?) } else { None };
        let mut field = SpaceTimeField::new(grid);
        field.set_meta(FieldMeta { eps, gamma: gamma.value(), kappa: data.kappa, family: data.family().cloned() });
        Ok(Solver {
            data,
            eps,
            gamma,
            grid,
            cap,
            op,
            field,
            nl: NonlinearityField::new(grid, opts.store_field),
            opts,
            slab_sup: Vec::new(),
            slab_x_norm: Vec::new(),
            corrections: Vec::new(),
        })
    }

    pub fn value_cap(&self) -> f64 {
        self.cap
    }

    pub fn next_slab(&self) -> usize {
        self.field.finalized()
    }

    fn nonlin(&self, u: &[f64], free: &[f64]) -> Vec<f64> {
        let m = u.len() - 1;
        match &self.op {
            None => vec![0.0; m + 1],
            Some(op) => {
                let mut ext = free.to_vec();
                ext[..=m].copy_from_slice(u);
                let p = op.apply(&ext, m);
                p.iter().zip(u).map(|(p, u)| p * u).collect()
            }
        }
    }

    fn commit(&mut self, j: usize, u: Vec<f64>, n: Vec<f64>, correction: f64) -> Result<()> {
        let t = self.grid.t(j);
        let g = self.gamma.value();
        let xn = u.iter().enumerate().fold(0.0f64, |m, (i, v)| m.max(x_weight(g, self.grid.r(i), t) * v.abs()));
        self.slab_sup.push(sup_abs(&u));
        self.slab_x_norm.push(xn);
        self.corrections.push(correction);
        self.nl.push(n)?;
        if self.opts.store_field {
            self.field.finalize(j, u)
        } else {
            let len = u.len();
            self.field.finalize_dropped(j, len)
        }
    }

    fn blown_up(&self, u: &[f64]) -> bool {
        u.iter().any(|v| !v.is_finite() || v.abs() > self.cap)
    }

    /// Computes and finalizes the next slab.
    pub fn step(&mut self) -> Result<SlabOutcome> {
        let j = self.next_slab();
        if j > self.grid.n_t {
            return domain("horizon already reached");
        }
        let free = free_row(self.data, self.eps, &self.grid, j);
        let m = self.grid.row_end(j);
        if j == 0 {
            let u = free[..=m].to_vec();
            let n = self.nonlin(&u, &free);
            self.commit(0, u, n, 0.0)?;
            return Ok(SlabOutcome::Converged { iterations: 0, correction: 0.0 });
        }
        let pend = self.nl.pending();
        let h = self.grid.dr;
        let update = |n: &[f64]| -> Vec<f64> {
            (0..=m)
                .map(|i| {
                    if i == 0 {
                        free[0] + pend.origin
                    } else {
                        let lam = i as f64 * h;
                        free[i] + (pend.partial[i] + pend.coef * lam * n[i]) / (2.0 * lam)
                    }
                })
                .collect()
        };
        let n1 = self.nl.row(j - 1).expect("previous slab is kept");
        let predicted: Vec<f64> = match self.nl.row(j.wrapping_sub(2)).filter(|_| j >= 2) {
            Some(n2) => (0..=m).map(|i| 2.0 * n1[i] - n2[i]).collect(),
            None => n1[..=m].to_vec(),
        };
        let mut u = update(&predicted);
        let mut history = Vec::new();
        let mut iterations = 0;
        let mut n;
        loop {
            if self.blown_up(&u) {
                return Ok(SlabOutcome::Diverged { norm_history: history, reason: Termination::NormThreshold });
            }
            n = self.nonlin(&u, &free);
            let next = update(&n);
            let delta = max_diff(&next, &u);
            iterations += 1;
            let floor = 64.0 * f64::EPSILON * sup_abs(&next);
            let grew = history.last().is_some_and(|&prev| delta > prev && delta > floor);
            history.push(delta);
            u = next;
            if grew {
                return Ok(SlabOutcome::Diverged { norm_history: history, reason: Termination::PicardDivergence });
            }
            let done = if self.opts.full_picard {
                delta <= self.opts.picard_tol * sup_abs(&u).max(f64::MIN_POSITIVE) || iterations >= self.opts.max_picard
            } else {
                iterations >= 2
            };
            if done {
                break;
            }
        }
        if self.blown_up(&u) {
            return Ok(SlabOutcome::Diverged { norm_history: history, reason: Termination::NormThreshold });
        }
        let correction = history[0] / sup_abs(&u).max(f64::MIN_POSITIVE);
        self.commit(j, u, n, correction)?;
        Ok(SlabOutcome::Converged { iterations, correction })
    }

    /// Marches to the horizon or the first failed slab.
    pub fn run(mut self) -> Result<SolveReport> {
        let mut reason = Termination::HorizonReached;
        while self.next_slab() <= self.grid.n_t {
            if let SlabOutcome::Diverged { reason: r, .. } = self.step()? {
                reason = r;
                break;
            }
        }
        let done = self.next_slab();
        let lifespan = if reason == Termination::HorizonReached {
            LifespanEstimate { eps: self.eps, t_low: self.grid.t_max(), t_high: self.grid.t_max(), reason }
        } else {
            LifespanEstimate { eps: self.eps, t_low: self.grid.t(done - 1), t_high: self.grid.t(done), reason }
        };
        Ok(SolveReport {
            field: self.field,
            nonlinearity: self.nl,
            lifespan,
            slab_sup: self.slab_sup,
            slab_x_norm: self.slab_x_norm,
            corrections: self.corrections,
        })
    }
}

/// Solves the integral equation slab by slab on `grid`.
pub fn solve(data: &InitialDataSet, eps: f64, gamma: Gamma, grid: Grid, opts: &SolverOptions) -> Result<SolveReport> {
    Solver::new(data, eps, gamma, grid, opts.clone())?.run()
}

/// Leapfrog for `v = r u` on the characteristic mesh, `v_tt - v_rr = r N`,
/// with `v(0, t) = 0`. At CFL one the scheme is exact for the free wave.
pub fn solve_fd_fastpath(data: &InitialDataSet, eps: f64, gamma: Gamma, grid: Grid, opts: &SolverOptions) -> Result<SolveReport> {
    validate(data, eps, gamma, &grid)?;
    let cap = default_cap(data, eps, opts)?;
    let op = if opts.nonlinearity && eps > 0.0 { Some(build_operator(data, gamma, &grid)?) } else { None };
    let h = grid.dr;
    let g = gamma.value();
    let mut field = SpaceTimeField::new(grid);
    field.set_meta(FieldMeta { eps, gamma: g, kappa: data.kappa, family: data.family().cloned() });
    let mut nl = NonlinearityField::new(grid, opts.store_field);
    let nonlin = |u: &[f64], free: &[f64]| -> Vec<f64> {
        let m = u.len() - 1;
        match &op {
            None => vec![0.0; m + 1],
            Some(op) => {
                let mut ext = free.to_vec();
                ext[..=m].copy_from_slice(u);
                op.apply(&ext, m).iter().zip(u).map(|(p, u)| p * u).collect()
            }
        }
    };
    let mut slab_sup = Vec::new();
    let mut slab_x_norm = Vec::new();
    let mut reason = Termination::HorizonReached;
    let mut v_prev: Vec<f64> = Vec::new();
    let mut v_cur: Vec<f64> = Vec::new();
    for j in 0..=grid.n_t {
        let free = free_row(data, eps, &grid, j);
        let m = grid.row_end(j);
        let v_next: Vec<f64> = match j {
            0 => (0..=m).map(|i| grid.r(i) * free[i]).collect(),
            1 => {
                let n0 = nl.row(0).unwrap();
                (0..=m).map(|i| grid.r(i) * (free[i] + 0.5 * h * h * n0[i])).collect()
            }
            _ => {
                let n1 = nl.row(j - 1).unwrap();
                (0..=m)
                    .map(|i| {
                        if i == 0 {
                            0.0
                        } else {
                            v_cur[i + 1] + v_cur[i - 1] - v_prev[i] + h * h * grid.r(i) * n1[i]
                        }
                    })
                    .collect()
            }
        };
        let mut u: Vec<f64> = (0..=m).map(|i| if i == 0 { 0.0 } else { v_next[i] / grid.r(i) }).collect();
        u[0] = if j == 0 { free[0] } else { (4.0 * v_next[1] - 0.5 * v_next[2]) / (3.0 * h) };
        if u.iter().any(|v| !v.is_finite() || v.abs() > cap) {
            reason = Termination::NormThreshold;
            break;
        }
        let n = nonlin(&u, &free);
        let t = grid.t(j);
        slab_sup.push(sup_abs(&u));
        slab_x_norm.push(u.iter().enumerate().fold(0.0f64, |mx, (i, v)| mx.max(x_weight(g, grid.r(i), t) * v.abs())));
        nl.push(n)?;
        if opts.store_field {
            field.finalize(j, u)?;
        } else {
            let len = u.len();
            field.finalize_dropped(j, len)?;
        }
        v_prev = std::mem::take(&mut v_cur);
        v_cur = v_next;
    }
    let done = field.finalized();
    let lifespan = if reason == Termination::HorizonReached {
        LifespanEstimate { eps, t_low: grid.t_max(), t_high: grid.t_max(), reason }
    } else {
        LifespanEstimate { eps, t_low: grid.t(done - 1), t_high: grid.t(done), reason }
    };
    let corrections = vec![0.0; slab_sup.len()];
    Ok(SolveReport { field, nonlinearity: nl, lifespan, slab_sup, slab_x_norm, corrections })
}

/// Horizon policy `t_max(eps) = min(t_cap, 4 exp(c_fit / eps^2))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPolicy {
    pub dr: f64,
    pub t_cap: f64,
    pub c_fit: f64,
    /// Radius kept beyond the light cone at the horizon.
    pub margin: f64,
}

impl GridPolicy {
    pub fn horizon(&self, eps: f64) -> f64 {
        let t = if eps > 0.0 { 4.0 * (self.c_fit / (eps * eps)).exp() } else { f64::INFINITY };
        ((t.min(self.t_cap) / self.dr).ceil() * self.dr).max(self.dr)
    }

    pub fn grid(&self, eps: f64) -> Result<Grid> {
        Grid::covering(self.dr, self.horizon(eps), self.margin)
    }
}

/// One solve per `eps`, in parallel, results in input order.
pub fn lifespan_estimate(
    family: &DataFamily,
    kappa: Option<f64>,
    gamma: Gamma,
    eps_list: &[f64],
    policy: &GridPolicy,
    opts: &SolverOptions,
) -> Result<Vec<LifespanEstimate>> {
    if eps_list.is_empty() {
        return config("eps list is empty");
    }
    if eps_list.windows(2).any(|w| !(w[1] < w[0])) || eps_list.iter().any(|&e| !(e >= 0.0)) {
        return config("eps list must be non-negative and strictly decreasing");
    }
    let mut opts = opts.clone();
    opts.store_field = false;
    eps_list
        .par_iter()
        .map(|&eps| {
            let grid = policy.grid(eps)?;
            let mut data = InitialDataSet::from_family(family, grid.dr, grid.r_max())?;
            if let Some(k) = kappa {
                data = data.with_kappa(k)?;
            }
            Ok(solve(&data, eps, gamma, grid, &opts)?.lifespan)
        })
        .collect()
}
