use crate::config::*;
use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::result::Result;
use wavelab::analysis::*;
use wavelab::blowup::*;
use wavelab::io::{self, Provenance};
use wavelab::*;

#[derive(Debug)]
pub enum Failure {
    /// Bad configuration or arguments; exit 2.
    Config(String),
    /// The run itself failed; exit 1.
    Run(String),
    /// A verified property does not hold; exit 3.
    Property(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Run(_) => 1,
            Failure::Config(_) => 2,
            Failure::Property(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) | Failure::Run(m) | Failure::Property(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Domain(_) => Failure::Config(e.to_string()),
            _ => Failure::Run(e.to_string()),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

pub type Outcome = Result<(), Failure>;

/// Output directory plus the hash stamped on every artifact.
pub struct Sink {
    pub dir: PathBuf,
    pub hash: String,
}

impl Sink {
    pub fn new(dir: &Path, hash: String) -> Result<Self, Failure> {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Run(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Sink { dir: dir.to_path_buf(), hash })
    }

    fn prov(&self, grid: Option<Grid>) -> Provenance {
        Provenance { config_hash: self.hash.clone(), grid }
    }

    fn file(&self, name: &str) -> Result<BufWriter<File>, Failure> {
        let path = self.dir.join(name);
        let f = File::create(&path).map_err(|e| Failure::Run(format!("cannot create {}: {e}", path.display())))?;
        Ok(BufWriter::new(f))
    }

    fn json<T: Serialize>(&self, name: &str, grid: Option<Grid>, report: &T) -> Outcome {
        let mut w = self.file(name)?;
        io::write_json(&mut w, &self.prov(grid), report)?;
        w.flush()?;
        Ok(())
    }
}

fn gamma(v: f64) -> Result<Gamma, Failure> {
    Ok(Gamma::new(v)?)
}

fn norm_history(rep: &SolveReport) -> Vec<(f64, f64)> {
    let grid = rep.field.grid();
    (0..rep.slab_x_norm.len()).map(|j| (grid.t(j), rep.x_norm_until(j))).collect()
}

#[derive(Serialize)]
struct SolveSummary {
    lifespan: LifespanEstimate,
    slabs: usize,
    final_sup: f64,
    x_norm: f64,
    max_correction: f64,
}

pub fn solve_cmd(cfg: &SolveConfig, sink: &Sink) -> Outcome {
    let grid = Grid::covering(cfg.grid.dr, cfg.grid.t_max, cfg.grid.radius)?;
    let mut data = InitialDataSet::from_family(&cfg.data, grid.dr, grid.r_max())?;
    if let Some(k) = cfg.kappa {
        data = data.with_kappa(k)?;
    }
    let opts = cfg.solver.options();
    let g = gamma(cfg.gamma)?;
    let rep = if cfg.solver.fd_fastpath {
        solve_fd_fastpath(&data, cfg.eps, g, grid, &opts)?
    } else {
        solve(&data, cfg.eps, g, grid, &opts)?
    };
    let prov = sink.prov(Some(grid));
    if cfg.output.checkpoint {
        let mut w = sink.file("field.bin")?;
        io::write_field_binary(&mut w, &rep.field)?;
        w.flush()?;
    }
    if cfg.output.field_csv {
        io::write_field_csv(sink.file("field.csv")?, &prov, &rep.field)?;
    }
    io::write_lifespan_csv(sink.file("lifespan.csv")?, &prov, &[rep.lifespan])?;
    let history = norm_history(&rep);
    io::write_norm_history_csv(sink.file("x_norm_history.csv")?, &prov, &history)?;
    let summary = SolveSummary {
        lifespan: rep.lifespan,
        slabs: rep.slab_sup.len(),
        final_sup: rep.slab_sup.last().copied().unwrap_or(0.0),
        x_norm: history.last().map_or(0.0, |h| h.1),
        max_correction: rep.corrections.iter().fold(0.0, |m, &c| m.max(c)),
    };
    sink.json("summary.json", Some(grid), &summary)?;
    println!(
        "lifespan in [{}, {}] ({}), X norm {:.6e}",
        rep.lifespan.t_low, rep.lifespan.t_high, rep.lifespan.reason, summary.x_norm
    );
    Ok(())
}

#[derive(Serialize)]
struct SweepSummary {
    estimates: Vec<LifespanEstimate>,
    /// Fits of `log T` against `eps^-2` and `eps^-1`.
    fits: Vec<SweepFit>,
    preferred_power: f64,
}

pub fn sweep_cmd(cfg: &SweepConfig, sink: &Sink) -> Outcome {
    let est = lifespan_estimate(&cfg.data, cfg.kappa, gamma(cfg.gamma)?, &cfg.eps, &cfg.policy, &cfg.solver.options())?;
    io::write_lifespan_csv(sink.file("lifespan.csv")?, &sink.prov(None), &est)?;
    for e in &est {
        println!("eps {:<10} T in [{}, {}] ({})", e.eps, e.t_low, e.t_high, e.reason);
    }
    let fits = [2.0, 1.0]
        .into_iter()
        .map(|p| SweepFit::fit(&est, p))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::Run(e.to_string()))?;
    let preferred = if fits[0].r_squared >= fits[1].r_squared { 2.0 } else { 1.0 };
    for f in &fits {
        println!("log T = {:.6} eps^-{} + {:.6}, R^2 {:.4}", f.slope, f.power, f.intercept, f.r_squared);
    }
    let slope = fits[0].slope;
    sink.json("fit.json", None, &SweepSummary { estimates: est, fits, preferred_power: preferred })?;
    if !(slope > 0.0) {
        return Err(Failure::Property(format!("lifespan does not grow as eps decreases (slope {slope})")));
    }
    Ok(())
}

#[derive(Serialize)]
#[serde(untagged)]
enum Detail {
    Bound(BoundReport),
    Envelope(EnvelopeReport),
    Sweep { violations: usize, worst_ratio: f64 },
    Recursion { j_max: u32, holds: bool },
}

#[derive(Serialize)]
struct Item {
    section: &'static str,
    name: String,
    /// `false` for falsification controls, which must fail.
    expect_pass: bool,
    passed: bool,
    ok: bool,
    detail: Detail,
}

#[derive(Default)]
struct Battery(Vec<Item>);

impl Battery {
    fn push(&mut self, section: &'static str, name: String, expect_pass: bool, passed: bool, detail: Detail) {
        let ok = passed == expect_pass;
        println!("{section:<10} {name}: {} ({})", if passed { "pass" } else { "fail" }, if ok { "ok" } else { "UNEXPECTED" });
        self.0.push(Item { section, name, expect_pass, passed, ok, detail });
    }

    fn bound(&mut self, section: &'static str, expect_pass: bool, rep: BoundReport) {
        let name = rep.kind.clone();
        self.push(section, name, expect_pass, rep.pass, Detail::Bound(rep));
    }
}

pub fn verify_cmd(cfg: &VerifyConfig, sink: &Sink) -> Outcome {
    if cfg.is_empty() {
        return Ok(());
    }
    let mut b = Battery::default();
    let controls = cfg.falsification;
    if let Some(l) = &cfg.lemmas {
        let sets = SampleSet::nested(l.t0, l.doublings, l.per_regime, cfg.seed);
        let none = Distortion::default();
        for kind in [
            LemmaKind::Arc { delta: 0.5 },
            LemmaKind::Arc { delta: 1.0 },
            LemmaKind::WeightedArc { kappa: 0.5 },
            LemmaKind::WeightedArc { kappa: 1.5 },
            LemmaKind::LogWeighted { kappa: 1.0, l: 0 },
            LemmaKind::LogWeighted { kappa: 1.5, l: 1 },
        ] {
            b.bound("lemmas", true, lemma_integral_oracle(kind, none, &sets)?);
        }
        let t_max = l.t0 * 2f64.powi(l.doublings as i32);
        let (violations, worst) = lower_bound_sweep(l.per_regime * 5, t_max, cfg.seed);
        b.push("lemmas", "explicit lower bound".into(), true, violations == 0, Detail::Sweep { violations, worst_ratio: worst });
        if controls {
            let shift = Distortion { exponent_shift: 0.5, drop_log: false };
            let drop = Distortion { exponent_shift: 0.0, drop_log: true };
            b.bound("lemmas", false, lemma_integral_oracle(LemmaKind::Arc { delta: 0.5 }, shift, &sets)?);
            b.bound("lemmas", false, lemma_integral_oracle(LemmaKind::WeightedArc { kappa: 1.5 }, shift, &sets)?);
            b.bound("lemmas", false, lemma_integral_oracle(LemmaKind::LogWeighted { kappa: 1.5, l: 1 }, drop, &sets)?);
        }
    }
    if let Some(p) = &cfg.potential {
        let s = &p.samples;
        let sets = SampleSet::nested(s.t0, s.doublings, s.per_regime, cfg.seed);
        for &gm in &p.gammas {
            let g = gamma(gm)?;
            let u = SyntheticProfile::exact_weight(g, 1.0);
            b.bound("potential", true, verify_potential_bound(FieldRef::Synthetic(u), g, WeightSpec::potential(g)?, &sets)?);
        }
        if controls {
            let g = gamma(2.0)?;
            let u = SyntheticProfile::exact_weight(g, 1.0);
            let no_log = WeightSpec::new(1.75, 0.25, 0)?;
            b.bound("potential", false, verify_potential_bound(FieldRef::Synthetic(u), g, no_log, &sets)?);
        }
    }
    if let Some(d) = &cfg.duhamel {
        for &gm in &d.gammas {
            let u = SyntheticProfile::exact_weight(gamma(gm)?, 1.0);
            b.bound("duhamel", true, verify_duhamel_bound([u; 3], gamma(gm)?, &d.horizons, d.dr, true)?);
        }
        if controls {
            let u = SyntheticProfile::exact_weight(gamma(2.0)?, 1.0);
            b.bound("duhamel", false, verify_duhamel_bound([u; 3], gamma(2.0)?, &d.horizons, d.dr, false)?);
        }
    }
    if let Some(r) = &cfg.recursion {
        let seq = sequences(r.j_max, r.eps, r.b)?;
        let holds = verify_recursion(&seq);
        b.push("recursion", format!("ladder to j={}", r.j_max), true, holds, Detail::Recursion { j_max: r.j_max, holds });
        if controls && seq.len() >= 2 {
            let mut bad = seq.clone();
            bad[1].log_c += 1.01f64.ln();
            let holds = verify_recursion(&bad);
            b.push("recursion", "C_2 perturbed by 1%".into(), false, holds, Detail::Recursion { j_max: r.j_max, holds });
        }
    }
    if let Some(e) = &cfg.envelopes {
        let kappa = 1.5;
        let grid = Grid::covering(e.dr, e.t_max, 4.0)?;
        let data = InitialDataSet::from_family(&DataFamily::Blowup { b: e.b, kappa }, e.dr, grid.r_max())?;
        let rep = solve(&data, e.eps, gamma(2.0)?, grid, &SolverOptions::default())?;
        let pts: Vec<(usize, usize)> =
            rep.field.nodes().filter(|&(i, j, _)| grid.t(j) - grid.r(i) >= 1.0).map(|(i, j, _)| (i, j)).collect();
        let check = |field: &SpaceTimeField| envelope_vs_numeric(field, e.eps, e.b, &e.j_list, Some(&pts));
        let env = check(&rep.field)?;
        let name = format!("envelopes j={:?} to t={}", e.j_list, rep.lifespan.t_low);
        b.push("envelopes", name, true, env.violations == 0 && env.checked > 0, Detail::Envelope(env));
        if controls {
            let env = check(&rep.field.map(|u| 1e-3 * u))?;
            b.push("envelopes", "field scaled by 1e-3".into(), false, env.violations == 0, Detail::Envelope(env));
        }
    }
    sink.json("verify.json", None, &b.0)?;
    let bad: Vec<&str> = b.0.iter().filter(|i| !i.ok).map(|i| i.name.as_str()).collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Failure::Property(format!("{} item(s) did not behave as expected: {}", bad.len(), bad.join(", "))))
    }
}

#[derive(Serialize)]
struct PersistenceRun {
    eps: f64,
    lifespan: LifespanEstimate,
    x_norm: f64,
    late_growth: f64,
    plateau: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<String>,
}

pub fn persistence_cmd(cfg: &PersistenceConfig, sink: &Sink) -> Outcome {
    let g = gamma(cfg.gamma)?;
    let kappa = cfg.kappa();
    let grid = Grid::covering(cfg.grid.dr, cfg.grid.t_max, cfg.grid.radius)?;
    let data = InitialDataSet::from_family(&DataFamily::Blowup { b: cfg.b, kappa }, grid.dr, grid.r_max())?;
    let opts = SolverOptions { store_field: false, ..Default::default() };
    let mut runs = Vec::new();
    for (k, &eps) in cfg.eps.iter().enumerate() {
        let rep = solve(&data, eps, g, grid, &opts)?;
        let history = norm_history(&rep);
        io::write_norm_history_csv(sink.file(&format!("x_norm_history_{k}.csv"))?, &sink.prov(Some(grid)), &history)?;
        let norms: Vec<f64> = history.iter().map(|h| h.1).collect();
        let growth = late_growth(&norms);
        let reached = rep.lifespan.reached_horizon();
        let note = (!reached).then(|| format!("blew up at t in [{}, {}]: eps is outside the small-data regime", rep.lifespan.t_low, rep.lifespan.t_high));
        println!("eps {eps:<10} {} X norm {:.6e} late growth {:.3}%", rep.lifespan.reason, norms.last().copied().unwrap_or(0.0), 100.0 * growth);
        runs.push(PersistenceRun {
            eps,
            lifespan: rep.lifespan,
            x_norm: norms.last().copied().unwrap_or(0.0),
            late_growth: growth,
            plateau: reached && growth <= cfg.plateau_tol,
            note,
        });
    }
    sink.json("persistence.json", Some(grid), &runs)?;
    let open: Vec<String> =
        runs.iter().filter(|r| r.lifespan.reached_horizon() && !r.plateau).map(|r| r.eps.to_string()).collect();
    if open.is_empty() {
        Ok(())
    } else {
        Err(Failure::Property(format!("norm still growing at the horizon for eps = {}", open.join(", "))))
    }
}

#[derive(Serialize)]
struct LadderSummary {
    constants: BlowupConstants,
    c1: f64,
    recursion_holds: bool,
    /// `log` of the predicted upper bound on the lifespan.
    log_upper_lifespan: f64,
}

pub fn ladder_cmd(cfg: &LadderConfig, sink: &Sink) -> Outcome {
    let seq = sequences(cfg.j_max, cfg.eps, cfg.b)?;
    io::write_ladder_csv(sink.file("ladder.csv")?, &sink.prov(None), &seq)?;
    let constants = BlowupConstants::new(cfg.b)?;
    let summary = LadderSummary {
        constants,
        c1: constants.c1(cfg.eps),
        recursion_holds: verify_recursion(&seq),
        log_upper_lifespan: predicted_upper_lifespan(cfg.eps, cfg.b)?.ln(),
    };
    sink.json("constants.json", None, &summary)?;
    println!("C_1 = {:.6e}, log T_upper = {:.6}, recursion {}", summary.c1, summary.log_upper_lifespan, summary.recursion_holds);
    if summary.recursion_holds {
        Ok(())
    } else {
        Err(Failure::Property("ladder recursion does not hold".into()))
    }
}

pub fn oracle_cmd(cfg: &OracleConfig, sink: &Sink) -> Outcome {
    let g = gamma(cfg.gamma)?;
    let n = (cfg.r_max / cfg.dr).ceil() as usize;
    let u = match cfg.profile {
        ProfileSpec::Gaussian { amplitude, width } => {
            RadialProfile::sample(cfg.dr, n, |l| amplitude * (-(l / width).powi(2)).exp(), Tail::Zero)?
        }
        ProfileSpec::PowerLaw { amplitude, exponent } => {
            let tail = Tail::PowerLaw { amplitude, exponent, offset: 1.0 };
            RadialProfile::sample(cfg.dr, n, |l| amplitude * (1.0 + l).powf(-exponent), tail)?
        }
    };
    let mut w = sink.file("oracle.csv")?;
    writeln!(w, "# config_hash={}", sink.hash)?;
    writeln!(w, "r,quadrature,mc_mean,mc_stderr,z")?;
    let mut worst = 0.0f64;
    for (k, &r) in cfg.r.iter().enumerate() {
        let exact = hartree_potential(&u, g, r)?;
        let mc = hartree_potential_mc(&u, g, r, cfg.samples, cfg.seed.wrapping_add(k as u64))?;
        let z = if mc.stderr > 0.0 { (mc.mean - exact) / mc.stderr } else { 0.0 };
        worst = worst.max(z.abs());
        writeln!(w, "{r},{exact},{},{},{z}", mc.mean, mc.stderr)?;
        println!("r {r:<8} quadrature {exact:.8e} mc {:.8e} +- {:.2e} z {z:+.2}", mc.mean, mc.stderr);
    }
    w.flush()?;
    if worst > 3.0 {
        return Err(Failure::Property(format!("Monte Carlo deviates by {worst:.2} standard errors")));
    }
    Ok(())
}
