//! TOML experiment configs. Every command parses into its own record, checks
//! the physical domains, and hashes the canonical re-serialization.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;
use wavelab::{DataFamily, Gamma, GridPolicy};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

type Check = Result<(), ConfigError>;

fn bad(msg: impl Into<String>) -> Check {
    Err(ConfigError(msg.into()))
}

pub trait Validate {
    fn validate(&self) -> Check;
}

pub fn parse<T: DeserializeOwned + Validate>(text: &str) -> Result<T, ConfigError> {
    let cfg: T = toml::from_str(text).map_err(|e| ConfigError(format!("parse error: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load<T: DeserializeOwned + Validate>(path: &Path) -> Result<T, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

pub fn canonical<T: Serialize>(cfg: &T) -> String {
    toml::to_string(cfg).expect("configs serialize to TOML")
}

/// SHA-256 of the canonical text, so comments and layout do not change it.
pub fn hash<T: Serialize>(cfg: &T) -> String {
    hex::encode(Sha256::digest(canonical(cfg).as_bytes()))
}

fn gamma(v: f64) -> Check {
    Gamma::new(v).map(|_| ()).map_err(|e| ConfigError(e.to_string()))
}

fn eps(list: &[f64]) -> Check {
    match list.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
        Some(e) => bad(format!("eps must be finite and non-negative, got {e}")),
        None => Ok(()),
    }
}

fn positive(name: &str, v: f64) -> Check {
    if v > 0.0 && v.is_finite() { Ok(()) } else { bad(format!("{name} must be positive, got {v}")) }
}

fn family(f: &DataFamily) -> Check {
    f.validate().map_err(|e| ConfigError(e.to_string()))
}

fn kappa(k: Option<f64>) -> Check {
    match k {
        Some(k) => positive("kappa", k),
        None => Ok(()),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dr: f64,
    pub t_max: f64,
    /// Radius kept beyond the light cone at `t_max`.
    pub radius: f64,
}

impl Validate for GridSpec {
    fn validate(&self) -> Check {
        positive("dr", self.dr)?;
        positive("t_max", self.t_max)?;
        positive("radius", self.radius)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value_cap: Option<f64>,
    pub full_picard: bool,
    /// Leapfrog on `r u` instead of the integral equation.
    pub fd_fastpath: bool,
}

impl SolverSection {
    pub fn options(&self) -> wavelab::SolverOptions {
        wavelab::SolverOptions { value_cap: self.value_cap, full_picard: self.full_picard, ..Default::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub checkpoint: bool,
    pub field_csv: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { checkpoint: true, field_csv: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub gamma: f64,
    pub eps: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    pub data: DataFamily,
    pub grid: GridSpec,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl Validate for SolveConfig {
    fn validate(&self) -> Check {
        gamma(self.gamma)?;
        eps(&[self.eps])?;
        kappa(self.kappa)?;
        family(&self.data)?;
        self.grid.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub gamma: f64,
    pub eps: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    pub data: DataFamily,
    pub policy: GridPolicy,
    #[serde(default)]
    pub solver: SolverSection,
}

impl Validate for SweepConfig {
    fn validate(&self) -> Check {
        gamma(self.gamma)?;
        if self.eps.is_empty() {
            return bad("eps list is empty");
        }
        eps(&self.eps)?;
        if self.eps.windows(2).any(|w| !(w[1] < w[0])) {
            return bad("eps list must be strictly decreasing");
        }
        kappa(self.kappa)?;
        family(&self.data)?;
        positive("policy.dr", self.policy.dr)?;
        positive("policy.t_cap", self.policy.t_cap)?;
        positive("policy.margin", self.policy.margin)?;
        if !(self.policy.c_fit >= 0.0) {
            return bad("policy.c_fit must be non-negative");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NestedSpec {
    pub t0: f64,
    pub doublings: usize,
    pub per_regime: usize,
}

impl Validate for NestedSpec {
    fn validate(&self) -> Check {
        positive("t0", self.t0)?;
        if self.per_regime == 0 {
            return bad("per_regime must be at least 1");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub gammas: Vec<f64>,
    #[serde(flatten)]
    pub samples: NestedSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DuhamelSpec {
    pub gammas: Vec<f64>,
    pub horizons: Vec<f64>,
    pub dr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecursionSpec {
    pub j_max: u32,
    pub eps: f64,
    pub b: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeSpec {
    pub eps: f64,
    pub b: f64,
    pub dr: f64,
    pub t_max: f64,
    /// `0` selects the first lower bound, `j >= 1` the ladder envelopes.
    pub j_list: Vec<u32>,
}

/// Verifier battery; an absent section is not run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default)]
    pub seed: u64,
    /// Also run the designed controls, which must fail.
    #[serde(default)]
    pub falsification: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lemmas: Option<NestedSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duhamel: Option<DuhamelSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recursion: Option<RecursionSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub envelopes: Option<EnvelopeSpec>,
}

impl VerifyConfig {
    pub fn is_empty(&self) -> bool {
        self.lemmas.is_none() && self.potential.is_none() && self.duhamel.is_none() && self.recursion.is_none() && self.envelopes.is_none()
    }
}

impl Validate for VerifyConfig {
    fn validate(&self) -> Check {
        if let Some(l) = &self.lemmas {
            l.validate()?;
        }
        if let Some(p) = &self.potential {
            p.samples.validate()?;
            for &g in &p.gammas {
                gamma(g)?;
                if g < 2.0 {
                    return bad(format!("potential bounds need gamma >= 2, got {g}"));
                }
            }
        }
        if let Some(d) = &self.duhamel {
            positive("duhamel.dr", d.dr)?;
            d.gammas.iter().try_for_each(|&g| gamma(g))?;
            d.horizons.iter().try_for_each(|&t| positive("duhamel horizon", t))?;
        }
        if let Some(r) = &self.recursion {
            positive("recursion.eps", r.eps)?;
            positive("recursion.b", r.b)?;
            if r.j_max == 0 {
                return bad("recursion.j_max must be at least 1");
            }
        }
        if let Some(e) = &self.envelopes {
            positive("envelopes.eps", e.eps)?;
            positive("envelopes.b", e.b)?;
            positive("envelopes.dr", e.dr)?;
            positive("envelopes.t_max", e.t_max)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PersistenceConfig {
    pub gamma: f64,
    /// Defaults to the critical decay `(5 - gamma)/2`, the only admitted value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    pub b: f64,
    pub eps: Vec<f64>,
    pub grid: GridSpec,
    /// Largest relative growth of the norm over the second half that counts as a plateau.
    pub plateau_tol: f64,
}

impl PersistenceConfig {
    pub fn kappa(&self) -> f64 {
        self.kappa.unwrap_or((5.0 - self.gamma) / 2.0)
    }
}

impl Validate for PersistenceConfig {
    fn validate(&self) -> Check {
        gamma(self.gamma)?;
        if !(self.gamma > 2.0) {
            return bad(format!("global persistence needs 2 < gamma < 3, got {}", self.gamma));
        }
        let k = (5.0 - self.gamma) / 2.0;
        if let Some(kappa) = self.kappa {
            if (kappa - k).abs() > 1e-12 {
                return bad(format!("kappa must equal (5 - gamma)/2 = {k}, got {kappa}"));
            }
        }
        positive("b", self.b)?;
        if self.eps.is_empty() {
            return bad("eps list is empty");
        }
        eps(&self.eps)?;
        positive("plateau_tol", self.plateau_tol)?;
        self.grid.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderConfig {
    pub eps: f64,
    pub b: f64,
    pub j_max: u32,
}

impl Validate for LadderConfig {
    fn validate(&self) -> Check {
        positive("eps", self.eps)?;
        positive("b", self.b)?;
        if self.j_max == 0 {
            return bad("j_max must be at least 1");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    Gaussian { amplitude: f64, width: f64 },
    /// `amplitude (1 + lambda)^-exponent` with the matching tail.
    PowerLaw { amplitude: f64, exponent: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub gamma: f64,
    pub r: Vec<f64>,
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    pub dr: f64,
    pub r_max: f64,
    pub profile: ProfileSpec,
}

impl Validate for OracleConfig {
    fn validate(&self) -> Check {
        gamma(self.gamma)?;
        positive("dr", self.dr)?;
        positive("r_max", self.r_max)?;
        if let Some(r) = self.r.iter().find(|r| !(**r >= 0.0 && r.is_finite())) {
            return bad(format!("radii must be non-negative, got {r}"));
        }
        match self.profile {
            ProfileSpec::Gaussian { width, .. } => positive("profile.width", width),
            ProfileSpec::PowerLaw { exponent, .. } => positive("profile.exponent", exponent),
        }
    }
}
