//! Least-squares fits of `log T` against powers of `1/eps`.

use crate::error::{config, Result};
use crate::evolution::LifespanEstimate;
use serde::{Deserialize, Serialize};

/// `log T = slope * eps^-p + intercept` over the runs that blew up.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepFit {
    pub power: f64,
    /// `(eps^-p, log T)`.
    pub pairs: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub const MIN_FIT_POINTS: usize = 4;

impl SweepFit {
    pub fn fit(estimates: &[LifespanEstimate], power: f64) -> Result<SweepFit> {
        let pairs: Vec<(f64, f64)> = estimates
            .iter()
            .filter(|e| !e.reached_horizon() && e.eps > 0.0)
            .map(|e| (e.eps.powf(-power), e.t().ln()))
            .collect();
        if pairs.len() < MIN_FIT_POINTS {
            return config(format!(
                "only {} of {} runs blew up before the horizon, need {MIN_FIT_POINTS}; increase horizon",
                pairs.len(),
                estimates.len()
            ));
        }
        let n = pairs.len() as f64;
        let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let syy: f64 = pairs.iter().map(|p| (p.1 - my).powi(2)).sum();
        if sxx == 0.0 {
            return config("fit needs at least two distinct eps values");
        }
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let sse: f64 = pairs.iter().map(|p| (p.1 - slope * p.0 - intercept).powi(2)).sum();
        let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
        Ok(SweepFit { power, pairs, slope, intercept, r_squared })
    }
}
