use serde::{Deserialize, Serialize};

use super::{LyapunovEstimate, Method};
use crate::error::{Error, Result};
use crate::stats::{self, LineFit};

/// Result of a linear `η → 0` extrapolation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    pub estimate: LyapunovEstimate,
    pub slope: f64,
    /// Set when large-η points had to be dropped.
    pub flagged: bool,
    pub points_used: usize,
}

fn unstable(etas: &[f64], means: &[f64], errs: &[f64], fit: &LineFit, weighted: bool) -> bool {
    if weighted && etas.len() > 2 && fit.chi2_per_dof > 4.0 {
        return true;
    }
    // Means must move monotonically with η, up to two combined standard errors.
    let steps: Vec<f64> = means.windows(2).map(|w| w[1] - w[0]).collect();
    let noise: Vec<f64> = errs.windows(2).map(|w| 2.0 * w[0].hypot(w[1])).collect();
    let up = steps.iter().zip(&noise).any(|(d, n)| *d > *n);
    let down = steps.iter().zip(&noise).any(|(d, n)| *d < -*n);
    up && down
}

/// Weighted linear fit of the mean against η; the intercept estimates the
/// `η ↓ 0` limit. Input must hold at least three distinct, decreasing η.
pub fn extrapolate_eta(estimates: &[(f64, LyapunovEstimate)]) -> Result<Extrapolation> {
    if estimates.len() < 3 {
        return Err(Error::Config("eta extrapolation needs at least 3 points".into()));
    }
    if estimates.windows(2).any(|w| !(w[1].0 < w[0].0)) || estimates.iter().any(|e| !(e.0 >= 0.0)) {
        return Err(Error::Config("eta values must be nonnegative and strictly decreasing".into()));
    }
    let mut start = 0;
    let mut flagged = false;
    loop {
        let pts = &estimates[start..];
        let etas: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let means: Vec<f64> = pts.iter().map(|p| p.1.mean).collect();
        let errs: Vec<f64> = pts.iter().map(|p| p.1.stderr).collect();
        let weighted = errs.iter().all(|e| *e > 0.0);
        let fit = stats::fit_line(&etas, &means, weighted.then_some(errs.as_slice()))
            .ok_or_else(|| Error::Config("degenerate eta sequence".into()))?;
        if pts.len() > 2 && unstable(&etas, &means, &errs, &fit, weighted) {
            start += 1;
            flagged = true;
            continue;
        }
        let n_samples = pts.iter().map(|p| p.1.n_samples).sum();
        let resonances = pts.iter().map(|p| p.1.resonances).sum();
        return Ok(Extrapolation {
            estimate: LyapunovEstimate {
                mean: fit.intercept,
                stderr: fit.intercept_stderr,
                n_samples,
                method: Method::Extrapolated,
                eta: 0.0,
                depth_or_pool: pts[0].1.depth_or_pool,
                resonances,
            },
            slope: fit.slope,
            flagged,
            points_used: pts.len(),
        });
    }
}
