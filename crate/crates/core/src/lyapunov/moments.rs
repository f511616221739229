use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::DisorderSpec;
use crate::error::{Error, Result};
use crate::stats;
use crate::streams::StreamId;
use crate::tree::{
    forward_recursion_with, level_recursion, Boundary, PotentialSample, SpectralPoint, TreeTopology,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionalMomentFit {
    pub s: f64,
    pub depths: Vec<usize>,
    /// `log E|G(0, x_d)|^s` per requested depth.
    pub log_moments: Vec<f64>,
    /// Fitted slope of the log-moment per step.
    pub slope: f64,
    /// Delete-a-group jackknife error of the slope.
    pub slope_stderr: f64,
    pub intercept: f64,
    /// Mean `−log|Γ_{x_j}|` over the fitted path segment: the path estimate of L.
    pub path_lyapunov: f64,
    pub path_lyapunov_stderr: f64,
}

const JACKKNIFE_GROUPS: usize = 20;

/// `log|G(0, x_d)|` at the requested depths and the per-step logs
/// `log|Γ_{x_j}|`, j = 1..=D, along the leftmost path of one sample.
fn path_logs(
    k: usize,
    point: &SpectralPoint,
    depths: &[usize],
    boundary: Boundary,
    potential: Option<(&TreeTopology, &PotentialSample)>,
    max_depth: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let path: Vec<f64> = match potential {
        None => {
            let (levels, _) = level_recursion(k, &vec![0.0; max_depth + 1], point, boundary);
            levels.iter().map(|g| g.norm().ln()).collect()
        }
        Some((t, v)) => {
            let s = forward_recursion_with(t, v, point, boundary)?;
            (0..=max_depth).map(|d| s.gamma[t.leftmost(d)].norm().ln()).collect()
        }
    };
    let mut cumulative = Vec::with_capacity(path.len());
    let mut acc = 0.0;
    for l in &path {
        acc += l;
        cumulative.push(acc);
    }
    Ok((depths.iter().map(|d| cumulative[*d]).collect(), path[1..].to_vec()))
}

/// `log mean exp(s·ℓ_i)` without overflow.
fn log_mean_exp(s: f64, logs: &[f64]) -> f64 {
    let m = logs.iter().fold(f64::NEG_INFINITY, |m, l| m.max(s * l));
    let sum = stats::compensated_sum(logs.iter().map(|l| (s * l - m).exp()));
    m + (sum / logs.len() as f64).ln()
}

fn slope_of(depths: &[f64], s: f64, per_sample: &[Vec<f64>]) -> (f64, f64, Vec<f64>) {
    let log_m: Vec<f64> = (0..depths.len())
        .map(|j| {
            let col: Vec<f64> = per_sample.iter().map(|r| r[j]).collect();
            log_mean_exp(s, &col)
        })
        .collect();
    let fit = stats::fit_line(depths, &log_m, None).expect("at least two depths");
    (fit.slope, fit.intercept, log_m)
}

/// Decay of `E|G(0, x)|^s` along the leftmost path of depth-D trees,
/// `D = max(depths)`, fitted as a line in `log E|G|^s` against depth.
#[allow(clippy::too_many_arguments)]
pub fn fractional_moment(
    k: usize,
    point: &SpectralPoint,
    s: f64,
    depths: &[usize],
    samples: usize,
    boundary: Boundary,
    spec: &DisorderSpec,
    seed: u64,
) -> Result<FractionalMomentFit> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Config(format!("moment order s must lie in (0, 1), got {s}")));
    }
    if depths.len() < 2 || depths.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("need at least two strictly increasing depths".into()));
    }
    if samples < 2 {
        return Err(Error::Config("need at least two samples".into()));
    }
    spec.validate()?;
    let max_depth = *depths.last().expect("nonempty");
    let rows: Vec<(Vec<f64>, Vec<f64>)> = if point.lambda == 0.0 {
        let row = path_logs(k, point, depths, boundary, None, max_depth)?;
        vec![row; samples]
    } else {
        let t = TreeTopology::new(k, max_depth)?;
        (0..samples)
            .into_par_iter()
            .map(|i| {
                let v = PotentialSample::draw(&t, spec, StreamId::new(seed, i as u64));
                path_logs(k, point, depths, boundary, Some((&t, &v)), max_depth)
            })
            .collect::<Result<_>>()?
    };
    let x: Vec<f64> = depths.iter().map(|d| *d as f64).collect();
    let per_sample: Vec<Vec<f64>> = rows.iter().map(|r| r.0.clone()).collect();
    let (slope, intercept, log_moments) = slope_of(&x, s, &per_sample);

    let groups = JACKKNIFE_GROUPS.min(samples);
    let slope_stderr = if point.lambda == 0.0 {
        0.0
    } else {
        let leave_out: Vec<f64> = (0..groups)
            .map(|g| {
                let kept: Vec<Vec<f64>> = per_sample
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| i % groups != g)
                    .map(|(_, r)| r.clone())
                    .collect();
                slope_of(&x, s, &kept).0
            })
            .collect();
        let mean = leave_out.iter().sum::<f64>() / groups as f64;
        let var = leave_out.iter().map(|t| (t - mean).powi(2)).sum::<f64>() * (groups - 1) as f64
            / groups as f64;
        var.sqrt()
    };

    // Steps j = d_min+1 ..= d_max, the segment the slope is fitted over.
    let first = depths[0];
    let step_means: Vec<f64> = rows
        .iter()
        .map(|r| {
            let seg = &r.1[first..max_depth];
            -seg.iter().sum::<f64>() / seg.len() as f64
        })
        .collect();
    let (path_lyapunov, path_lyapunov_stderr) = stats::mean_stderr(&step_means);
    Ok(FractionalMomentFit {
        s,
        depths: depths.to_vec(),
        log_moments,
        slope,
        slope_stderr,
        intercept,
        path_lyapunov,
        path_lyapunov_stderr: if point.lambda == 0.0 { 0.0 } else { path_lyapunov_stderr },
    })
}
