use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{LyapunovEstimate, Method};
use crate::disorder::DisorderSpec;
use crate::error::{Error, Result};
use crate::stats;
use crate::streams::StreamId;
use crate::tree::{
    forward_recursion_with, level_recursion, Boundary, PotentialSample, SpectralPoint, TreeTopology,
};

/// Smallest R with `K^R ≥ 10⁴` (R = 14 for K = 2).
pub fn default_depth(k: usize) -> usize {
    let mut r = 0;
    let mut paths: f64 = 1.0;
    while paths < 1e4 {
        paths *= k as f64;
        r += 1;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiniteDepthConfig {
    pub depth: usize,
    pub samples: usize,
    pub boundary: Boundary,
}

impl FiniteDepthConfig {
    pub fn new(depth: usize, samples: usize) -> Self {
        Self {
            depth,
            samples,
            boundary: Boundary::FreeContinuation,
        }
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }
}

/// `log|Γ_root|` for each sample (sample `i` on stream `i`), plus the total
/// resonance count. At λ = 0 the tree is level-compressed.
pub fn log_root_samples(
    k: usize,
    point: &SpectralPoint,
    cfg: &FiniteDepthConfig,
    spec: &DisorderSpec,
    seed: u64,
) -> Result<(Vec<f64>, usize)> {
    if point.lambda == 0.0 {
        let (levels, res) = level_recursion(k, &vec![0.0; cfg.depth + 1], point, cfg.boundary);
        return Ok((vec![levels[0].norm().ln(); cfg.samples], res * cfg.samples));
    }
    let topology = TreeTopology::new(k, cfg.depth)?;
    let per_sample: Vec<(f64, usize)> = (0..cfg.samples)
        .into_par_iter()
        .map(|i| {
            let v = PotentialSample::draw(&topology, spec, StreamId::new(seed, i as u64));
            let s = forward_recursion_with(&topology, &v, point, cfg.boundary)?;
            Ok((s.root().norm().ln(), s.resonances))
        })
        .collect::<Result<_>>()?;
    let resonances = per_sample.iter().map(|p| p.1).sum();
    Ok((per_sample.into_iter().map(|p| p.0).collect(), resonances))
}

/// Average of `−log|Γ_root|` over independent depth-R trees.
pub fn estimate_finite_depth(
    k: usize,
    point: &SpectralPoint,
    cfg: &FiniteDepthConfig,
    spec: &DisorderSpec,
    seed: u64,
) -> Result<LyapunovEstimate> {
    if cfg.depth < 1 || cfg.samples < 2 {
        return Err(Error::Config(format!(
            "finite-depth estimator needs R >= 1 and n >= 2 (got R={}, n={})",
            cfg.depth, cfg.samples
        )));
    }
    spec.validate()?;
    let (logs, resonances) = log_root_samples(k, point, cfg, spec, seed)?;
    let neg: Vec<f64> = logs.iter().map(|l| -l).collect();
    let (mean, stderr) = stats::mean_stderr(&neg);
    Ok(LyapunovEstimate {
        mean,
        stderr,
        n_samples: cfg.samples,
        method: Method::FiniteDepth,
        eta: point.eta,
        depth_or_pool: cfg.depth,
        resonances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::free_lyapunov;

    #[test]
    fn default_depth_for_binary_tree() {
        assert_eq!(default_depth(2), 14);
        assert_eq!(default_depth(10), 4);
    }

    #[test]
    fn deterministic_limit_reproduces_closed_form() {
        let p = SpectralPoint::new(0.0, 1e-6, 0.0).unwrap();
        let cfg = FiniteDepthConfig::new(30, 4);
        let est = estimate_finite_depth(2, &p, &cfg, &DisorderSpec::default(), 1).unwrap();
        assert!((est.mean - 0.5 * 2f64.ln()).abs() < 1e-3);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn open_boundary_below_band_converges() {
        let p = SpectralPoint::new(-3.5, 0.0, 0.0).unwrap();
        let cfg = FiniteDepthConfig::new(30, 2).with_boundary(Boundary::Open);
        let est = estimate_finite_depth(2, &p, &cfg, &DisorderSpec::default(), 1).unwrap();
        assert!((est.mean - free_lyapunov(2, -3.5)).abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_config() {
        let p = SpectralPoint::new(0.0, 1e-6, 0.1).unwrap();
        let spec = DisorderSpec::default();
        assert!(estimate_finite_depth(2, &p, &FiniteDepthConfig::new(0, 10), &spec, 1).is_err());
        assert!(estimate_finite_depth(2, &p, &FiniteDepthConfig::new(4, 1), &spec, 1).is_err());
    }

    #[test]
    fn edge_estimate_respects_monotone_bound() {
        // L_λ(E_λ) ≤ L₀(E₀ − 2λ) = −log 0.542422 for λ = 0.05, K = 2.
        let lambda = 0.05;
        let e = -(2.0 * 2f64.sqrt() + lambda);
        let p = SpectralPoint::new(e, 0.0, lambda).unwrap();
        let cfg = FiniteDepthConfig::new(10, 64);
        let est = estimate_finite_depth(2, &p, &cfg, &DisorderSpec::default(), 5).unwrap();
        assert!(est.mean + 3.0 * est.stderr <= 0.6117, "{est:?}");
    }
}
