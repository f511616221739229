use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{LyapunovEstimate, Method};
use crate::disorder::DisorderSpec;
use crate::error::{Error, Result};
use crate::stats;
use crate::streams::StreamId;
use crate::tree::{free_forward_green, SpectralPoint};

pub const MIN_POOL: usize = 1000;
const COLLAPSE_SPREAD: f64 = 1e-14;
/// Measured sweeps are grouped into this many blocks for the error bar.
const ERROR_BLOCKS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationConfig {
    pub pool_size: usize,
    /// Sweeps discarded before measuring (1 sweep = `pool_size` updates).
    pub burn_in: usize,
    /// Measured sweeps; each sweep contributes one batch mean.
    pub sweeps: usize,
}

impl Default for PopulationConfig {
    fn default() -> Self {
        Self {
            pool_size: 4096,
            burn_in: 100,
            sweeps: 200,
        }
    }
}

/// Empirical sample of the stationary law of the forward Green function.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationPool {
    pub gammas: Vec<Complex64>,
    pub point: SpectralPoint,
    pub sweep_count: usize,
}

impl PopulationPool {
    /// K uniformly chosen members.
    pub fn pick<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Vec<Complex64> {
        (0..k)
            .map(|_| self.gammas[rng.random_range(0..self.gammas.len())])
            .collect()
    }
}

/// Population dynamics for `Γ = 1/(λV − z − Σ_{j=1..K} Γ_j)`.
///
/// The pool starts at the free fixed point `Γ₀(z)`. Each update draws K
/// members and one potential value, forms `Γ'` and overwrites a uniformly
/// chosen member. After `burn_in` sweeps, `−log|Γ'|` is recorded for every
/// update. Successive sweeps are correlated, so the error bar is the standard
/// error of block means over `sweeps / 20` consecutive sweeps.
pub fn population_dynamics(
    k: usize,
    point: &SpectralPoint,
    cfg: &PopulationConfig,
    spec: &DisorderSpec,
    seed: u64,
) -> Result<(PopulationPool, LyapunovEstimate)> {
    if cfg.pool_size < MIN_POOL {
        return Err(Error::Config(format!("pool size must be >= {MIN_POOL}, got {}", cfg.pool_size)));
    }
    if cfg.sweeps < 2 {
        return Err(Error::Config("population dynamics needs at least 2 measured sweeps".into()));
    }
    spec.validate()?;
    let z = point.z();
    let mut pool = vec![free_forward_green(k, z); cfg.pool_size];
    let mut rng = StreamId::new(seed, 0).rng();
    let mut resonances = 0usize;
    let mut batch_means = Vec::with_capacity(cfg.sweeps);
    let mut batch = Vec::with_capacity(cfg.pool_size);
    for sweep in 0..cfg.burn_in + cfg.sweeps {
        batch.clear();
        for _ in 0..cfg.pool_size {
            let mut sigma = Complex64::new(0.0, 0.0);
            for _ in 0..k {
                sigma += pool[rng.random_range(0..cfg.pool_size)];
            }
            let v = spec.draw(&mut rng);
            let denominator = point.lambda * v - z - sigma;
            let g = if denominator.norm() < crate::tree::RESONANCE_FLOOR {
                resonances += 1;
                Complex64::new(1.0 / crate::tree::RESONANCE_FLOOR, 0.0)
            } else {
                1.0 / denominator
            };
            pool[rng.random_range(0..cfg.pool_size)] = g;
            if sweep >= cfg.burn_in {
                batch.push(-g.norm().ln());
            }
        }
        if sweep >= cfg.burn_in {
            batch_means.push(stats::compensated_sum(batch.iter().copied()) / batch.len() as f64);
        }
    }
    if point.lambda > 0.0 {
        let spread = pool.iter().fold(0.0f64, |m, g| m.max((g - pool[0]).norm()));
        if spread < COLLAPSE_SPREAD {
            return Err(Error::PoolCollapse {
                spread,
                sweeps: cfg.burn_in + cfg.sweeps,
            });
        }
    }
    let block = (cfg.sweeps / ERROR_BLOCKS).max(1);
    let blocks: Vec<f64> = batch_means
        .chunks(block)
        .filter(|c| c.len() == block)
        .map(|c| c.iter().sum::<f64>() / block as f64)
        .collect();
    let mean = stats::compensated_sum(batch_means.iter().copied()) / batch_means.len() as f64;
    let (_, stderr) = stats::mean_stderr(&blocks);
    let estimate = LyapunovEstimate {
        mean,
        stderr,
        n_samples: cfg.sweeps * cfg.pool_size,
        method: Method::PopulationDynamics,
        eta: point.eta,
        depth_or_pool: cfg.pool_size,
        resonances,
    };
    Ok((
        PopulationPool {
            gammas: pool,
            point: *point,
            sweep_count: cfg.burn_in + cfg.sweeps,
        },
        estimate,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_disorder_stays_at_fixed_point() {
        let p = SpectralPoint::new(1.3, 1e-4, 0.0).unwrap();
        let cfg = PopulationConfig {
            pool_size: 1000,
            burn_in: 2,
            sweeps: 3,
        };
        let (pool, est) = population_dynamics(2, &p, &cfg, &DisorderSpec::default(), 3).unwrap();
        let g0 = free_forward_green(2, p.z());
        assert!(pool.gammas.iter().all(|g| (g - g0).norm() < 1e-12));
        assert!((est.mean + g0.norm().ln()).abs() < 1e-12);
    }

    #[test]
    fn small_pool_rejected() {
        let p = SpectralPoint::new(0.0, 1e-4, 0.1).unwrap();
        let cfg = PopulationConfig {
            pool_size: 10,
            ..Default::default()
        };
        assert!(population_dynamics(2, &p, &cfg, &DisorderSpec::default(), 3).is_err());
    }

    #[test]
    fn herglotz_pool() {
        let p = SpectralPoint::new(0.5, 1e-3, 1.0).unwrap();
        let cfg = PopulationConfig {
            pool_size: 1000,
            burn_in: 5,
            sweeps: 5,
        };
        let (pool, est) = population_dynamics(2, &p, &cfg, &DisorderSpec::default(), 3).unwrap();
        assert!(pool.gammas.iter().all(|g| g.is_finite() && g.im >= 0.0));
        assert!(est.stderr > 0.0);
    }
}
