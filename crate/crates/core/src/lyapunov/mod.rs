//! Estimators of the Lyapunov exponent
//! `L_λ(E) = −lim_{η↓0} E log|⟨0|(H_λ − E − iη)⁻¹|0⟩|` on the rooted tree,
//! the delocalization criterion `L < log K`, the ac spectral density and
//! fractional-moment decay along a path.
//!
//! Two independent estimators are provided: finite-depth trees sampled in
//! full ([`estimate_finite_depth`]) and a population-dynamics sampler of the
//! stationary recursion ([`population_dynamics`]).

mod ac;
mod extrapolate;
mod finite_depth;
mod moments;
pub(crate) mod population;

use serde::{Deserialize, Serialize};

use crate::disorder::DisorderSpec;
use crate::error::{Error, Result};
use crate::tree::{free_lyapunov, SpectralPoint};

pub use ac::{ac_density, vertex_green_samples, AcDensity, GreenSource};
pub use extrapolate::{extrapolate_eta, Extrapolation};
pub use finite_depth::{default_depth, estimate_finite_depth, log_root_samples, FiniteDepthConfig};
pub use moments::{fractional_moment, FractionalMomentFit};
pub use population::{population_dynamics, PopulationConfig, PopulationPool};

/// Default imaginary part for boundary values.
pub const DEFAULT_ETA: f64 = 1e-6;

/// η sequence used for extrapolation to the real axis.
pub const DEFAULT_ETA_SEQUENCE: [f64; 3] = [1e-3, 1e-4, 1e-5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    FiniteDepth,
    PopulationDynamics,
    ClosedForm,
    Extrapolated,
}

/// Monte Carlo estimate of `L_λ(E)` in nats per step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: usize,
    pub method: Method,
    pub eta: f64,
    /// Tree depth for finite-depth runs, pool size for population dynamics.
    pub depth_or_pool: usize,
    /// Clamped resonant denominators met during the run.
    pub resonances: usize,
}

impl LyapunovEstimate {
    /// Exact value with zero uncertainty (closed-form backend).
    pub fn exact(mean: f64, eta: f64) -> Self {
        Self {
            mean,
            stderr: 0.0,
            n_samples: 1,
            method: Method::ClosedForm,
            eta,
            depth_or_pool: 0,
            resonances: 0,
        }
    }
}

/// Backend used to evaluate `L_λ(E)` at a single point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Estimator {
    /// `L₀(E)`; only valid at λ = 0.
    ClosedForm,
    FiniteDepth(FiniteDepthConfig),
    Population(PopulationConfig),
}

impl Estimator {
    pub fn validate(&self, lambda: f64) -> Result<()> {
        match self {
            Estimator::ClosedForm if lambda != 0.0 => Err(Error::Config(format!(
                "closed-form backend needs lambda = 0, got {lambda}"
            ))),
            Estimator::FiniteDepth(c) if c.depth < 1 || c.samples < 2 => {
                Err(Error::Config("finite-depth backend needs R >= 1 and n >= 2".into()))
            }
            Estimator::Population(c) if c.pool_size < population::MIN_POOL || c.sweeps < 2 => Err(
                Error::Config(format!("population backend needs pool >= {} and sweeps >= 2", population::MIN_POOL)),
            ),
            _ => Ok(()),
        }
    }

    pub fn estimate(
        &self,
        k: usize,
        point: &SpectralPoint,
        spec: &DisorderSpec,
        seed: u64,
    ) -> Result<LyapunovEstimate> {
        self.validate(point.lambda)?;
        match self {
            Estimator::ClosedForm => Ok(LyapunovEstimate::exact(free_lyapunov(k, point.energy), point.eta)),
            Estimator::FiniteDepth(c) => estimate_finite_depth(k, point, c, spec, seed),
            Estimator::Population(c) => population_dynamics(k, point, c, spec, seed).map(|r| r.1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Criterion {
    Holds,
    Fails,
    Undecided,
}

/// `L < log K` with a two-standard-error buffer.
pub fn delocalization_criterion(est: &LyapunovEstimate, k: usize) -> Criterion {
    let log_k = (k as f64).ln();
    if est.mean + 2.0 * est.stderr < log_k {
        Criterion::Holds
    } else if est.mean - 2.0 * est.stderr >= log_k {
        Criterion::Fails
    } else {
        Criterion::Undecided
    }
}
