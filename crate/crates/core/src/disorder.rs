//! Single-site potential distributions.
//!
//! A [`DisorderSpec`] describes the law of the iid potential values `V_x`.
//! Besides density, CDF and sampling it provides the minimal function
//! `M_ρ(v) = inf_{ν∈(0,1]} (1/2ν) ∫_{|u-v|≤ν} ρ(u) du` and the numeric
//! regularity constant `b = sup ρ/M_ρ`.
//!
//! JSON form: `{"kind": "uniform-symmetric", "params": {"half_width": 1.0}}`,
//! `{"kind": "gaussian", "params": {"sigma": 1.0}}`,
//! `{"kind": "cauchy", "params": {"scale": 1.0}}`,
//! `{"kind": "piecewise-density", "params": {"breakpoints": [..], "values": [..]}}`.

use rand::Rng;
use rand_distr::{Cauchy, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::streams::StreamId;

/// Mass tolerance for user-supplied piecewise densities.
const MASS_TOLERANCE: f64 = 1e-9;

/// Default cap above which the regularity constant is reported as unbounded.
pub const DEFAULT_REGULARITY_CAP: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum DisorderSpec {
    /// Constant density on the closed interval `[-half_width, half_width]`.
    UniformSymmetric { half_width: f64 },
    /// Centered normal law.
    Gaussian { sigma: f64 },
    /// Centered Cauchy law.
    Cauchy { scale: f64 },
    /// Piecewise-constant density: `values[i]` on `[breakpoints[i], breakpoints[i+1])`.
    PiecewiseDensity {
        breakpoints: Vec<f64>,
        values: Vec<f64>,
    },
}

impl Default for DisorderSpec {
    fn default() -> Self {
        DisorderSpec::UniformSymmetric { half_width: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Support {
    Bounded { lo: f64, hi: f64 },
    Unbounded,
}

impl Support {
    pub fn contains(&self, v: f64) -> bool {
        match *self {
            Support::Bounded { lo, hi } => (lo..=hi).contains(&v),
            Support::Unbounded => v.is_finite(),
        }
    }
}

/// Outcome of the numeric regularity check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularity {
    Bounded(f64),
    Unbounded,
}

impl Regularity {
    pub fn constant(&self) -> Option<f64> {
        match *self {
            Regularity::Bounded(b) => Some(b),
            Regularity::Unbounded => None,
        }
    }
}

impl DisorderSpec {
    pub fn uniform(half_width: f64) -> Self {
        DisorderSpec::UniformSymmetric { half_width }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive and finite, got {x}")))
            }
        };
        match self {
            DisorderSpec::UniformSymmetric { half_width } => positive("half_width", *half_width),
            DisorderSpec::Gaussian { sigma } => positive("sigma", *sigma),
            DisorderSpec::Cauchy { scale } => positive("scale", *scale),
            DisorderSpec::PiecewiseDensity { breakpoints, values } => {
                if breakpoints.len() < 2 || values.len() + 1 != breakpoints.len() {
                    return Err(Error::Config(format!(
                        "piecewise density needs n+1 breakpoints for n values (got {} and {})",
                        breakpoints.len(),
                        values.len()
                    )));
                }
                if breakpoints.iter().any(|b| !b.is_finite())
                    || breakpoints.windows(2).any(|w| w[1] <= w[0])
                {
                    return Err(Error::Config("breakpoints must be finite and strictly increasing".into()));
                }
                if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::Config("piecewise density values must be finite and nonnegative".into()));
                }
                let mass: f64 = values
                    .iter()
                    .zip(breakpoints.windows(2))
                    .map(|(v, w)| v * (w[1] - w[0]))
                    .sum();
                if (mass - 1.0).abs() > MASS_TOLERANCE {
                    return Err(Error::Config(format!("piecewise density has mass {mass}, expected 1")));
                }
                Ok(())
            }
        }
    }

    pub fn support(&self) -> Support {
        match self {
            DisorderSpec::UniformSymmetric { half_width } => Support::Bounded {
                lo: -half_width,
                hi: *half_width,
            },
            DisorderSpec::Gaussian { .. } | DisorderSpec::Cauchy { .. } => Support::Unbounded,
            DisorderSpec::PiecewiseDensity { breakpoints, .. } => Support::Bounded {
                lo: breakpoints[0],
                hi: breakpoints[breakpoints.len() - 1],
            },
        }
    }

    /// True when the support is contained in `[-1, 1]`, the setting of the
    /// spectral-edge results.
    pub fn within_unit_interval(&self) -> bool {
        matches!(self.support(), Support::Bounded { lo, hi } if lo >= -1.0 && hi <= 1.0)
    }

    /// Density `ρ(v)`.
    pub fn density(&self, v: f64) -> f64 {
        match self {
            DisorderSpec::UniformSymmetric { half_width } => {
                if v.abs() <= *half_width {
                    0.5 / half_width
                } else {
                    0.0
                }
            }
            DisorderSpec::Gaussian { sigma } => {
                let t = v / sigma;
                (-0.5 * t * t).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
            }
            DisorderSpec::Cauchy { scale } => {
                let t = v / scale;
                1.0 / (std::f64::consts::PI * scale * (1.0 + t * t))
            }
            DisorderSpec::PiecewiseDensity { breakpoints, values } => {
                let last = breakpoints.len() - 1;
                if v < breakpoints[0] || v > breakpoints[last] {
                    return 0.0;
                }
                if v == breakpoints[last] {
                    return values[values.len() - 1];
                }
                let i = breakpoints.partition_point(|b| *b <= v) - 1;
                values[i]
            }
        }
    }

    /// Cumulative distribution function.
    pub fn cdf(&self, v: f64) -> f64 {
        match self {
            DisorderSpec::UniformSymmetric { half_width } => {
                ((v + half_width) / (2.0 * half_width)).clamp(0.0, 1.0)
            }
            DisorderSpec::Gaussian { sigma } => {
                0.5 * libm::erfc(-v / (sigma * std::f64::consts::SQRT_2))
            }
            DisorderSpec::Cauchy { scale } => 0.5 + (v / scale).atan() / std::f64::consts::PI,
            DisorderSpec::PiecewiseDensity { breakpoints, values } => {
                let mut acc = 0.0;
                for (w, rho) in breakpoints.windows(2).zip(values) {
                    if v <= w[0] {
                        break;
                    }
                    acc += rho * (v.min(w[1]) - w[0]);
                }
                acc.clamp(0.0, 1.0)
            }
        }
    }

    /// Mass of `[v - nu, v + nu]`.
    fn window_mass(&self, v: f64, nu: f64) -> f64 {
        match self {
            // Uniform windows are computed by overlap length to stay exact.
            DisorderSpec::UniformSymmetric { half_width } => {
                let lo = (v - nu).max(-half_width);
                let hi = (v + nu).min(*half_width);
                ((hi - lo).max(0.0)) * 0.5 / half_width
            }
            _ => (self.cdf(v + nu) - self.cdf(v - nu)).max(0.0),
        }
    }

    fn window_average(&self, v: f64, nu: f64) -> f64 {
        self.window_mass(v, nu) / (2.0 * nu)
    }

    /// Draw one value.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            DisorderSpec::UniformSymmetric { half_width } => {
                half_width * (2.0 * rng.random::<f64>() - 1.0)
            }
            DisorderSpec::Gaussian { sigma } => Normal::new(0.0, *sigma)
                .expect("validated sigma")
                .sample(rng),
            DisorderSpec::Cauchy { scale } => Cauchy::new(0.0, *scale)
                .expect("validated scale")
                .sample(rng),
            DisorderSpec::PiecewiseDensity { breakpoints, values } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (w, rho) in breakpoints.windows(2).zip(values) {
                    let mass = rho * (w[1] - w[0]);
                    if mass > 0.0 && u < acc + mass {
                        return (w[0] + (u - acc) / rho).min(w[1]);
                    }
                    acc += mass;
                }
                // u landed in the rounding slack above the total mass.
                let last = values.iter().rposition(|r| *r > 0.0).unwrap_or(0);
                breakpoints[last + 1]
            }
        }
    }
}

/// `n` iid draws from the stream `stream`. Deterministic in `(spec, stream, n)`.
pub fn sample(spec: &DisorderSpec, stream: StreamId, n: usize) -> Vec<f64> {
    let mut rng = stream.rng();
    (0..n).map(|_| spec.draw(&mut rng)).collect()
}

/// Free-standing form of [`DisorderSpec::density`] that validates first.
pub fn density_eval(spec: &DisorderSpec, v: f64) -> Result<f64> {
    spec.validate()?;
    Ok(spec.density(v))
}

const NU_LEVELS: i32 = 20;
const REFINE_TOL: f64 = 1e-6;

/// Minimal function `M_ρ(v)`.
///
/// The infimum is taken over the geometric grid `ν = 2^-j, j = 0..=20`, then
/// refined by golden-section search in the bracket around the best grid
/// point until the bracket values change by less than `1e-6`.
pub fn minimal_function(spec: &DisorderSpec, v: f64) -> f64 {
    let nus: Vec<f64> = (0..=NU_LEVELS).map(|j| 2f64.powi(-j)).collect();
    let avgs: Vec<f64> = nus.iter().map(|nu| spec.window_average(v, *nu)).collect();
    let (best, mut best_val) = avgs
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty grid");
    if best_val == 0.0 {
        return 0.0;
    }
    // Bracket [ν_{j+1}, ν_{j-1}] clipped to (0, 1].
    let mut a = nus[(best + 1).min(nus.len() - 1)];
    let mut b = nus[best.saturating_sub(1)];
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = spec.window_average(v, c);
    let mut fd = spec.window_average(v, d);
    for _ in 0..200 {
        if (fc - fd).abs() < REFINE_TOL * best_val.max(1e-300) && (b - a) < 1e-3 * b {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = spec.window_average(v, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = spec.window_average(v, d);
        }
    }
    best_val = best_val.min(fc).min(fd);
    best_val
}

/// Numeric regularity constant `sup ρ/M_ρ` over `grid`.
///
/// For piecewise densities the midpoint and both ends of every piece are
/// added to the grid, so narrow features are never stepped over. A `0/0`
/// ratio counts as 1. Returns [`Regularity::Unbounded`] when any ratio
/// exceeds `cap`.
pub fn regularity_constant(spec: &DisorderSpec, grid: &[f64], cap: f64) -> Regularity {
    let mut points = grid.to_vec();
    if let DisorderSpec::PiecewiseDensity { breakpoints, .. } = spec {
        for w in breakpoints.windows(2) {
            points.extend([w[0], 0.5 * (w[0] + w[1]), w[1]]);
        }
    }
    let mut sup = 0.0f64;
    for v in points {
        let rho = spec.density(v);
        let m = minimal_function(spec, v);
        let ratio = match (rho == 0.0, m == 0.0) {
            (true, true) => 1.0,
            (true, false) => 0.0,
            (false, true) => return Regularity::Unbounded,
            (false, false) => rho / m,
        };
        if ratio > cap {
            return Regularity::Unbounded;
        }
        sup = sup.max(ratio);
    }
    Regularity::Bounded(sup)
}

/// Evenly spaced grid covering the support (or `[-span, span]` when unbounded).
pub fn default_grid(spec: &DisorderSpec, points: usize, span: f64) -> Vec<f64> {
    let (lo, hi) = match spec.support() {
        Support::Bounded { lo, hi } => (lo, hi),
        Support::Unbounded => (-span, span),
    };
    let n = points.max(2);
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}
