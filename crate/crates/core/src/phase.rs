//! (λ, E) phase grids classified by the delocalization criterion, and the
//! empirical window above the lower spectral edge where the criterion holds.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::DisorderSpec;
use crate::error::{Error, Result};
use crate::lyapunov::{delocalization_criterion, Criterion, Estimator, DEFAULT_ETA};
use crate::stats::sig9;
use crate::streams::derive_seed;
use crate::tree::{spectrum_edges, weak_disorder_threshold, SpectralPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Class {
    OutsideSpectrum,
    CriterionHolds,
    CriterionFails,
    Undecided,
}

impl Class {
    pub fn as_str(&self) -> &'static str {
        match self {
            Class::OutsideSpectrum => "outside-spectrum",
            Class::CriterionHolds => "criterion-holds",
            Class::CriterionFails => "criterion-fails",
            Class::Undecided => "undecided",
        }
    }

    fn from_criterion(c: Criterion) -> Self {
        match c {
            Criterion::Holds => Class::CriterionHolds,
            Criterion::Fails => Class::CriterionFails,
            Criterion::Undecided => Class::Undecided,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    #[serde(rename = "K")]
    pub k: usize,
    pub lambda_axis: Vec<f64>,
    pub energy_axis: Vec<f64>,
    pub eta: f64,
    pub estimator: Estimator,
    pub disorder: DisorderSpec,
    pub seed: u64,
}

/// Classified grid; rows follow `lambda_axis`, columns `energy_axis`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub config: ScanConfig,
    pub tool_version: String,
    pub lambda_axis: Vec<f64>,
    pub energy_axis: Vec<f64>,
    /// `None` where nothing was estimated.
    pub l_values: Vec<Vec<Option<f64>>>,
    pub stderr_values: Vec<Vec<Option<f64>>>,
    pub class_codes: Vec<Vec<Class>>,
    /// Per-cell estimator failures, as `"lambda=.. E=..: message"`.
    pub diagnostics: Vec<String>,
}

impl PhaseGrid {
    /// Copy with every real value rounded to 9 significant digits.
    pub fn rounded(&self) -> Self {
        let r = |m: &Vec<Vec<Option<f64>>>| -> Vec<Vec<Option<f64>>> {
            m.iter().map(|row| row.iter().map(|v| v.map(sig9)).collect()).collect()
        };
        Self {
            l_values: r(&self.l_values),
            stderr_values: r(&self.stderr_values),
            ..self.clone()
        }
    }
}

fn outside_spectrum(k: usize, lambda: f64, energy: f64) -> bool {
    energy.abs() > spectrum_edges(k, lambda).1
}

/// Estimate and classify every cell. Cells outside the almost-sure
/// spectrum are classified without sampling; the closed-form backend still
/// records `L₀` there.
pub fn scan(cfg: &ScanConfig) -> Result<PhaseGrid> {
    if cfg.k < 2 {
        return Err(Error::Config(format!("K must be >= 2, got {}", cfg.k)));
    }
    if cfg.lambda_axis.is_empty() || cfg.energy_axis.is_empty() {
        return Err(Error::Config("phase grid axes must be nonempty".into()));
    }
    if cfg.lambda_axis.iter().chain(&cfg.energy_axis).any(|v| !v.is_finite()) {
        return Err(Error::Config("phase grid axes must be finite".into()));
    }
    for &lambda in &cfg.lambda_axis {
        SpectralPoint::new(0.0, cfg.eta, lambda)?;
        cfg.estimator.validate(lambda)?;
    }
    cfg.disorder.validate()?;
    let ne = cfg.energy_axis.len();
    let cells: Vec<(Option<(f64, f64)>, Class, Option<String>)> = (0..cfg.lambda_axis.len() * ne)
        .into_par_iter()
        .map(|idx| {
            let lambda = cfg.lambda_axis[idx / ne];
            let energy = cfg.energy_axis[idx % ne];
            let outside = outside_spectrum(cfg.k, lambda, energy);
            if outside && !matches!(cfg.estimator, Estimator::ClosedForm) {
                return (None, Class::OutsideSpectrum, None);
            }
            let point = SpectralPoint {
                energy,
                eta: cfg.eta,
                lambda,
            };
            match cfg.estimator.estimate(cfg.k, &point, &cfg.disorder, derive_seed(cfg.seed, idx as u64)) {
                Ok(est) => {
                    let class = if outside {
                        Class::OutsideSpectrum
                    } else {
                        Class::from_criterion(delocalization_criterion(&est, cfg.k))
                    };
                    (Some((est.mean, est.stderr)), class, None)
                }
                Err(e) => (
                    None,
                    if outside { Class::OutsideSpectrum } else { Class::Undecided },
                    Some(format!("lambda={lambda} E={energy}: {e}")),
                ),
            }
        })
        .collect();
    let mut grid = PhaseGrid {
        config: cfg.clone(),
        tool_version: crate::VERSION.to_string(),
        lambda_axis: cfg.lambda_axis.clone(),
        energy_axis: cfg.energy_axis.clone(),
        l_values: Vec::new(),
        stderr_values: Vec::new(),
        class_codes: Vec::new(),
        diagnostics: cells.iter().filter_map(|c| c.2.clone()).collect(),
    };
    for row in cells.chunks(ne) {
        grid.l_values.push(row.iter().map(|c| c.0.map(|v| v.0)).collect());
        grid.stderr_values.push(row.iter().map(|c| c.0.map(|v| v.1)).collect());
        grid.class_codes.push(row.iter().map(|c| c.1).collect());
    }
    Ok(grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

fn csv_number(v: Option<f64>) -> String {
    v.map(|v| sig9(v).to_string()).unwrap_or_default()
}

/// CSV body with header `lambda,E,L_mean,L_stderr,class`.
pub fn to_csv(grid: &PhaseGrid) -> String {
    let mut out = String::from("lambda,E,L_mean,L_stderr,class\n");
    for (i, lambda) in grid.lambda_axis.iter().enumerate() {
        for (j, energy) in grid.energy_axis.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                sig9(*lambda),
                sig9(*energy),
                csv_number(grid.l_values[i][j]),
                csv_number(grid.stderr_values[i][j]),
                grid.class_codes[i][j].as_str()
            ));
        }
    }
    out
}

pub fn export(grid: &PhaseGrid, format: Format, path: &Path) -> Result<()> {
    let body = match format {
        Format::Csv => to_csv(grid),
        Format::Json => serde_json::to_string_pretty(grid)? + "\n",
    };
    let mut f = std::fs::File::create(path)?;
    f.write_all(body.as_bytes())?;
    Ok(())
}

pub fn import_json(path: &Path) -> Result<PhaseGrid> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeWindowConfig {
    pub estimator: Estimator,
    pub eta: f64,
    pub disorder: DisorderSpec,
    pub seed: u64,
    /// Bisection stops once the bracket is narrower than this.
    pub resolution: f64,
    /// Probe energies per candidate window.
    pub probes: usize,
}

impl EdgeWindowConfig {
    pub fn new(estimator: Estimator, seed: u64) -> Self {
        Self {
            estimator,
            eta: DEFAULT_ETA,
            disorder: DisorderSpec::default(),
            seed,
            resolution: 1e-3,
            probes: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeProbe {
    #[serde(rename = "E")]
    pub energy: f64,
    pub mean: f64,
    pub stderr: f64,
    pub criterion: Criterion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeWindow {
    #[serde(rename = "K")]
    pub k: usize,
    pub lambda: f64,
    /// `E_λ = −(2√K + λ)`.
    pub edge: f64,
    pub delta: f64,
    /// Every probe evaluated, in evaluation order.
    pub probes: Vec<EdgeProbe>,
    pub diagnostic: Option<String>,
}

/// Largest δ̂ (to `resolution`) such that the criterion holds at
/// `cfg.probes` energies spread over `(E_λ, E_λ + δ̂]`, found by bisection on
/// `[0, |E_λ|]`. Probes sit at `E_λ + δ(j+1)/p`, the edge itself at δ = 0.
pub fn edge_window(k: usize, lambda: f64, cfg: &EdgeWindowConfig) -> Result<EdgeWindow> {
    let threshold = weak_disorder_threshold(k);
    if k < 2 {
        return Err(Error::Config(format!("K must be >= 2, got {k}")));
    }
    if !(lambda >= 0.0 && lambda < threshold) {
        return Err(Error::Precondition(format!(
            "edge window needs 0 <= lambda < {threshold} (weak-disorder threshold for K={k}), got {lambda}"
        )));
    }
    if cfg.probes == 0 || !(cfg.resolution > 0.0) {
        return Err(Error::Config("edge window needs probes >= 1 and resolution > 0".into()));
    }
    cfg.estimator.validate(lambda)?;
    cfg.disorder.validate()?;
    let edge = spectrum_edges(k, lambda).0;
    let mut probes = Vec::new();
    let mut probe = |energy: f64| -> Result<bool> {
        let point = SpectralPoint::new(energy, cfg.eta, lambda)?;
        let est = cfg
            .estimator
            .estimate(k, &point, &cfg.disorder, derive_seed(cfg.seed, energy.to_bits()))?;
        let criterion = delocalization_criterion(&est, k);
        probes.push(EdgeProbe {
            energy,
            mean: est.mean,
            stderr: est.stderr,
            criterion,
        });
        Ok(criterion == Criterion::Holds)
    };
    if !probe(edge)? {
        return Ok(EdgeWindow {
            k,
            lambda,
            edge,
            delta: 0.0,
            probes,
            diagnostic: Some(format!(
                "criterion does not hold at the spectral edge E = {edge}; the estimator is likely misconfigured"
            )),
        });
    }
    let p = cfg.probes;
    let mut window_holds =
        |delta: f64| -> Result<bool> {
            for j in 0..p {
                if !probe(edge + delta * (j + 1) as f64 / p as f64)? {
                    return Ok(false);
                }
            }
            Ok(true)
        };
    let (mut lo, mut hi) = (0.0, edge.abs());
    let delta = if window_holds(hi)? {
        hi
    } else {
        while hi - lo > cfg.resolution {
            let mid = 0.5 * (lo + hi);
            if window_holds(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    Ok(EdgeWindow {
        k,
        lambda,
        edge,
        delta,
        probes,
        diagnostic: None,
    })
}
