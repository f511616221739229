use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::disorder::DisorderSpec;
use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "bethe-lab", version, about = "Anderson model on regular trees: Green functions, Lyapunov exponents, phase diagrams")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Disorder-free closed forms at one energy.
    #[command(allow_negative_numbers = true)]
    Free(FreeArgs),
    /// Lyapunov exponent at one spectral point.
    #[command(allow_negative_numbers = true)]
    Lyap(LyapArgs),
    /// Density of the ac spectral measure at one point.
    #[command(allow_negative_numbers = true)]
    Acdensity(LyapArgs),
    /// Classified (lambda, E) grid.
    #[command(allow_negative_numbers = true)]
    Phase(PhaseArgs),
    /// Window above the lower spectral edge where the criterion holds.
    #[command(allow_negative_numbers = true)]
    EdgeWindow(EdgeArgs),
    /// Almost-sure spectrum edges.
    #[command(allow_negative_numbers = true)]
    Spectrum(SpectrumArgs),
    /// Numerical check of one step of the spectral-edge argument.
    #[command(allow_negative_numbers = true)]
    Verify(VerifyArgs),
    /// Reflection off a wire attached to the tree.
    #[command(allow_negative_numbers = true)]
    Scatter(ScatterArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    ClosedForm,
    FiniteDepth,
    Population,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryArg {
    Open,
    FreeContinuation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerifyCheck {
    Lb,
    Gap,
    Trunc,
    Boundary,
    Moments,
    Lifshitz,
    Main,
}

/// Real grid: `a,b,c` or `lo:hi:count` (inclusive, evenly spaced).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Grid(pub Vec<f64>);

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() == 3 {
            let lo: f64 = parts[0].trim().parse().map_err(|e| format!("{e}"))?;
            let hi: f64 = parts[1].trim().parse().map_err(|e| format!("{e}"))?;
            let count: usize = parts[2].trim().parse().map_err(|e| format!("{e}"))?;
            return match count {
                0 => Err("grid count must be >= 1".into()),
                1 => Ok(Grid(vec![lo])),
                _ => Ok(Grid(
                    (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect(),
                )),
            };
        }
        s.split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|e| format!("bad number '{p}': {e}")))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(Grid)
    }
}

/// Comma-separated nonnegative integers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Depths(pub Vec<usize>);

impl FromStr for Depths {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.split(',')
            .map(|p| p.trim().parse::<usize>().map_err(|e| format!("bad integer '{p}': {e}")))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(Depths)
    }
}

/// Disorder law: a JSON object or `uniform[:half_width]`,
/// `gaussian[:sigma]`, `cauchy[:scale]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dist(pub DisorderSpec);

impl FromStr for Dist {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        if s.starts_with('{') {
            return serde_json::from_str(s).map(Dist).map_err(|e| e.to_string());
        }
        let (name, param) = match s.split_once(':') {
            Some((n, p)) => (n, Some(p.parse::<f64>().map_err(|e| format!("bad parameter '{p}': {e}"))?)),
            None => (s, None),
        };
        let p = param.unwrap_or(1.0);
        match name {
            "uniform" | "uniform-symmetric" => Ok(Dist(DisorderSpec::UniformSymmetric { half_width: p })),
            "gaussian" => Ok(Dist(DisorderSpec::Gaussian { sigma: p })),
            "cauchy" => Ok(Dist(DisorderSpec::Cauchy { scale: p })),
            _ => Err(format!("unknown distribution '{name}'")),
        }
    }
}

impl Serialize for Dist {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Dist {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match Value::deserialize(d)? {
            Value::String(s) => s.parse().map_err(serde::de::Error::custom),
            v => serde_json::from_value(v).map(Dist).map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct Common {
    /// JSON file with default values for any flag (keys as flag names).
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Write the result here instead of stdout.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<OutFormat>,
    /// Worker threads (default: env BETHE_LAB_THREADS, else all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EstimatorArgs {
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Tree depth of the finite-depth estimator.
    #[arg(long = "R")]
    #[serde(rename = "R")]
    pub depth: Option<usize>,
    /// Number of disorder samples.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub pool: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub sweeps: Option<usize>,
    #[arg(long, value_enum)]
    pub boundary: Option<BoundaryArg>,
    #[arg(long)]
    pub dist: Option<Dist>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FreeArgs {
    #[arg(long = "K")]
    #[serde(rename = "K")]
    pub k: Option<usize>,
    #[arg(long = "E", allow_hyphen_values = true)]
    #[serde(rename = "E")]
    pub energy: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SpectrumArgs {
    #[arg(long = "K")]
    #[serde(rename = "K")]
    pub k: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct LyapArgs {
    #[arg(long = "K")]
    #[serde(rename = "K")]
    pub k: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long = "E", allow_hyphen_values = true)]
    #[serde(rename = "E")]
    pub energy: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    /// Decreasing η sequence; when given, the result is extrapolated to η = 0.
    #[arg(long)]
    pub etas: Option<Grid>,
    #[command(flatten)]
    #[serde(flatten)]
    pub estimator: EstimatorArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PhaseArgs {
    #[arg(long = "K")]
    #[serde(rename = "K")]
    pub k: Option<usize>,
    /// λ axis: `a,b,c` or `lo:hi:count`.
    #[arg(long, allow_hyphen_values = true)]
    pub lambdas: Option<Grid>,
    /// Energy axis: `a,b,c` or `lo:hi:count`.
    #[arg(long, allow_hyphen_values = true)]
    pub energies: Option<Grid>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub estimator: EstimatorArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EdgeArgs {
    #[arg(long = "K")]
    #[serde(rename = "K")]
    pub k: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub resolution: Option<f64>,
    #[arg(long)]
    pub probes: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub estimator: EstimatorArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct VerifyArgs {
    #[arg(value_enum)]
    pub check: VerifyCheck,
    #[arg(long = "K")]
    #[serde(rename = "K")]
    pub k: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// λ sweep for `gap`.
    #[arg(long)]
    pub lambdas: Option<Grid>,
    #[arg(long = "E", allow_hyphen_values = true)]
    #[serde(rename = "E")]
    pub energy: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    /// Truncation depths (comma list) for trunc, boundary and main.
    #[arg(long = "Rs")]
    #[serde(rename = "Rs")]
    pub depths_list: Option<Depths>,
    #[arg(long = "M")]
    #[serde(rename = "M")]
    pub extra_depth: Option<usize>,
    /// Moment order for `moments`.
    #[arg(long)]
    pub s: Option<f64>,
    /// Path depths for `moments`.
    #[arg(long)]
    pub depths: Option<Depths>,
    /// ΔE values for `lifshitz`.
    #[arg(long = "deltaE")]
    #[serde(rename = "deltaE")]
    pub delta_e: Option<Grid>,
    #[command(flatten)]
    #[serde(flatten)]
    pub estimator: EstimatorArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ScatterArgs {
    #[arg(long = "K")]
    #[serde(rename = "K")]
    pub k: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub energies: Option<Grid>,
    #[arg(long)]
    pub eta: Option<f64>,
    /// Wire wave number in (0, π).
    #[arg(long)]
    pub k_wave: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub estimator: EstimatorArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

/// Overlay explicit flags on the values from `--config`; unknown keys in
/// the file are an error.
pub fn with_config<T: Serialize + DeserializeOwned + Clone>(args: &T, config: Option<&Path>) -> Result<T> {
    let Some(path) = config else {
        return Ok(args.clone());
    };
    let flags = serde_json::to_value(args)?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    let mut merged = match serde_json::from_str::<Value>(&text)? {
        Value::Object(m) => m,
        _ => return Err(Error::Config("config file must hold a JSON object".into())),
    };
    let known = flags.as_object().expect("args serialize to an object");
    for key in merged.keys() {
        if !known.contains_key(key) && key != "output" {
            return Err(Error::Config(format!("unknown config key '{key}'")));
        }
    }
    for (key, value) in known {
        if !value.is_null() {
            merged.insert(key.clone(), value.clone());
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| Error::Config(format!("config: {e}")))
}
