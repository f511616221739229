//! The `bethe-lab` command line.
//!
//! Every subcommand accepts `--config file.json` (keys as flag names) with
//! explicit flags taking precedence, echoes its resolved configuration and
//! the tool version in its output, and rounds every real to 9 significant
//! digits. Exit codes: 0 success, 1 invalid input, 2 failed verification,
//! 3 runtime or I/O error.

mod args;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;
use num_complex::Complex64;
use serde_json::{json, Value};

pub use args::{Cli, Command, Depths, Dist, Grid};
use args::*;

use crate::disorder::DisorderSpec;
use crate::error::{Error, Result};
use crate::lyapunov::{
    ac_density, default_depth, delocalization_criterion, extrapolate_eta, Estimator, FiniteDepthConfig,
    GreenSource, LyapunovEstimate, PopulationConfig, DEFAULT_ETA,
};
use crate::phase::{self, EdgeWindowConfig, ScanConfig};
use crate::scatter::{self, ProfileConfig, PROFILE_CSV_HEADER};
use crate::stats::sig9;
use crate::tree::{
    free_forward_green, free_lattice_green, free_lyapunov, spectrum_edges, weak_disorder_threshold, Boundary,
    SpectralPoint,
};
use crate::verify;

pub const THREADS_ENV: &str = "BETHE_LAB_THREADS";
const DEFAULT_SEED: u64 = 1;
const DEFAULT_SAMPLES: usize = 400;

struct Outcome {
    body: String,
    exit: i32,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Size(_) | Error::Precondition(_) | Error::Unphysical(_) | Error::Json(_) => 1,
        _ => 3,
    }
}

/// Parse `argv` (program name first), run the command, return the exit code.
pub fn run<I: IntoIterator<Item = OsString>>(argv: I) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let common = match resolved_common(&cli.command) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let threads = match thread_count(common.threads) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return 3;
        }
    };
    match pool.install(|| dispatch(&cli.command)).and_then(|out| {
        emit(&out.body, &common.output)?;
        Ok(out.exit)
    }) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn thread_count(flag: Option<usize>) -> Result<usize> {
    let n = match flag {
        Some(n) => n,
        None => match std::env::var(THREADS_ENV) {
            Ok(s) => s
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a positive integer, got '{s}'")))?,
            Err(_) => 0,
        },
    };
    if flag == Some(0) {
        return Err(Error::Config("--threads must be >= 1".into()));
    }
    Ok(n)
}

fn common_of(c: &Command) -> &Common {
    match c {
        Command::Free(a) => &a.common,
        Command::Lyap(a) | Command::Acdensity(a) => &a.common,
        Command::Phase(a) => &a.common,
        Command::EdgeWindow(a) => &a.common,
        Command::Spectrum(a) => &a.common,
        Command::Verify(a) => &a.common,
        Command::Scatter(a) => &a.common,
    }
}

/// `Common` with `output` and `threads` filled from `--config` when not given
/// as flags. The full key check happens per command in `dispatch`.
fn resolved_common(c: &Command) -> Result<Common> {
    let mut common = common_of(c).clone();
    let Some(path) = common.config.as_deref() else {
        return Ok(common);
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    let file: Value = serde_json::from_str(&text)?;
    if common.output.is_none() {
        if let Some(v) = file.get("output") {
            common.output = Some(serde_json::from_value(v.clone()).map_err(|e| Error::Config(format!("config: {e}")))?);
        }
    }
    if common.threads.is_none() {
        if let Some(v) = file.get("threads") {
            common.threads = Some(serde_json::from_value(v.clone()).map_err(|e| Error::Config(format!("config: {e}")))?);
        }
    }
    Ok(common)
}

fn emit(body: &str, path: &Option<std::path::PathBuf>) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, body)?,
        None => std::io::stdout().lock().write_all(body.as_bytes())?,
    }
    Ok(())
}

/// Round every non-integer number to 9 significant digits.
pub fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = sig9(n.as_f64().expect("f64"));
            serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_json).collect()),
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

fn envelope(command: &str, config: Value, result: Value) -> Result<String> {
    let mut out = serde_json::Map::new();
    out.insert("command".into(), json!(command));
    out.insert("tool_version".into(), json!(crate::VERSION));
    out.insert("config".into(), config);
    match result {
        Value::Object(m) => out.extend(m),
        other => {
            out.insert("result".into(), other);
        }
    }
    Ok(serde_json::to_string_pretty(&round_json(Value::Object(out)))? + "\n")
}

fn complex(c: Complex64) -> Value {
    json!({"re": c.re, "im": c.im})
}

fn require_json(format: Option<OutFormat>, command: &str) -> Result<()> {
    if format == Some(OutFormat::Csv) {
        return Err(Error::Config(format!("{command} only writes JSON")));
    }
    Ok(())
}

fn dispatch(command: &Command) -> Result<Outcome> {
    let ok = |body| Ok(Outcome { body, exit: 0 });
    match command {
        Command::Free(a) => ok(free(&with_config(a, a.common.config.as_deref())?)?),
        Command::Spectrum(a) => ok(spectrum(&with_config(a, a.common.config.as_deref())?)?),
        Command::Lyap(a) => ok(lyap(&with_config(a, a.common.config.as_deref())?)?),
        Command::Acdensity(a) => ok(acdensity(&with_config(a, a.common.config.as_deref())?)?),
        Command::Phase(a) => ok(phase_scan(&with_config(a, a.common.config.as_deref())?)?),
        Command::EdgeWindow(a) => ok(edge(&with_config(a, a.common.config.as_deref())?)?),
        Command::Verify(a) => verify_cmd(&with_config(a, a.common.config.as_deref())?),
        Command::Scatter(a) => ok(scatter_cmd(&with_config(a, a.common.config.as_deref())?)?),
    }
}

fn free(a: &FreeArgs) -> Result<String> {
    require_json(a.common.format, "free")?;
    let k = a.k.unwrap_or(2);
    let energy = a.energy.unwrap_or(0.0);
    let eta = a.eta.unwrap_or(0.0);
    let point = SpectralPoint::new(energy, eta, 0.0)?;
    check_k(k)?;
    let l0 = free_lyapunov(k, energy);
    let config = json!({"K": k, "E": energy, "eta": eta});
    let result = json!({
        "L0": l0,
        "Gamma0": complex(free_forward_green(k, point.z())),
        "G0": complex(free_lattice_green(k, point.z())),
        "log_K": (k as f64).ln(),
        "criterion": delocalization_criterion(&LyapunovEstimate::exact(l0, eta), k),
    });
    envelope("free", config, result)
}

fn check_k(k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::Config(format!("K must be >= 2, got {k}")));
    }
    Ok(())
}

fn spectrum(a: &SpectrumArgs) -> Result<String> {
    require_json(a.common.format, "spectrum")?;
    let k = a.k.unwrap_or(2);
    let lambda = a.lambda.unwrap_or(0.0);
    check_k(k)?;
    SpectralPoint::new(0.0, 0.0, lambda)?;
    let (lo, hi) = spectrum_edges(k, lambda);
    envelope(
        "spectrum",
        json!({"K": k, "lambda": lambda}),
        json!({"E_lambda": lo, "edges": [lo, hi], "weak_disorder_threshold": weak_disorder_threshold(k)}),
    )
}

struct Resolved {
    estimator: Estimator,
    spec: DisorderSpec,
    echo: Value,
}

fn resolve_estimator(e: &EstimatorArgs, k: usize, lambda: f64, default_method: MethodArg) -> Resolved {
    let method = match e.method {
        Some(m) => m,
        None if lambda == 0.0 && default_method == MethodArg::ClosedForm => MethodArg::ClosedForm,
        None if default_method == MethodArg::ClosedForm => MethodArg::FiniteDepth,
        None => default_method,
    };
    let spec = e.dist.clone().map(|d| d.0).unwrap_or_default();
    let boundary = match e.boundary.unwrap_or(BoundaryArg::FreeContinuation) {
        BoundaryArg::Open => Boundary::Open,
        BoundaryArg::FreeContinuation => Boundary::FreeContinuation,
    };
    let depth = e.depth.unwrap_or_else(|| default_depth(k));
    let samples = e.n.unwrap_or(DEFAULT_SAMPLES);
    let pop = PopulationConfig {
        pool_size: e.pool.unwrap_or(PopulationConfig::default().pool_size),
        burn_in: e.burn_in.unwrap_or(PopulationConfig::default().burn_in),
        sweeps: e.sweeps.unwrap_or(PopulationConfig::default().sweeps),
    };
    let (estimator, echo) = match method {
        MethodArg::ClosedForm => (Estimator::ClosedForm, json!({"method": method})),
        MethodArg::FiniteDepth => (
            Estimator::FiniteDepth(FiniteDepthConfig::new(depth, samples).with_boundary(boundary)),
            json!({"method": method, "R": depth, "n": samples, "boundary": boundary}),
        ),
        MethodArg::Population => (
            Estimator::Population(pop),
            json!({"method": method, "pool": pop.pool_size, "burn_in": pop.burn_in, "sweeps": pop.sweeps}),
        ),
    };
    let mut echo = echo;
    echo["dist"] = serde_json::to_value(&spec).expect("spec serializes");
    Resolved { estimator, spec, echo }
}

fn merge(mut base: Value, extra: Value) -> Value {
    if let (Value::Object(b), Value::Object(e)) = (&mut base, extra) {
        b.extend(e);
    }
    base
}

fn lyap(a: &LyapArgs) -> Result<String> {
    require_json(a.common.format, "lyap")?;
    let k = a.k.unwrap_or(2);
    check_k(k)?;
    let lambda = a.lambda.unwrap_or(0.0);
    let energy = a.energy.unwrap_or(0.0);
    let eta = a.eta.unwrap_or(DEFAULT_ETA);
    let seed = a.common.seed.unwrap_or(DEFAULT_SEED);
    let r = resolve_estimator(&a.estimator, k, lambda, MethodArg::FiniteDepth);
    let mut config = merge(json!({"K": k, "lambda": lambda, "E": energy, "seed": seed}), r.echo);
    let method_name = |e: &LyapunovEstimate| serde_json::to_value(e.method).expect("method serializes");
    let result = match &a.etas {
        None => {
            config["eta"] = json!(eta);
            let est = r.estimator.estimate(k, &SpectralPoint::new(energy, eta, lambda)?, &r.spec, seed)?;
            json!({
                "method": method_name(&est), "K": k, "lambda": lambda, "E": energy, "eta": eta,
                "mean": est.mean, "stderr": est.stderr, "n": est.n_samples, "seed": seed,
                "depth_or_pool": est.depth_or_pool, "resonances": est.resonances,
                "criterion": delocalization_criterion(&est, k),
            })
        }
        Some(etas) => {
            config["etas"] = json!(etas.0);
            let mut points = Vec::new();
            for (j, &eta) in etas.0.iter().enumerate() {
                let p = SpectralPoint::new(energy, eta, lambda)?;
                let s = crate::streams::derive_seed(seed, j as u64);
                points.push((eta, r.estimator.estimate(k, &p, &r.spec, s)?));
            }
            let x = extrapolate_eta(&points)?;
            let est = x.estimate;
            json!({
                "method": method_name(&est), "K": k, "lambda": lambda, "E": energy, "eta": 0.0,
                "mean": est.mean, "stderr": est.stderr, "n": est.n_samples, "seed": seed,
                "slope": x.slope, "flagged": x.flagged, "points_used": x.points_used,
                "per_eta": points.iter().map(|(eta, e)| json!({"eta": eta, "mean": e.mean, "stderr": e.stderr})).collect::<Vec<_>>(),
                "criterion": delocalization_criterion(&est, k),
            })
        }
    };
    envelope("lyap", config, result)
}

fn acdensity(a: &LyapArgs) -> Result<String> {
    require_json(a.common.format, "acdensity")?;
    let k = a.k.unwrap_or(2);
    check_k(k)?;
    let lambda = a.lambda.unwrap_or(0.0);
    let energy = a.energy.unwrap_or(0.0);
    let eta = a.eta.unwrap_or(DEFAULT_ETA);
    let seed = a.common.seed.unwrap_or(DEFAULT_SEED);
    let r = resolve_estimator(&a.estimator, k, lambda, MethodArg::FiniteDepth);
    let source = match r.estimator {
        Estimator::FiniteDepth(c) => GreenSource::FiniteDepth(c),
        Estimator::Population(c) => GreenSource::Population(c),
        Estimator::ClosedForm => return Err(Error::Config("acdensity needs a sampling method".into())),
    };
    let n = a.estimator.n.unwrap_or(DEFAULT_SAMPLES);
    let config = merge(json!({"K": k, "lambda": lambda, "E": energy, "eta": eta, "n": n, "seed": seed}), r.echo);
    let d = ac_density(k, &SpectralPoint::new(energy, eta, lambda)?, &source, n, &r.spec, seed)?;
    envelope("acdensity", config, serde_json::to_value(d)?)
}

fn phase_scan(a: &PhaseArgs) -> Result<String> {
    let k = a.k.unwrap_or(2);
    check_k(k)?;
    let lambdas = a.lambdas.clone().map(|g| g.0).unwrap_or_else(|| vec![0.0]);
    let energies = a.energies.clone().map(|g| g.0).unwrap_or_else(|| Grid::from_str_default("-3.5:3.5:15"));
    let all_free = lambdas.iter().all(|l| *l == 0.0);
    let r = resolve_estimator(
        &a.estimator,
        k,
        if all_free { 0.0 } else { 1.0 },
        MethodArg::ClosedForm,
    );
    let cfg = ScanConfig {
        k,
        lambda_axis: lambdas,
        energy_axis: energies,
        eta: a.eta.unwrap_or(DEFAULT_ETA),
        estimator: r.estimator,
        disorder: r.spec,
        seed: a.common.seed.unwrap_or(DEFAULT_SEED),
    };
    let grid = phase::scan(&cfg)?.rounded();
    match a.common.format.unwrap_or(OutFormat::Json) {
        OutFormat::Csv => Ok(phase::to_csv(&grid)),
        OutFormat::Json => Ok(serde_json::to_string_pretty(&round_json(serde_json::to_value(&grid)?))? + "\n"),
    }
}

impl Grid {
    fn from_str_default(s: &str) -> Vec<f64> {
        s.parse::<Grid>().expect("built-in grid").0
    }
}

fn edge(a: &EdgeArgs) -> Result<String> {
    require_json(a.common.format, "edge-window")?;
    let k = a.k.unwrap_or(2);
    check_k(k)?;
    let lambda = a.lambda.unwrap_or(0.0);
    let seed = a.common.seed.unwrap_or(DEFAULT_SEED);
    let r = resolve_estimator(&a.estimator, k, lambda, MethodArg::ClosedForm);
    let mut cfg = EdgeWindowConfig::new(r.estimator, seed);
    cfg.disorder = r.spec;
    cfg.eta = a.eta.unwrap_or(DEFAULT_ETA);
    cfg.resolution = a.resolution.unwrap_or(cfg.resolution);
    cfg.probes = a.probes.unwrap_or(cfg.probes);
    let config = merge(
        json!({"K": k, "lambda": lambda, "eta": cfg.eta, "resolution": cfg.resolution, "probes": cfg.probes, "seed": seed}),
        r.echo,
    );
    let w = phase::edge_window(k, lambda, &cfg)?;
    envelope("edge-window", config, serde_json::to_value(w)?)
}

fn verify_cmd(a: &VerifyArgs) -> Result<Outcome> {
    require_json(a.common.format, "verify")?;
    let k = a.k.unwrap_or(2);
    check_k(k)?;
    let lambda = a.lambda.unwrap_or(0.05);
    let seed = a.common.seed.unwrap_or(DEFAULT_SEED);
    let spec = a.estimator.dist.clone().map(|d| d.0).unwrap_or_default();
    let edge = spectrum_edges(k, lambda).0;
    let depths_or = |default: &[usize]| -> Vec<usize> {
        match (&a.depths_list, a.estimator.depth) {
            (Some(d), _) => d.0.clone(),
            (None, Some(r)) => vec![r],
            (None, None) => default.to_vec(),
        }
    };
    let m = a.extra_depth.unwrap_or(6);
    let point = |e_default: f64, eta_default: f64| {
        SpectralPoint::new(a.energy.unwrap_or(e_default), a.eta.unwrap_or(eta_default), lambda)
    };
    let report = match a.check {
        VerifyCheck::Lb => {
            let r = a.estimator.depth.unwrap_or(10);
            verify::check_monotone_bound(k, lambda, r, a.estimator.n.unwrap_or(1000), &spec, seed)?
        }
        VerifyCheck::Gap => {
            let lambdas = a.lambdas.clone().map(|g| g.0).unwrap_or_else(|| vec![0.02, 0.04, 0.06, 0.08]);
            let mut e = a.estimator.clone();
            e.depth = e.depth.or(Some(16));
            let r = resolve_estimator(&e, k, 1.0, MethodArg::FiniteDepth);
            verify::check_lyapunov_gap(k, &lambdas, &r.estimator, a.eta.unwrap_or(DEFAULT_ETA), &spec, seed)?
        }
        VerifyCheck::Trunc => verify::check_truncation(
            k,
            &point(edge + 0.02, 1e-4)?,
            &depths_or(&[8]),
            m,
            a.estimator.n.unwrap_or(1000),
            &spec,
            seed,
        )?,
        VerifyCheck::Boundary => verify::boundary_decay(
            k,
            &point(edge, 0.0)?,
            &depths_or(&[4, 6, 8, 10, 12]),
            a.estimator.n.unwrap_or(200),
            &spec,
            seed,
        )?,
        VerifyCheck::Moments => verify::check_fractional_moments(
            k,
            &point(edge + 0.01, DEFAULT_ETA)?,
            a.s.unwrap_or(0.5),
            &a.depths.clone().map(|d| d.0).unwrap_or_else(|| vec![4, 6, 8, 10, 12, 14, 16]),
            a.estimator.n.unwrap_or(DEFAULT_SAMPLES),
            &spec,
            seed,
        )?,
        VerifyCheck::Lifshitz => verify::check_lifshitz(
            k,
            a.estimator.depth.unwrap_or(6),
            lambda,
            &a.delta_e.clone().map(|g| g.0).unwrap_or_else(|| vec![0.02, 0.04, 0.08]),
            a.estimator.n.unwrap_or(2000),
            &spec,
            seed,
        )?,
        VerifyCheck::Main => verify::main_term_bound(
            k,
            &point(edge + 0.01, 1e-4)?,
            &depths_or(&[8, 10, 12]),
            m,
            a.estimator.n.unwrap_or(1000),
            &spec,
            seed,
        )?,
    };
    let exit = if report.pass { 0 } else { 2 };
    let config = report.params.clone();
    let body = envelope("verify", config, serde_json::to_value(&report)?)?;
    Ok(Outcome { body, exit })
}

fn scatter_cmd(a: &ScatterArgs) -> Result<String> {
    let k = a.k.unwrap_or(2);
    check_k(k)?;
    let lambda = a.lambda.unwrap_or(0.0);
    let seed = a.common.seed.unwrap_or(DEFAULT_SEED);
    let energies = a.energies.clone().map(|g| g.0).unwrap_or_else(|| Grid::from_str_default("-3:3:13"));
    let r = resolve_estimator(&a.estimator, k, lambda, MethodArg::FiniteDepth);
    let source = match r.estimator {
        Estimator::FiniteDepth(c) => GreenSource::FiniteDepth(c),
        Estimator::Population(c) => GreenSource::Population(c),
        Estimator::ClosedForm => return Err(Error::Config("scatter needs a sampling method".into())),
    };
    let cfg = ProfileConfig {
        k_wave: a.k_wave.unwrap_or(std::f64::consts::FRAC_PI_2),
        eta: a.eta.unwrap_or(DEFAULT_ETA),
        samples: a.estimator.n.unwrap_or(DEFAULT_SAMPLES),
        source,
        seed,
    };
    let rows = scatter::transmission_profile(k, lambda, &energies, &cfg, &r.spec)?;
    match a.common.format.unwrap_or(OutFormat::Csv) {
        OutFormat::Csv => {
            let mut out = String::from(PROFILE_CSV_HEADER);
            out.push('\n');
            for row in &rows {
                out.push_str(&row.csv_line());
                out.push('\n');
            }
            Ok(out)
        }
        OutFormat::Json => {
            let config = merge(
                json!({"K": k, "lambda": lambda, "energies": energies, "eta": cfg.eta, "k_wave": cfg.k_wave,
                       "n": cfg.samples, "seed": seed}),
                r.echo,
            );
            envelope("scatter", config, json!({"rows": rows}))
        }
    }
}
