use std::process::{Command, Output};

use serde_json::Value;

fn bethe_lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bethe-lab"))
        .args(args)
        .env_remove("BETHE_LAB_THREADS")
        .output()
        .unwrap()
}

fn json_of(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(bethe_lab(&["--help"]).status.code(), Some(0));
    assert_eq!(bethe_lab(&["--version"]).status.code(), Some(0));
    assert_eq!(bethe_lab(&["verify", "--help"]).status.code(), Some(0));
}

#[test]
fn validation_errors_exit_one() {
    for args in [
        &["bogus"][..],
        &["free", "--K", "1"],
        &["free", "--K", "2", "--E", "0", "--eta", "-1"],
        &["lyap", "--lambda", "-1"],
        &["lyap", "--method", "closed-form", "--lambda", "0.1"],
        &["acdensity", "--eta", "0"],
        &["phase", "--lambdas", "0", "--energies", "1:0:0"],
        &["edge-window", "--lambda", "0.5"],
        &["verify", "lb", "--dist", "gaussian", "--n", "5"],
        &["scatter", "--k-wave", "4", "--energies", "0"],
        &["spectrum", "--threads", "0"],
    ] {
        let out = bethe_lab(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(out.stdout.is_empty());
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn failed_check_exits_two_with_report() {
    let out = bethe_lab(&["verify", "boundary", "--lambda", "0.3", "--E", "0", "--eta", "1e-3", "--Rs", "4,6,8", "--n", "50"]);
    assert_eq!(out.status.code(), Some(2));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["pass"], Value::Bool(false));
    assert!(!v["failures"].as_array().unwrap().is_empty());
}

#[test]
fn singular_input_exits_three() {
    let out = bethe_lab(&["verify", "boundary", "--lambda", "0", "--E", "0", "--eta", "0"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn free_reports_closed_forms() {
    let v = json_of(&bethe_lab(&["free", "--K", "2", "--E", "0"]));
    assert_eq!(v["command"], "free");
    assert_eq!(v["tool_version"], bethe_lab::VERSION);
    assert!((v["L0"].as_f64().unwrap() - 0.5 * 2f64.ln()).abs() < 1e-8);
    assert_eq!(v["criterion"], "holds");
    let v = json_of(&bethe_lab(&["free", "--K", "2", "--E", "-3.5"]));
    assert_eq!(v["criterion"], "fails");
}

#[test]
fn spectrum_reports_edges() {
    let v = json_of(&bethe_lab(&["spectrum", "--K", "4", "--lambda", "0.5"]));
    assert_eq!(v["E_lambda"].as_f64(), Some(-4.5));
    assert_eq!(v["E_lambda"], v["edges"][0]);
    let threshold = bethe_lab::tree::weak_disorder_threshold(4);
    assert!((v["weak_disorder_threshold"].as_f64().unwrap() - threshold).abs() < 1e-8 * threshold);
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"K": 3, "E": 0.5}"#).unwrap();
    let v = json_of(&bethe_lab(&["free", "--config", cfg.to_str().unwrap()]));
    assert_eq!(v["config"]["K"], 3);
    assert_eq!(v["config"]["E"].as_f64(), Some(0.5));
    let v = json_of(&bethe_lab(&["free", "--config", cfg.to_str().unwrap(), "--E", "1"]));
    assert_eq!(v["config"]["K"], 3);
    assert_eq!(v["config"]["E"].as_f64(), Some(1.0));

    std::fs::write(&cfg, r#"{"K": 3, "nonsense": 1}"#).unwrap();
    let out = bethe_lab(&["free", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nonsense"));
}

#[test]
fn config_file_sets_output_and_distribution() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    let target = dir.path().join("out.json");
    std::fs::write(
        &cfg,
        serde_json::json!({
            "K": 2, "lambda": 0.2, "E": 0.3, "R": 8, "n": 50, "threads": 2,
            "dist": {"kind": "gaussian", "params": {"sigma": 0.5}},
            "output": target,
        })
        .to_string(),
    )
    .unwrap();
    let out = bethe_lab(&["lyap", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&target).unwrap()).unwrap();
    assert_eq!(v["config"]["dist"]["kind"], "gaussian");
    assert_eq!(v["n"], 50);
    assert!(v["mean"].as_f64().unwrap().is_finite());
}

#[test]
fn short_distribution_syntax() {
    let v = json_of(&bethe_lab(&["lyap", "--lambda", "0.2", "--E", "0.3", "--R", "6", "--n", "20", "--dist", "cauchy:0.3"]));
    assert_eq!(v["config"]["dist"]["kind"], "cauchy");
}

#[test]
fn phase_csv_layout() {
    let out = bethe_lab(&["phase", "--K", "2", "--lambdas", "0,0.05", "--energies", "-4:4:5", "--R", "8", "--n", "40", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "lambda,E,L_mean,L_stderr,class");
    assert_eq!(lines.len(), 1 + 2 * 5);
    assert!(lines[1].starts_with("0,-4,") && lines[1].ends_with("outside-spectrum"));
    assert!(lines[3].starts_with("0,0,") && lines[3].ends_with("criterion-holds"));
    let outside_sampled = lines.iter().find(|l| l.starts_with("0.05,-4,")).unwrap();
    assert_eq!(outside_sampled, &"0.05,-4,,,outside-spectrum");
}

#[test]
fn scatter_csv_and_json_agree() {
    let base = ["scatter", "--K", "2", "--lambda", "0.05", "--energies", "-2.5,0.5", "--R", "8", "--n", "50"];
    let csv = String::from_utf8(bethe_lab(&base).stdout).unwrap();
    assert_eq!(csv.lines().next(), Some(bethe_lab::scatter::PROFILE_CSV_HEADER));
    assert_eq!(csv.lines().count(), 3);
    let mut args = base.to_vec();
    args.extend(["--format", "json"]);
    let v = json_of(&bethe_lab(&args));
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    let first: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(first[3].parse::<f64>().unwrap(), rows[0]["mean_abs_R"].as_f64().unwrap());
}

#[test]
fn lyap_extrapolation_reports_each_eta() {
    let v = json_of(&bethe_lab(&["lyap", "--K", "2", "--E", "1", "--method", "population", "--etas", "1e-3,1e-4,1e-5"]));
    assert_eq!(v["per_eta"].as_array().unwrap().len(), 3);
    assert_eq!(v["eta"].as_f64(), Some(0.0));
    assert!((v["mean"].as_f64().unwrap() - 0.5 * 2f64.ln()).abs() < 1e-3);
}

#[test]
fn thread_count_from_environment() {
    let args = ["verify", "lb", "--R", "6", "--n", "200"];
    let plain = bethe_lab(&args).stdout;
    let env = Command::new(env!("CARGO_BIN_EXE_bethe-lab"))
        .args(args)
        .env("BETHE_LAB_THREADS", "3")
        .output()
        .unwrap();
    assert!(env.status.success());
    assert_eq!(env.stdout, plain);
    let bad = Command::new(env!("CARGO_BIN_EXE_bethe-lab"))
        .args(args)
        .env("BETHE_LAB_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn seed_changes_sampled_output() {
    let a = bethe_lab(&["lyap", "--lambda", "0.2", "--E", "0.3", "--R", "6", "--n", "30", "--seed", "1"]).stdout;
    let b = bethe_lab(&["lyap", "--lambda", "0.2", "--E", "0.3", "--R", "6", "--n", "30", "--seed", "2"]).stdout;
    assert_ne!(a, b);
}
