use std::process::Command;

use serde_json::Value;
use spvar_cli::{emit_plot_data, run, CliError, RunOptions, Scenario, ScenarioConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spvar"))
}

#[test]
fn config_rejects_unknown_keys() {
    let err = ScenarioConfig::parse(r#"{"version": 1, "lamda": 0.1}"#).unwrap_err();
    assert!(matches!(err, CliError::Config(_)), "{err}");
    let err = ScenarioConfig::parse(r#"{"version": 1, "model": {"kind": "pure-power", "q": 2.5, "a_q": 1, "p": 2.7, "x": 0}}"#)
        .unwrap_err();
    assert!(matches!(err, CliError::Config(_)), "{err}");
}

#[test]
fn config_validates_values() {
    for text in [
        r#"{"version": 2}"#,
        r#"{"version": 1, "lambda": -1}"#,
        r#"{"version": 1, "starts": 0}"#,
        r#"{"version": 1, "eps_sweep": [0.01, 0.02]}"#,
        r#"{"version": 1, "max_bumps": 0}"#,
    ] {
        assert!(ScenarioConfig::parse(text).is_err(), "accepted {text}");
    }
}

#[test]
fn config_round_trips() {
    let text = r#"{
        "version": 1,
        "scenario": "multibump",
        "model": {"kind": "pure-power", "q": 2.5, "a_q": 1.0, "p": 2.7},
        "profile": {"shape": {"kind": "ramp", "rho0": 0.03, "rho_inf": 0.7, "r0": 1.0, "r1": 2.0}},
        "radial": {"r_max": 24.0, "n": 4096},
        "max_bumps": 4
    }"#;
    let cfg = ScenarioConfig::parse(text).unwrap();
    assert_eq!(cfg.scenario, Some(Scenario::Multibump));
    assert_eq!(cfg.profile.as_ref().unwrap().eps, 1.0);
    let again = ScenarioConfig::parse(&serde_json::to_string(&cfg).unwrap()).unwrap();
    assert_eq!(cfg, again);
}

#[test]
fn scenario_names_round_trip() {
    for s in Scenario::ALL {
        assert_eq!(s.name().parse::<Scenario>().unwrap(), s);
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, format!("\"{}\"", s.name()));
    }
    assert!("symmetry".parse::<Scenario>().is_err());
}

#[test]
fn mismatched_scenario_is_a_config_error() {
    let cfg = ScenarioConfig {
        scenario: Some(Scenario::Autonomous),
        ..ScenarioConfig::default()
    };
    let err = run(Scenario::Multibump, &cfg, &RunOptions::default()).unwrap_err();
    assert!(matches!(err, CliError::Config(_)));
}

#[test]
fn missing_lower_bound_is_a_precondition_error() {
    // a vanishing nonlinearity keeps every trial ratio negative, so no λ is certified
    let cfg = ScenarioConfig::parse(r#"{"version": 1, "model": {"kind": "vanishing", "p": 2.7}}"#).unwrap();
    let err = run(Scenario::Autonomous, &cfg, &RunOptions::default()).unwrap_err();
    assert_eq!(err.kind(), "precondition", "{err}");
}

#[test]
fn invalid_config_exits_nonzero_with_structured_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"version": 1, "bogus": true}"#).unwrap();
    let out = bin()
        .args(["autonomous", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(out.stderr.trim_ascii()).unwrap();
    assert_eq!(err["error"], "config");
    assert!(err["message"].as_str().unwrap().contains("bogus"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn autonomous_run_writes_artifacts_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let status = bin()
        .args(["autonomous", "--serial", "--seed", "3", "--grid-scale", "desk", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stdout));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["scenario"], "autonomous");
    assert_eq!(report["seed"], 3);
    assert_eq!(report["inputs"]["version"], 1);
    assert!(report["all_passed"].as_bool().unwrap());
    for verdict in report["verdicts"].as_array().unwrap() {
        assert!(!verdict["claim"].as_str().unwrap().is_empty());
    }
    for rel in report["artifacts"].as_array().unwrap() {
        assert!(out.join(rel.as_str().unwrap()).is_file(), "missing {rel}");
    }
    for rel in ["runtime.json", "traces/minimizer.csv", "fields/minimizer.csv", "plots/mountain_pass_path.csv"] {
        assert!(out.join(rel).is_file(), "missing {rel}");
    }
    // the path CSV marks exactly one maximal node
    let path = std::fs::read_to_string(out.join("plots/mountain_pass_path.csv")).unwrap();
    let marked = path.lines().skip(1).filter(|l| l.ends_with(",1e0")).count();
    assert_eq!(marked, 1, "{path}");
    assert!(!std::fs::read_to_string(out.join("report.json")).unwrap().contains("seconds"));
}

#[test]
fn multibump_plot_is_two_column_n_versus_energy() {
    let cfg = ScenarioConfig {
        max_bumps: Some(3),
        ..ScenarioConfig::default()
    };
    let opts = RunOptions {
        serial: true,
        ..RunOptions::default()
    };
    let outcome = run(Scenario::Multibump, &cfg, &opts).unwrap();
    let plots = emit_plot_data(&outcome.report);
    let (_, csv) = plots.iter().find(|(n, _)| n == "multibump_energy.csv").unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "N,J");
    assert_eq!(lines.len(), 4);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 2));
    assert_eq!(plots, emit_plot_data(&outcome.report));
}
