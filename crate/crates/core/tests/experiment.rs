use std::fs;

use cmpplab_core::experiment::{demo_config, execute, persist, DEMO_NAMES};
use cmpplab_core::{run_experiment, validate_config, Error, ExperimentConfig, Suite};

fn minimal(dir: &str) -> String {
    format!(
        r#"{{
            "schema_version": 1,
            "kind": "cpp",
            "mixing": {{"type": "degenerate", "value": 1.0}},
            "claims": {{"type": "degenerate", "value": 1.0}},
            "horizon": 1.0,
            "grid": [0.0, 1.0],
            "n_paths": 1000,
            "master_seed": 3,
            "suites": ["wald"],
            "output": {{"dir": {dir:?}}}
        }}"#
    )
}

#[test]
fn minimal_cpp_wald_run() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let config = ExperimentConfig::from_json(&minimal(out.to_str().unwrap())).unwrap();
    assert!(validate_config(&config).is_empty());
    let manifest = run_experiment(&config).unwrap();
    assert!(manifest.accept);
    assert_eq!(manifest.suites.len(), 1);
    assert_eq!(manifest.suites[0].suite, Suite::Wald);
    assert!(manifest.suites[0].accept);
    for name in ["manifest.json", "reports/wald.json", "reports/wald.csv"] {
        assert!(out.join(name).is_file(), "{name} missing");
    }
    let written: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(written["config_hash"], manifest.config_hash);
    assert_eq!(written["seed"], 3);
    // No staging directories left behind.
    let leftovers: Vec<_> = fs::read_dir(&out)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with(".cmpplab"))
        .collect();
    assert!(leftovers.is_empty());
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = demo_config("cmpp-gamma").unwrap();
    config.n_paths = 5_000;
    config.calibration_paths = 2_000;
    config.output.dir = tmp.path().join("a").to_string_lossy().into_owned();
    let first = execute(&config).unwrap();
    let second = execute(&config).unwrap();
    assert_eq!(first.outputs, second.outputs);
    persist(&first, tmp.path().join("a").as_path()).unwrap();
    persist(&second, tmp.path().join("b").as_path()).unwrap();
    for o in &first.outputs {
        let rel = format!("reports/{}.json", o.suite.name());
        assert_eq!(
            fs::read(tmp.path().join("a").join(&rel)).unwrap(),
            fs::read(tmp.path().join("b").join(&rel)).unwrap()
        );
    }
}

#[test]
fn grid_beyond_horizon_is_rejected_and_nothing_is_written() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("never");
    let mut config = ExperimentConfig::from_json(&minimal(out.to_str().unwrap())).unwrap();
    config.grid = vec![0.0, 1.0, 1.5];
    let violations = validate_config(&config);
    assert!(
        violations.iter().any(|v| v.contains("exceeds horizon")),
        "{violations:?}"
    );
    assert!(matches!(
        run_experiment(&config),
        Err(Error::InvalidConfig(_))
    ));
    assert!(!out.exists());
}

#[test]
fn validation_reports_every_violation() {
    let text = r#"{
        "schema_version": 1, "kind": "cmpp",
        "mixing": {"type": "gamma", "shape": -1.0, "rate": 1.0},
        "claims": {"type": "lognormal", "mu": 0.0, "sigma": 0.5},
        "horizon": 2.0, "grid": [0.0, 1.0, 2.0], "n_paths": 10,
        "master_seed": 1, "suites": ["martingale_m"]
    }"#;
    let config = ExperimentConfig::from_json(text).unwrap();
    let v = validate_config(&config);
    assert!(v.contains(&"mixing.shape must be > 0".to_string()), "{v:?}");
    assert!(v.iter().any(|m| m.contains("n_paths")), "{v:?}");
    assert!(!v.iter().any(|m| m.starts_with("claims")), "{v:?}");

    let fixed = ExperimentConfig::from_json_with_overrides(
        text,
        &[
            ("mixing.shape".into(), "2".into()),
            ("n_paths".into(), "1000".into()),
        ],
    )
    .unwrap();
    assert!(
        validate_config(&fixed).is_empty(),
        "{:?}",
        validate_config(&fixed)
    );
}

#[test]
fn unknown_fields_are_errors() {
    let text = minimal("x").replace("\"horizon\"", "\"horizn\": 1, \"horizon\"");
    assert!(ExperimentConfig::from_json(&text).is_err());
}

#[test]
fn config_hash_ignores_formatting_and_output() {
    let a = ExperimentConfig::from_json(&minimal("one")).unwrap();
    let compact: serde_json::Value = serde_json::from_str(&minimal("two")).unwrap();
    let b = ExperimentConfig::from_json(&compact.to_string()).unwrap();
    assert_eq!(a.hash(), b.hash());
    let mut c = a.clone();
    c.master_seed += 1;
    assert_ne!(a.hash(), c.hash());
}

#[test]
fn every_demo_validates_and_round_trips() {
    for name in DEMO_NAMES {
        let config = demo_config(name).unwrap();
        assert!(
            validate_config(&config).is_empty(),
            "{name}: {:?}",
            validate_config(&config)
        );
        let back = ExperimentConfig::from_json(&config.to_json_pretty().unwrap()).unwrap();
        assert_eq!(back, config);
    }
    assert!(demo_config("nope").is_err());
}

#[test]
fn one_ensemble_feeds_every_suite() {
    let mut config = demo_config("claims-unit-reduction").unwrap();
    config.n_paths = 4_000;
    config.calibration_paths = 1_000;
    config.output.dump_paths = true;
    let result = execute(&config).unwrap();
    let m = result.output(Suite::MartingaleM).unwrap();
    let l = result.output(Suite::MartingaleL).unwrap();
    // Unit claims: identical statistics on the shared ensemble.
    let strip = |bytes: &[u8]| {
        let mut v: serde_json::Value = serde_json::from_slice(bytes).unwrap();
        v.as_object_mut().unwrap().remove("series");
        v
    };
    assert_eq!(strip(&m.json), strip(&l.json));
    let csv = String::from_utf8(result.paths_csv.clone().unwrap()).unwrap();
    let ids: std::collections::BTreeSet<&str> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(ids.len(), 4_000);
}
