use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn symsde(dir: &Path, args: &[&str]) -> i32 {
    let status = Command::new(env!("CARGO_BIN_EXE_symsde"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs");
    status.status.code().expect("exit code")
}

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, json).unwrap();
    path.to_string_lossy().into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn fig1_errors_preset() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(symsde(dir.path(), &["--preset", "fig1", "--paths", "500", "--out", "fig1"]), 0);
    let csv = std::fs::read_to_string(dir.path().join("fig1.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("scheme,step,time,weak_err"));
    let schemes: std::collections::BTreeSet<_> = lines.map(|l| l.split(',').next().unwrap().to_string()).collect();
    assert_eq!(schemes.len(), 4);
    assert_eq!(csv.lines().count(), 1 + 4 * 10);
    let manifest = read_json(&dir.path().join("fig1.manifest.json"));
    assert_eq!(manifest["status"], "ok");
    assert_eq!(manifest["master_seed"], 42);
    assert_eq!(manifest["config"]["command"], "errors");
}

#[test]
fn tanh_symmetry_is_verified() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "sym.json",
        r#"{"command": "verify-symmetry", "model": {"name": "tanh", "a": 1.0, "b": 1.0}, "out": "sym"}"#,
    );
    assert_eq!(symsde(dir.path(), &["--config", &cfg]), 0);
    let report = read_json(&dir.path().join("sym.json"));
    assert!(report["max_residual"].as_f64().unwrap() < 1e-8);
    assert_eq!(report["rows"].as_array().unwrap().len(), 100);
}

#[test]
fn linear_symmetries_are_verified() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "sym.json",
        r#"{"command": "verify-symmetry", "model": {"name": "linear", "a": -2, "b": 10, "c": 10, "d": 10}}"#,
    );
    assert_eq!(symsde(dir.path(), &["--config", &cfg, "--out", "lin"]), 0);
    assert!(read_json(&dir.path().join("lin.json"))["max_residual"].as_f64().unwrap() < 1e-8);
}

#[test]
fn zero_paths_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(symsde(dir.path(), &["--preset", "fig1", "--paths", "0", "--out", "bad"]), 1);
    assert!(!dir.path().join("bad.csv").exists());
    let manifest = read_json(&dir.path().join("bad.manifest.json"));
    assert_eq!(manifest["status"], "invalid");
    assert!(manifest["error"].as_str().unwrap().contains("paths"));
}

#[test]
fn invalid_configs_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        r#"{"command": "errors"}"#,
        r#"{"command": "launch", "preset": "fig1"}"#,
        r#"{"preset": "fig9"}"#,
        r#"{"preset": "fig1", "horizon": 1.05}"#,
        r#"{"preset": "fig1", "unknown_field": 1}"#,
        r#"{"command": "bounds", "model": {"name": "tanh", "a": 1, "b": 1}, "horizon": 1, "step": 0.1}"#,
        r#"{"command": "errors", "model": {"name": "tanh", "a": 1, "b": 1}, "x0": 1, "horizon": 1, "step": 0.1,
            "schemes": [{"kind": "exact_euler", "k": 0}]}"#,
        r#"{"command": "convergence", "preset": "fig1", "step_grid": [0.1, 0.05]}"#,
    ];
    for (i, json) in cases.iter().enumerate() {
        let cfg = write_config(dir.path(), &format!("c{i}.json"), json);
        assert_eq!(symsde(dir.path(), &["--config", &cfg, "--out", &format!("o{i}")]), 1, "{json}");
    }
    assert_eq!(symsde(dir.path(), &["--config", "missing.json"]), 1);
}

#[test]
fn unwritable_output_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(symsde(dir.path(), &["--preset", "fig1", "--paths", "10", "--out", "no/such/dir/x"]), 2);
}

#[test]
fn all_paths_overflowing_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#""model": {"name": "linear", "a": 1e10, "b": 0, "c": 0, "d": 0}, "x0": 1e300,
        "schemes": [{"kind": "euler"}], "horizon": 1, "step": 0.5, "paths": 20, "couple_factor": 1"#;
    let cfg = write_config(dir.path(), "boom.json", &format!(r#"{{"command": "errors", {body}}}"#));
    assert_eq!(symsde(dir.path(), &["--config", &cfg, "--out", "boom"]), 2);
    assert_eq!(read_json(&dir.path().join("boom.manifest.json"))["status"], "failed");
    assert!(!dir.path().join("boom.csv").exists());

    // simulate still writes its table, with the lost paths counted
    let cfg = write_config(dir.path(), "sim.json", &format!(r#"{{"command": "simulate", {body}}}"#));
    assert_eq!(symsde(dir.path(), &["--config", &cfg, "--out", "sim"]), 2);
    let csv = std::fs::read_to_string(dir.path().join("sim.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("euler,1.0,") && l.ends_with(",20")));
}

#[test]
fn outputs_are_identical_across_runs_and_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    for (out, workers) in [("a", "1"), ("b", "3"), ("c", "1")] {
        assert_eq!(
            symsde(dir.path(), &["--preset", "fig4", "--paths", "400", "--workers", workers, "--out", out]),
            0
        );
    }
    let read = |p: &str| std::fs::read(dir.path().join(p)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_eq!(read("a.csv"), read("c.csv"));
    assert_eq!(read("a.json"), read("b.json"));
}

#[test]
fn manifest_reruns_reproduce_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "conv.json",
        r#"{"command": "convergence", "model": {"name": "tanh", "a": 1.0, "b": 1.0}, "x0": 1.0, "horizon": 1.0,
            "step_grid": [0.1, 0.05, 0.025], "schemes": [{"kind": "euler"}, {"kind": "log_sinh_euler"}],
            "paths": 300, "master_seed": 7, "out": "first"}"#,
    );
    assert_eq!(symsde(dir.path(), &["--config", &cfg]), 0);
    let manifest = dir.path().join("first.manifest.json").to_string_lossy().into_owned();
    assert_eq!(symsde(dir.path(), &["--config", &manifest, "--out", "second"]), 0);
    let read = |p: &str| std::fs::read(dir.path().join(p)).unwrap();
    assert_eq!(read("first.csv"), read("second.csv"));
    assert_eq!(read("first.json"), read("second.json"));
    let mut first = read_json(&dir.path().join("first.manifest.json"));
    let mut second = read_json(&dir.path().join("second.manifest.json"));
    for m in [&mut first, &mut second] {
        m["config"].as_object_mut().unwrap().remove("out");
        m.as_object_mut().unwrap().remove("outputs");
    }
    assert_eq!(first, second);
}

#[test]
fn flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "f.json", r#"{"preset": "fig1", "paths": 50, "master_seed": 1, "out": "cfg"}"#);
    assert_eq!(symsde(dir.path(), &["--config", &cfg, "--paths", "30", "--seed", "9", "--out", "flag"]), 0);
    let manifest = read_json(&dir.path().join("flag.manifest.json"));
    assert_eq!(manifest["config"]["paths"], 30);
    assert_eq!(manifest["master_seed"], 9);
    assert!(!dir.path().join("cfg.csv").exists());
}

#[test]
fn bounds_and_stability_commands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "b.json",
        r#"{"command": "bounds", "model": {"name": "linear", "a": -2, "b": 0, "c": 10, "d": 0},
            "horizon": 1, "step": 0.05, "out": "bounds"}"#,
    );
    assert_eq!(symsde(dir.path(), &["--config", &cfg]), 0);
    let report = read_json(&dir.path().join("bounds.json"));
    assert_eq!(report["n"], 14);
    assert_eq!(report["appendix"].as_array().unwrap().len(), 10);

    let cfg = write_config(
        dir.path(),
        "s.json",
        r#"{"command": "stability", "preset": "fig1", "step_grid": [0.01, 0.025], "paths": 200, "out": "scan"}"#,
    );
    assert_eq!(symsde(dir.path(), &["--config", &cfg]), 0);
    let csv = std::fs::read_to_string(dir.path().join("scan.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "scheme,step,rate,stable,failures");
    assert_eq!(csv.lines().count(), 1 + 4 * 2);
}
