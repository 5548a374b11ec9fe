use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_hydromodes");

const SMALL: &str = "[flow]\nreynolds = 3000.0\n[basis]\nroots_1d = 6\nroots_lateral = 4\n\
[evolution]\ndt = 0.05\nt_end = 2.0\ncadence = 5\ncheckpoint_every = 15\n";

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).current_dir(dir).args(args).output().expect("binary runs")
}

fn data_rows(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().filter(|l| !l.starts_with('#')).skip(1).map(String::from).collect()
}

fn small_config(dir: &Path) {
    std::fs::write(dir.join("c.toml"), SMALL).unwrap();
}

#[test]
fn dispersion_roots_of_symmetric_family() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), &["--out", "o", "dispersion", "--family", "1d-sym", "--n", "4"]);
    assert!(out.status.success());
    let mus: Vec<f64> = data_rows(&tmp.path().join("o/dispersion.csv"))
        .iter()
        .map(|r| r.split(',').nth(4).unwrap().parse().unwrap())
        .collect();
    for (mu, want) in mus.iter().zip([1.5708, 4.7124, 7.8540, 10.9956]) {
        assert!((mu - want).abs() < 5e-5, "{mu} vs {want}");
    }
    let text = std::fs::read_to_string(tmp.path().join("o/dispersion.csv")).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("# config_hash "));
    assert!(tmp.path().join("o/config.toml").exists());
}

#[test]
fn antisymmetric_first_root_is_pi() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), &["--out", "o", "dispersion", "--family", "1d-antisym", "--n", "1"]);
    assert!(out.status.success());
    let row = &data_rows(&tmp.path().join("o/dispersion.csv"))[0];
    let mu: f64 = row.split(',').nth(4).unwrap().parse().unwrap();
    assert!((mu - std::f64::consts::PI).abs() < 1e-12);
}

#[test]
fn usage_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run(tmp.path(), &["dispersion", "--family", "bogus"]).status.code(), Some(2));
    assert_eq!(run(tmp.path(), &["--ls", "-1", "dispersion", "--family", "1d-sym"]).status.code(), Some(2));
    assert_eq!(run(tmp.path(), &["--config", "missing.toml", "basis"]).status.code(), Some(2));
    std::fs::write(tmp.path().join("bad.toml"), "[flow]\nreynold = 3\n").unwrap();
    assert_eq!(run(tmp.path(), &["--config", "bad.toml", "basis"]).status.code(), Some(2));
    assert_eq!(run(tmp.path(), &["dispersion", "--family", "1d-sym", "--m", "1"]).status.code(), Some(2));
}

#[test]
fn json_format_wraps_meta() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), &["--out", "o", "--format", "json", "dispersion", "--family", "lateral-sym", "--m", "1.02"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("o/dispersion.json")).unwrap()).unwrap();
    assert_eq!(v["meta"]["command"], "dispersion");
    assert_eq!(v["data"].as_array().unwrap().len(), 4);
}

#[test]
fn resume_reproduces_uninterrupted_run() {
    let tmp = tempfile::tempdir().unwrap();
    small_config(tmp.path());
    assert!(run(tmp.path(), &["--config", "c.toml", "--out", "a", "evolve"]).status.success());
    assert!(run(tmp.path(), &["--config", "c.toml", "--out", "b", "evolve", "--t-end", "1.0"]).status.success());
    std::fs::copy(tmp.path().join("b/checkpoint.json"), tmp.path().join("half.json")).unwrap();
    assert!(run(tmp.path(), &["--config", "c.toml", "--out", "b", "evolve", "--resume", "half.json"]).status.success());
    let full = data_rows(&tmp.path().join("a/series.csv"));
    let rest = data_rows(&tmp.path().join("b/series.csv"));
    assert_eq!(full[full.len() - rest.len()..], rest[..]);
    let a = std::fs::read(tmp.path().join("a/checkpoint.json")).unwrap();
    let b = std::fs::read(tmp.path().join("b/checkpoint.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn resume_rejects_other_configuration() {
    let tmp = tempfile::tempdir().unwrap();
    small_config(tmp.path());
    assert!(run(tmp.path(), &["--config", "c.toml", "--out", "a", "evolve", "--t-end", "0.5"]).status.success());
    let out = run(tmp.path(), &["--config", "c.toml", "--re", "4000", "--out", "a", "evolve", "--resume", "a/checkpoint.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn ensembles_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    small_config(tmp.path());
    for dir in ["x", "y"] {
        let out = run(tmp.path(), &["--config", "c.toml", "--out", dir, "--jobs", "2", "ensemble", "--k-traj", "3"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["ensemble.csv", "member-00-seed-0.csv", "member-02-seed-2.csv"] {
        assert_eq!(
            std::fs::read(tmp.path().join("x").join(f)).unwrap(),
            std::fs::read(tmp.path().join("y").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn blow_up_exits_three_with_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    small_config(tmp.path());
    let out = run(tmp.path(), &["--config", "c.toml", "--out", "o", "evolve", "--dt", "40", "--t-end", "4000"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("o/checkpoint.json").exists());
}

#[test]
fn diagnose_and_export_read_checkpoints() {
    let tmp = tempfile::tempdir().unwrap();
    small_config(tmp.path());
    assert!(run(tmp.path(), &["--config", "c.toml", "--out", "o", "evolve", "--t-end", "0.5"]).status.success());
    assert!(run(tmp.path(), &["--config", "c.toml", "--out", "o", "diagnose", "--checkpoint", "o/checkpoint.json"]).status.success());
    let d: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("o/diagnostics.json")).unwrap()).unwrap();
    assert!(d["data"]["flow_ratio"].as_f64().unwrap() > 0.9);
    let out = run(tmp.path(), &["--config", "c.toml", "--out", "o", "export-field", "--checkpoint", "o/checkpoint.json", "--nx", "4", "--nz", "5"]);
    assert!(out.status.success());
    assert_eq!(data_rows(&tmp.path().join("o/field.csv")).len(), 20);
}

#[test]
fn laminar_export_is_poiseuille() {
    let tmp = tempfile::tempdir().unwrap();
    small_config(tmp.path());
    assert!(run(tmp.path(), &["--config", "c.toml", "--out", "o", "export-field", "--nx", "1", "--nz", "3"]).status.success());
    let u: Vec<f64> = data_rows(&tmp.path().join("o/field.csv")).iter().map(|r| r.split(',').nth(3).unwrap().parse().unwrap()).collect();
    assert!(u[0].abs() < 1e-12 && (u[1] - 1.0).abs() < 1e-12 && u[2].abs() < 1e-12, "{u:?}");
}
