//! Runs the built binary and checks exit codes and outputs.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

fn carrygap(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_carrygap"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_file() {
            out.insert(p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap());
        }
    }
    out
}

/// Three-year world written to `dir/world`.
fn small_world(dir: &Path) {
    let cfg = "[synth]\nyears = 3\n";
    std::fs::write(dir.join("synth.toml"), cfg).unwrap();
    let o = carrygap(&["synth", "--config", "synth.toml", "--out", "world"], dir);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn missing_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = carrygap(&["fit"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = carrygap(&["fit", "--config", "nowhere.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "atm_band = 7\n").unwrap();
    let o = carrygap(&["identify", "--config", "bad.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    std::fs::write(dir.path().join("typo.toml"), "sead = 1\n").unwrap();
    let o = carrygap(&["identify", "--config", "typo.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unreadable_input_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    small_world(dir.path());
    std::fs::write(dir.path().join("world/ois.csv"), "when,what\n1,2\n").unwrap();
    let o = carrygap(&["identify", "--config", "world/config.toml", "--out", "o"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn unknown_subcommand_prints_usage() {
    let dir = tempfile::tempdir().unwrap();
    let o = carrygap(&["frobnicate"], dir.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn unknown_spec_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    small_world(dir.path());
    let o = carrygap(&["fit", "--config", "world/config.toml", "--spec", "nope"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn worker_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    small_world(dir.path());
    for (jobs, out) in [("1", "j1"), ("2", "j2")] {
        let o = carrygap(&["report", "--config", "world/config.toml", "--jobs", jobs, "--out", out], dir.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (a, b) = (tree(&dir.path().join("j1")), tree(&dir.path().join("j2")));
    assert!(a.len() > 10);
    assert_eq!(a, b);
}

#[test]
fn seed_controls_the_world() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("synth.toml"), "[synth]\nyears = 2\n").unwrap();
    for (seed, out) in [("5", "a"), ("5", "b"), ("6", "c")] {
        let o = carrygap(&["synth", "--config", "synth.toml", "--seed", seed, "--out", out], dir.path());
        assert!(o.status.success());
    }
    let t = |d: &str| tree(&dir.path().join(d));
    assert_eq!(t("a"), t("b"));
    assert_ne!(t("a")["truth.csv"], t("c")["truth.csv"]);
}

#[test]
fn selected_specs_are_the_only_fits() {
    let dir = tempfile::tempdir().unwrap();
    small_world(dir.path());
    let o = carrygap(&["fit", "--config", "world/config.toml", "--spec", "baseline", "--out", "f"], dir.path());
    assert!(o.status.success());
    let coefs = std::fs::read_to_string(dir.path().join("f/coefficients.csv")).unwrap();
    let rows: Vec<&str> = coefs.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|l| l.starts_with("baseline,")));
}
