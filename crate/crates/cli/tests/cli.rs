use std::process::{Command, Output};

fn rdmix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rdmix")).args(args).output().unwrap()
}

#[test]
fn preset_prints_a_parsable_config() {
    let out = rdmix(&["preset", "smooth"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let c = rdmix::driver::Config::from_toml(&text).unwrap();
    assert_eq!(c, rdmix::driver::presets::preset("smooth").unwrap());
}

#[test]
fn unknown_preset_is_a_typed_error() {
    let out = rdmix(&["preset", "nope"]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error kind=preset"), "{err}");
}

#[test]
fn config_and_preset_are_exclusive() {
    assert!(!rdmix(&["run", "--preset", "smooth", "--config", "x.toml"]).status.success());
    assert!(!rdmix(&["run"]).status.success());
}

#[test]
fn run_writes_records_to_the_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = rdmix(&["run", "--preset", "smooth", "--dt", "2.0", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("records.csv")).unwrap();
    assert!(csv.lines().count() > 2);
}

#[test]
fn bad_override_fails_validation() {
    let out = rdmix(&["run", "--preset", "smooth", "--dt=-1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().contains("error kind="));
}
