mod common;

use std::fs;
use std::process::Command;

fn zerovisc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_zerovisc"))
}

#[test]
fn exit_codes_distinguish_failures() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    fs::write(&cfg, common::TINY).unwrap();
    let out = dir.path().join("out");

    // the coarse grid misses the error-rate band, so the gate trips
    let s = zerovisc().args(["study", "-c"]).arg(&cfg).arg("-o").arg(&out).output().unwrap();
    assert_eq!(s.status.code(), Some(4), "{}", String::from_utf8_lossy(&s.stderr));
    let stdout = String::from_utf8_lossy(&s.stdout);
    assert!(stdout.contains("FAIL criterion 1") && stdout.contains("PASS criterion 2"));
    assert!(out.join("manifest.json").exists());

    let s = zerovisc().args(["study", "--no-gate", "-c"]).arg(&cfg).arg("-o").arg(&out).output().unwrap();
    assert_eq!(s.status.code(), Some(0));

    let s = zerovisc().args(["study", "--eps", "0.05,0.1", "-c"]).arg(&cfg).output().unwrap();
    assert_eq!(s.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&s.stderr).contains("descending"));

    let s = zerovisc().args(["study", "--eps", "0.2,0.1,0.01", "-c"]).arg(&cfg).arg("-o").arg(&out).output().unwrap();
    assert_eq!(s.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&s.stderr).contains("navier-stokes"));

    let s = zerovisc().arg("rates").arg(&out).output().unwrap();
    assert_eq!(s.status.code(), Some(0));
    let text = String::from_utf8_lossy(&s.stdout);
    assert!(text.starts_with("quantity,slope"));
    assert!(text.lines().any(|l| l.starts_with("R_l2,")));

    let s = zerovisc().arg("rates").arg(dir.path().join("nothing")).output().unwrap();
    assert_eq!(s.status.code(), Some(2));
}

#[test]
fn partial_subcommands_write_their_own_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    fs::write(&cfg, common::TINY).unwrap();
    let out = dir.path().join("res");
    let s = zerovisc().args(["residuals", "--no-gate", "-c"]).arg(&cfg).arg("-o").arg(&out).output().unwrap();
    assert_eq!(s.status.code(), Some(0));
    assert!(out.join("residuals.csv").exists() && !out.join("errors.csv").exists());
    let out = dir.path().join("en");
    let s = zerovisc().args(["energies", "--no-gate", "-c"]).arg(&cfg).arg("-o").arg(&out).output().unwrap();
    assert_eq!(s.status.code(), Some(0));
    assert!(out.join("energies.csv").exists() && out.join("split.csv").exists());
}

#[test]
fn printed_config_round_trips() {
    let s = zerovisc().arg("config").output().unwrap();
    assert!(s.status.success());
    let c = zerovisc::study::StudyConfig::from_toml(&String::from_utf8(s.stdout).unwrap()).unwrap();
    assert_eq!(c, zerovisc::study::StudyConfig::desk());
}
