mod common;

use std::fs;

use sha2::{Digest, Sha256};
use zerovisc::study::{emit_plots, run_stages, run_study, Stages, StudyConfig};
use zerovisc::Error;

#[test]
fn reruns_are_byte_identical_and_manifest_is_complete() {
    let c = common::tiny();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = run_study(&c).unwrap();
    first.write(a.path()).unwrap();
    run_study(&c).unwrap().write(b.path()).unwrap();

    let manifest: Vec<serde_json::Value> =
        serde_json::from_str(&fs::read_to_string(a.path().join("manifest.json")).unwrap()).unwrap();
    let mut listed: Vec<String> = manifest.iter().map(|m| m["file"].as_str().unwrap().to_string()).collect();
    for m in &manifest {
        let name = m["file"].as_str().unwrap();
        let body = fs::read(a.path().join(name)).unwrap();
        let digest: String = Sha256::digest(&body).iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(m["sha256"].as_str().unwrap(), digest, "{name}");
        assert_eq!(body, fs::read(b.path().join(name)).unwrap(), "{name} differs between runs");
    }
    listed.push("manifest.json".into());
    let mut on_disk: Vec<String> =
        fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    listed.sort();
    on_disk.sort();
    assert_eq!(listed, on_disk);
    for f in ["errors.csv", "residuals.csv", "invariants.csv", "energies.csv", "split.csv", "rates.csv", "criteria.csv"] {
        assert!(on_disk.iter().any(|x| x == f), "missing {f}");
    }
}

#[test]
fn report_contents_line_up_with_the_sweep() {
    let c = common::tiny();
    let r = run_study(&c).unwrap();
    let times = c.nsteps() / c.stride + 1;
    assert_eq!(r.errors.len(), times * c.eps.len());
    assert!(r.errors.iter().all(|e| e.weighted.l2_u.is_finite()));
    assert_eq!(r.energies.len(), times * c.eps.len());
    assert_eq!(r.split.len(), c.eps.len());
    let ids: Vec<u32> = r.criteria.iter().map(|c| c.id).collect();
    assert_eq!(ids, [1, 2, 4, 6, 7]);
    let header = r.errors_csv().lines().next().unwrap().to_string();
    assert!(header.starts_with("t,eps,errL2_u,errL2_v,errLinf_u,errLinf_v"));
    assert!(r.energies_csv().starts_with("t,eps,E_v,K_v,E_w,K_w,E,K,order"));
    // the residual is second order on any grid
    let fit = r.rates.iter().find(|f| f.quantity == "residual_l2").unwrap();
    assert!((fit.slope - 2.0).abs() < 0.05, "{}", fit.slope);
}

#[test]
fn one_sweep_gives_one_figure() {
    let mut c = common::tiny();
    c.toggles.split = false;
    let r = run_stages(&c, Stages { errors: true, residuals: false, energies: true }).unwrap();
    let s = emit_plots(&r);
    assert_eq!(s.matches("savefig").count(), 1);
    assert!(s.contains("errors.csv") && !s.contains("energies.csv"));
    assert!(r.energies.is_empty());
}

#[test]
fn refusals_name_their_stage() {
    let mut c = common::tiny();
    c.eps = vec![0.2, 0.1, 0.01];
    match run_study(&c) {
        Err(Error::Stage { stage, hint, source }) => {
            assert_eq!(stage, "navier-stokes");
            assert!(!hint.is_empty());
            assert!(matches!(*source, Error::Resolution { .. }));
        }
        other => panic!("expected a stage refusal, got {other:?}"),
    }
    c.eps.clear();
    assert!(matches!(run_study(&c), Err(Error::Config(_))));
}

#[test]
fn desk_config_file_matches_the_builtin() {
    let text = fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/desk.toml")).unwrap();
    assert_eq!(StudyConfig::from_toml(&text).unwrap(), StudyConfig::desk());
}
