use std::path::PathBuf;

use sobolev_spectral::config::StudyConfig;
use sobolev_spectral::solver::Scheme;
use sobolev_spectral::study::{run_study, StudyOptions};

fn shipped(name: &str) -> StudyConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    StudyConfig::load(path).unwrap()
}

#[test]
fn smooth_config_decays_spectrally() {
    let mut cfg = shipped("smooth.json");
    cfg.schemes = vec![Scheme::Galerkin];
    let report = run_study(&cfg, StudyOptions::default()).unwrap();
    let errs: Vec<f64> = report.runs.iter().map(|r| r.err_l2w.unwrap()).collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    assert!(errs[errs.len() - 1] <= 1e-9, "{errs:?}");
}

#[test]
fn every_shipped_config_is_valid() {
    for entry in
        std::fs::read_dir(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")).unwrap()
    {
        let path = entry.unwrap().path();
        let cfg = StudyConfig::load(&path).unwrap();
        cfg.problem().unwrap();
    }
}
