//! End-to-end checks on generated worlds.

mod common;

use std::collections::BTreeMap;

use carrygap_core::config::RunConfig;
use carrygap_core::econometrics::ols_fit;
use carrygap_core::features::PanelSource;
use carrygap_core::market_data::QUOTE_HEADER;
use carrygap_core::pipeline::{fit_all, run, Command};
use carrygap_core::synth::{PlantedModel, SynthWorldConfig};
use carrygap_core::ErrorKind;

use common::{rel_err, world_in};

fn short(years: u32) -> SynthWorldConfig {
    SynthWorldConfig {
        years,
        ..Default::default()
    }
}

#[test]
fn every_planted_row_is_identified() {
    let dir = tempfile::tempdir().unwrap();
    let w = world_in(dir.path(), &short(2)).unwrap();
    assert_eq!(w.source.rows().len(), w.world.manifest.rows);
    assert_eq!(w.world.truth.len(), w.world.manifest.rows);
    for (m, t) in &w.world.manifest.markets {
        assert_eq!(w.source.rows().iter().filter(|r| r.market == *m).count(), t.rows);
    }
}

#[test]
fn panel_matches_truth_row_by_row() {
    let dir = tempfile::tempdir().unwrap();
    let w = world_in(dir.path(), &short(2)).unwrap();
    let truth: BTreeMap<_, _> = w.world.truth.iter().map(|t| ((t.market, t.date, t.expiry), t)).collect();
    let spec_cfg = w.cfg.spec_config("main3etf").unwrap();
    let spec = spec_cfg.specification().unwrap();
    let (panel, dropped) = w.source.panel_with(&spec_cfg.assets).unwrap();
    assert_eq!(dropped, 0);
    let coefs: BTreeMap<String, f64> = w.world.manifest.coefficients.iter().cloned().collect();
    let mut worst_signal: f64 = 0.0;
    let mut worst_target: f64 = 0.0;
    for (i, k) in panel.keys().iter().enumerate() {
        let t = truth[&(k.market, k.date, k.expiry)];
        let mut fitted = coefs["const"];
        for r in &spec.regressors {
            fitted += coefs[r] * panel.column(r).unwrap()[i];
        }
        worst_signal = worst_signal.max((fitted - t.cg_signal).abs());
        worst_target = worst_target.max((panel.target()[i] - t.cg_bp).abs());
    }
    assert!(worst_signal < 1e-8, "signal mismatch {worst_signal}");
    assert!(worst_target < 1e-6, "target mismatch {worst_target}");
}

#[test]
fn noiseless_world_is_recovered_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SynthWorldConfig {
        target_r2: None,
        noise_sd_bp: 0.0,
        ..short(2)
    };
    let w = world_in(dir.path(), &cfg).unwrap();
    let spec = w.cfg.spec_config("main3etf").unwrap().specification().unwrap();
    for (_, m, fit) in fit_all(&w.source, &w.cfg, &[spec]).unwrap() {
        let fit = fit.unwrap();
        for (term, truth) in &w.world.manifest.coefficients {
            let b = fit.coef(term).unwrap();
            assert!(rel_err(b, *truth) < 1e-6, "{m} {term}: {b} vs {truth}");
        }
        assert!(fit.r2 > 1.0 - 1e-9);
    }
}

#[test]
fn zero_coefficients_leave_pure_noise() {
    let dir = tempfile::tempdir().unwrap();
    let mut model = PlantedModel::default();
    model.intercept = 0.0;
    model.gbm_ois_1y = 0.0;
    model.ba_over_tau = 0.0;
    model.nfci = 0.0;
    for a in &mut model.assets {
        a.coef = 0.0;
    }
    let cfg = SynthWorldConfig {
        model,
        target_r2: None,
        noise_sd_bp: 5.0,
        ..short(3)
    };
    let w = world_in(dir.path(), &cfg).unwrap();
    let spec = w.cfg.spec_config("main3etf").unwrap().specification().unwrap();
    let (panel, _) = w.source.panel_with(&w.cfg.spec_config("main3etf").unwrap().assets).unwrap();
    let fit = ols_fit(&panel.market(carrygap_core::market_data::Market::Spx), &spec).unwrap();
    assert!(fit.r2 < 0.02, "r2 {}", fit.r2);
}

#[test]
fn empty_quotes_give_an_identify_only_report() {
    let dir = tempfile::tempdir().unwrap();
    let w = world_in(dir.path(), &short(2)).unwrap();
    let options = w.cfg.resolve(&w.cfg.inputs.option_quotes);
    std::fs::write(&options, format!("{}\n", QUOTE_HEADER.join(","))).unwrap();
    let report = run(Command::Fit, &w.cfg, &[]).unwrap();
    assert_eq!(report.data_rows("carry_gap.csv"), Some(0));
    assert!(report.get("coefficients.csv").is_none());
}

#[test]
fn missing_ois_file_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let w = world_in(dir.path(), &short(2)).unwrap();
    std::fs::remove_file(w.cfg.resolve(&w.cfg.inputs.ois)).unwrap();
    let err = run(Command::Identify, &w.cfg, &[]).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Data);
}

#[test]
fn unknown_spec_is_a_config_error() {
    let cfg = RunConfig::default();
    let err = run(Command::Fit, &cfg, &["nope".into()]).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Config);
}

#[test]
fn report_contains_every_stage() {
    let dir = tempfile::tempdir().unwrap();
    let w = world_in(dir.path(), &short(3)).unwrap();
    let report = run(Command::Report, &w.cfg, &[]).unwrap();
    for f in [
        "identification.csv",
        "carry_gap.csv",
        "coefficients.csv",
        "cv.csv",
        "scan.csv",
        "nested.csv",
        "pca.csv",
    ] {
        assert!(report.data_rows(f).unwrap_or(0) > 0, "{f} empty or missing");
    }
    let fit = run(Command::Fit, &w.cfg, &["main3etf".into()]).unwrap();
    assert!(fit.get("cv.csv").is_none());
    assert!(fit.get("coefficients.csv").unwrap().contains("main3etf"));
}
