//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use carrygap_core::config::RunConfig;
use carrygap_core::econometrics::{hac_se, HacConfig};
use carrygap_core::features::{slope_series, PanelSource};
use carrygap_core::implied_discount::{build_pairs, clean_pairs, identify_discount, CleaningConfig};
use carrygap_core::market_data::{DailySeries, Date, Market, SeriesUnit};
use carrygap_core::ois_curve::carry_gap_bp;
use carrygap_core::pipeline::{self, fit_all, loyo_all, pca_stage, Command};
use carrygap_core::synth::{
    brute_hac, closed_form_support, gen_chain, mc_expected_support, ChainParams, SynthWorldConfig,
};
use carrygap_core::validation::{loyo, nested_horizon_search};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use common::{rel_err, world_in, Loaded, Retargeted};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let t = Instant::now();
    let o = f();
    let e = t.elapsed();
    let within = e <= limit;
    Outcome {
        pass: o.pass && within,
        detail: format!("{} ({:.2}s, limit {}s)", o.detail, e.as_secs_f64(), limit.as_secs()),
    }
}

fn identification_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for _ in 0..1000 {
        let b = rng.random_range(0.85..=1.05);
        let f = rng.random_range(500.0..=5000.0);
        let n = rng.random_range(5..=60usize);
        let width = rng.random_range(0.05..0.4);
        let strikes: Vec<f64> = (0..n)
            .map(|i| f * (1.0 - width + 2.0 * width * i as f64 / (n - 1) as f64))
            .collect();
        let mut p = ChainParams::simple(b, f, strikes, 0.0);
        p.vol_sqrt_tau = rng.random_range(0.05..0.4);
        let quotes = gen_chain(&p, &mut rng);
        let (pairs, _) = build_pairs(&quotes);
        let clean = clean_pairs(&pairs, &CleaningConfig::default());
        match identify_discount(&clean) {
            Ok(id) if clean.len() == n => {
                worst = worst.max(rel_err(id.b_hat, b)).max(rel_err(id.f_hat, f));
            }
            _ => failures += 1,
        }
    }
    outcome(
        failures == 0 && worst <= 1e-10,
        format!("max relative error {worst:.2e} over 1000 chains, {failures} failures"),
    )
}

fn carry_gap_formula() -> Outcome {
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let g = -0.05 + 0.1 * (i as f64 + 0.5) / 50.0;
        for j in 0..50 {
            let tau = 3.0 * (j + 1) as f64 / 50.0;
            let d = (-0.03 * tau).exp();
            let cg = carry_gap_bp(d, d * (-g * tau).exp(), tau).expect("positive inputs");
            worst = worst.max(rel_err(cg, 1e4 * g));
        }
    }
    outcome(worst <= 1e-9, format!("max relative error {worst:.2e} on a 50x50 grid"))
}

fn gbm_closed_form() -> Outcome {
    let mut pass = true;
    let mut worst_ratio: f64 = 0.0;
    for (i, sigma) in [0.1, 0.2, 0.4].into_iter().enumerate() {
        for (j, horizon) in [0.25, 1.0, 2.0].into_iter().enumerate() {
            let e = mc_expected_support(sigma, horizon, 100_000, 2_000, 100 + (3 * i + j) as u64);
            let bound = 3.0 * e.std_error + 2.0 * e.discretization_allowance();
            let gap = (e.estimate - closed_form_support(sigma, horizon)).abs();
            worst_ratio = worst_ratio.max(gap / bound);
            pass &= gap <= bound;
        }
    }
    outcome(pass, format!("worst |MC - closed form| / bound = {worst_ratio:.3} over 9 cells"))
}

fn hac_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cfg = HacConfig::default();
    let mut worst: f64 = 0.0;
    let mut errors = 0;
    for _ in 0..200 {
        let t = rng.random_range(cfg.lag + 2..=2000);
        let k = rng.random_range(1..=6usize);
        let mut dates = Vec::new();
        let mut d = Date::from_ordinal(16_000);
        for _ in 0..t {
            d = d.add_days(rng.random_range(1..=3));
            let m = rng.random_range(1..=12);
            dates.extend(std::iter::repeat_n(d, m));
        }
        dates.shuffle(&mut rng);
        let n = dates.len();
        let x = DMatrix::from_fn(n, k + 1, |_, j| {
            if j == 0 {
                1.0
            } else {
                rng.sample::<f64, _>(StandardNormal) * j as f64
            }
        });
        let resid: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        match (hac_se(&x, &resid, &dates, &cfg), brute_hac(&x, &resid, &dates, cfg.lag)) {
            (Ok(se), Ok(cov)) => {
                for (i, s) in se.iter().enumerate() {
                    worst = worst.max(rel_err(*s, cov[(i, i)].sqrt()));
                }
            }
            _ => errors += 1,
        }
    }
    outcome(
        errors == 0 && worst <= 1e-10,
        format!("max relative SE difference {worst:.2e} over 200 panels, {errors} errors"),
    )
}

fn small_world(dir: &Path, years: u32) -> Loaded {
    let cfg = SynthWorldConfig {
        years,
        ..Default::default()
    };
    world_in(dir, &cfg).expect("synthetic world")
}

fn pca_rotation(dir: &Path) -> Outcome {
    let w = small_world(dir, 3);
    let out = match pca_stage(&w.source, &w.cfg) {
        Ok(o) => o,
        Err(e) => return outcome(false, format!("pca stage failed: {e}")),
    };
    let base = out.spec.name.clone();
    let rotated = format!("{base}_pca");
    let mut worst: f64 = 0.0;
    let mut pairs = 0;
    for m in Market::ALL {
        let r2 = |name: &str| out.fits.iter().find(|(n, mm, _)| n == name && *mm == m).map(|(_, _, f)| f.r2);
        if let (Some(a), Some(b)) = (r2(&base), r2(&rotated)) {
            worst = worst.max((a - b).abs());
            pairs += 1;
        }
    }
    let l = &out.pca.loadings;
    let orth = (l.transpose() * l - DMatrix::identity(l.ncols(), l.ncols())).abs().max();
    outcome(
        pairs == 2 && worst <= 1e-10 && orth <= 1e-10,
        format!("max |r2 - r2_rotated| {worst:.2e} over {pairs} markets, max |L'L - I| {orth:.2e}"),
    )
}

fn planted_recovery(w: &Loaded) -> Outcome {
    let spec = w.cfg.spec_config("main3etf").and_then(|s| s.specification());
    let spec = match spec {
        Ok(s) => s,
        Err(e) => return outcome(false, e.to_string()),
    };
    let truth: BTreeMap<String, f64> = w.world.manifest.coefficients.iter().cloned().collect();
    let mut pass = true;
    let mut worst_z: f64 = 0.0;
    let mut r2_gap: f64 = 0.0;
    let fits = match fit_all(&w.source, &w.cfg, std::slice::from_ref(&spec)) {
        Ok(f) => f,
        Err(e) => return outcome(false, e.to_string()),
    };
    for (_, m, fit) in &fits {
        let Ok(fit) = fit else {
            return outcome(false, format!("{m}: fit failed"));
        };
        for (term, b) in fit.terms.iter().zip(&fit.coefficients) {
            let se = fit.se(term).unwrap_or(f64::NAN);
            let z = (b - truth[term]).abs() / se;
            worst_z = worst_z.max(z);
            pass &= z <= 4.0;
        }
        let share = w.world.manifest.markets[m].signal_share;
        r2_gap = r2_gap.max((fit.r2 - share).abs());
        pass &= (fit.r2 - share).abs() <= 0.05;
    }
    let signs = truth["gbm_iefa_70"] < 0.0
        && truth["gbm_igov_441"] > 0.0
        && truth["gbm_iau_315"] > 0.0
        && truth["gbm_ois_1y"] < 0.0;
    outcome(
        pass && signs && fits.len() == 2,
        format!("max |b - truth| / HAC SE {worst_z:.2}, max |r2 - signal share| {r2_gap:.4}"),
    )
}

fn loyo_machinery(w: &Loaded) -> Outcome {
    let specs = match w.cfg.selected_specs(&["baseline".into(), "main3etf".into()]) {
        Ok(s) => s,
        Err(e) => return outcome(false, e.to_string()),
    };
    let reps = match loyo_all(&w.source, &w.cfg, &specs) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let pooled = |name: &str, m: Market| {
        reps.iter()
            .find(|r| r.spec_name == name && r.market == Some(m))
            .and_then(|r| r.pooled_r2)
            .unwrap_or(f64::NAN)
    };
    let mut better = true;
    let mut detail = String::new();
    for m in Market::ALL {
        let (b, e) = (pooled("baseline", m), pooled("main3etf", m));
        better &= e > b;
        detail.push_str(&format!("{m} pooled OOS R2 baseline {b:.3} vs 3ETF {e:.3}; "));
    }

    // Perturbing one holdout year leaves that fold's training untouched.
    let main = &specs[1];
    let terms = w.cfg.spec_config("main3etf").expect("configured").assets.clone();
    let (panel, _) = w.source.panel_with(&terms).expect("panel");
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut leak_free = true;
    let mut folds = 0;
    for m in Market::ALL {
        let p = panel.market(m);
        let reference = loyo(&p, main, None).expect("loyo");
        for (i, y) in reference.per_year.iter().enumerate() {
            let mut q = p.clone();
            let years: Vec<i32> = q.keys().iter().map(|k| k.date.year()).collect();
            for (v, yr) in q.target_mut().iter_mut().zip(&years) {
                if *yr == y.year {
                    *v += rng.random_range(-500.0..500.0);
                }
            }
            let again = loyo(&q, main, None).expect("loyo");
            leak_free &= again.coefficients[i] == reference.coefficients[i];
            folds += 1;
        }
    }

    let base = w.cfg.spec_config("baseline").and_then(|s| s.specification()).expect("baseline");
    let all_years: Vec<i32> = panel.years().into_iter().collect();
    let probe = [all_years[0], *all_years.last().expect("years")];
    let reference = nested_horizon_search(&w.source, &base, &w.cfg.nested, Some(&probe)).expect("nested");
    let mut shifted = w.source.base().clone();
    let years: Vec<i32> = shifted.keys().iter().map(|k| k.date.year()).collect();
    for (v, yr) in shifted.target_mut().iter_mut().zip(&years) {
        if *yr == probe[0] {
            *v = -3.0 * *v + 40.0;
        }
    }
    let perturbed = Retargeted {
        inner: &w.source,
        base: shifted,
    };
    let again = nested_horizon_search(&perturbed, &base, &w.cfg.nested, Some(&probe)).expect("nested");
    leak_free &= again.folds[0].selection == reference.folds[0].selection;

    outcome(
        better && leak_free,
        format!("{detail}holdout perturbation changed nothing in {folds} LOYO folds and the nested fold: {leak_free}"),
    )
}

fn planted_horizon(dir: &Path) -> Outcome {
    let mut cfg = SynthWorldConfig::default();
    cfg.model = cfg.model.with_windows(&[80, 320, 320]);
    cfg.target_r2 = Some(0.99);
    let w = match world_in(dir, &cfg) {
        Ok(w) => w,
        Err(e) => return outcome(false, e.to_string()),
    };
    let base = w.cfg.spec_config("baseline").and_then(|s| s.specification()).expect("baseline");
    let rep = match nested_horizon_search(&w.source, &base, &w.cfg.nested, None) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let truth = [80usize, 320, 320];
    let hits = rep
        .folds
        .iter()
        .filter(|f| {
            f.selection
                .selected
                .iter()
                .zip(truth)
                .all(|(t, w)| t.window.abs_diff(w) <= 1)
        })
        .count();
    let converged = rep.folds.iter().all(|f| f.selection.outcome.converged);
    let interior = rep.folds.iter().all(|f| !f.selection.outcome.hit_boundary);
    let picks: Vec<String> = rep
        .folds
        .iter()
        .map(|f| {
            let w: Vec<String> = f.selection.selected.iter().map(|t| t.window.to_string()).collect();
            w.join("/")
        })
        .collect();
    outcome(
        rep.folds.len() == 10 && hits >= 9 && converged && interior,
        format!(
            "{hits}/{} folds within 1 day, converged {converged}, interior {interior}; picks {}",
            rep.folds.len(),
            picks.join(" ")
        ),
    )
}

fn look_ahead() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let dates: Vec<Date> = (0..400).map(|i| Date::from_ordinal(17_000 + i + i / 5 * 2)).collect();
    let mut lp = 4.0;
    let values: Vec<f64> = dates
        .iter()
        .map(|_| {
            lp += 0.01 * rng.sample::<f64, _>(StandardNormal);
            f64::exp(lp)
        })
        .collect();
    let prices = DailySeries::new("P", dates.clone(), values.clone(), SeriesUnit::PriceLevel).expect("series");
    let mut violations = 0;
    let mut compared = 0;
    for _ in 0..1000 {
        let n = rng.random_range(2..=120usize);
        let cut = rng.random_range(0..dates.len());
        let t = dates[cut];
        let mut v2 = values.clone();
        for v in &mut v2[cut..] {
            *v *= rng.random_range(0.5..2.0);
        }
        let p2 = DailySeries::new("P", dates.clone(), v2, SeriesUnit::PriceLevel).expect("series");
        let a = slope_series(&prices, n).expect("slopes");
        let b = slope_series(&p2, n).expect("slopes");
        for (i, d) in a.dates.iter().enumerate() {
            if *d > t {
                break;
            }
            compared += 1;
            if b.dates.get(i) != Some(d) || a.slopes[i].to_bits() != b.slopes[i].to_bits() {
                violations += 1;
            }
        }
    }
    outcome(
        violations == 0 && compared > 0,
        format!("{violations} changed slopes among {compared} earlier slopes over 1000 perturbations"),
    )
}

fn collect_tree(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
    let mut entries: Vec<_> = std::fs::read_dir(dir).expect("readable").map(|e| e.expect("entry").path()).collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect_tree(root, &p, out);
        } else {
            let rel = p.strip_prefix(root).expect("inside root").to_string_lossy().into_owned();
            out.insert(rel, std::fs::read(&p).expect("readable"));
        }
    }
}

fn full_run(dir: &Path) -> carrygap_core::Result<BTreeMap<String, Vec<u8>>> {
    let world = dir.join("world");
    carrygap_core::synth::gen_world(&SynthWorldConfig::default(), &world)?;
    let cfg = RunConfig::load(world.join("config.toml"))?;
    pipeline::run(Command::Report, &cfg, &[])?.write_to(&dir.join("out"))?;
    let mut tree = BTreeMap::new();
    collect_tree(dir, dir, &mut tree);
    Ok(tree)
}

fn determinism(a: &Path, b: &Path) -> Outcome {
    match (full_run(a), full_run(b)) {
        (Ok(x), Ok(y)) => {
            let bytes: usize = x.values().map(Vec::len).sum();
            outcome(
                x == y && x.len() > 10,
                format!("{} files, {bytes} bytes, identical: {}", x.len(), x == y),
            )
        }
        (Err(e), _) | (_, Err(e)) => outcome(false, e.to_string()),
    }
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let sub = |name: &str| tmp.path().join(name);
    let secs = Duration::from_secs;

    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    results.push((1, "identification exactness", timed(secs(5), identification_exactness)));
    results.push((2, "carry-gap formula", timed(secs(1), carry_gap_formula)));
    results.push((3, "path-risk closed form vs Monte Carlo", timed(secs(60), gbm_closed_form)));
    results.push((4, "HAC oracle equivalence", timed(secs(30), hac_oracle)));
    results.push((5, "PCA rotation invariance", pca_rotation(&sub("c5"))));

    let mut world = None;
    let c6 = timed(secs(120), || {
        let w = small_world(&sub("c6"), 10);
        let o = planted_recovery(&w);
        world = Some(w);
        o
    });
    results.push((6, "planted coefficient recovery", c6));
    let w = world.expect("world built");
    results.push((7, "LOYO improvement and no leakage", loyo_machinery(&w)));
    results.push((8, "planted horizon recovery", planted_horizon(&sub("c8"))));
    results.push((9, "look-ahead guarantee", look_ahead()));
    results.push((10, "full-run determinism", determinism(&sub("c10a"), &sub("c10b"))));

    let mut failed = 0;
    for (n, name, o) in &results {
        println!("{} criterion {n:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
