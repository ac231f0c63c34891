//! Leave-one-year-out validation, maturity-bin reports, horizon scans and
//! nested horizon selection.

mod nested;
mod scan;

use std::collections::BTreeMap;

use rayon::prelude::*;

pub use nested::{
    grid_points, nested_horizon_search, search_windows, ColumnCache, GramObjective, HorizonSelection,
    NestedConfig, NestedFold, NestedReport, SearchConfig, SearchOutcome, SearchStage, TraceStep,
    WindowObjective,
};
pub use scan::{horizon_scan, HorizonScan, ScanPoint};

use crate::econometrics::{correlation, mae, ols_fit, r_squared, rmse, FitResult, Specification};
use crate::error::{Error, Result};
use crate::features::{tau_bin, MaturityBin, Panel};
use crate::implied_discount::median;
use crate::market_data::Market;

/// Minimum panel rows for a calendar year to serve as a fold.
pub const MIN_FOLD_ROWS: usize = 50;
/// Holdout years with fewer rows are skipped.
pub const MIN_HOLDOUT_ROWS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct YearMetrics {
    pub year: i32,
    pub n_obs: usize,
    /// Centered on the holdout-year mean; `None` when that year has no variation.
    pub oos_r2: Option<f64>,
    pub rmse_bp: f64,
    pub corr: Option<f64>,
}

impl YearMetrics {
    pub fn new(year: i32, actual: &[f64], predicted: &[f64]) -> Self {
        Self {
            year,
            n_obs: actual.len(),
            oos_r2: r_squared(actual, predicted),
            rmse_bp: rmse(actual, predicted),
            corr: correlation(actual, predicted),
        }
    }
}

/// Holdout predictions of one fold.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldOutcome {
    pub year: i32,
    pub actual: Vec<f64>,
    pub predicted: Vec<f64>,
    pub coefficients: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub spec_name: String,
    pub market: Option<Market>,
    pub terms: Vec<String>,
    pub per_year: Vec<YearMetrics>,
    /// Training coefficients per fold, aligned with `per_year`.
    pub coefficients: Vec<Vec<f64>>,
    pub skipped_years: Vec<i32>,
    pub mean_r2: Option<f64>,
    pub median_r2: Option<f64>,
    /// Stacked holdout R², centered on the stacked-actual mean.
    pub pooled_r2: Option<f64>,
    pub mean_rmse_bp: f64,
    pub mean_corr: Option<f64>,
    pub years_positive: usize,
    pub n_obs: usize,
    /// Total sum of squares of the stacked holdout actuals.
    pub sst_all: f64,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

impl CvReport {
    pub fn from_folds(
        spec_name: &str,
        market: Option<Market>,
        terms: Vec<String>,
        folds: Vec<FoldOutcome>,
        skipped_years: Vec<i32>,
    ) -> Self {
        let per_year: Vec<YearMetrics> = folds
            .iter()
            .map(|f| YearMetrics::new(f.year, &f.actual, &f.predicted))
            .collect();
        let actual: Vec<f64> = folds.iter().flat_map(|f| f.actual.iter().copied()).collect();
        let predicted: Vec<f64> = folds.iter().flat_map(|f| f.predicted.iter().copied()).collect();
        let m = mean(&actual).unwrap_or(0.0);
        let sst_all = actual.iter().map(|a| (a - m).powi(2)).sum();
        let mut r2s: Vec<f64> = per_year.iter().filter_map(|y| y.oos_r2).collect();
        let corrs: Vec<f64> = per_year.iter().filter_map(|y| y.corr).collect();
        let rmses: Vec<f64> = per_year.iter().map(|y| y.rmse_bp).collect();
        Self {
            spec_name: spec_name.to_string(),
            market,
            terms,
            years_positive: r2s.iter().filter(|r| **r > 0.0).count(),
            mean_r2: mean(&r2s),
            median_r2: median(&mut r2s),
            pooled_r2: if actual.is_empty() { None } else { r_squared(&actual, &predicted) },
            mean_rmse_bp: mean(&rmses).unwrap_or(f64::NAN),
            mean_corr: mean(&corrs),
            n_obs: actual.len(),
            sst_all,
            coefficients: folds.into_iter().map(|f| f.coefficients).collect(),
            per_year,
            skipped_years,
        }
    }

    /// Pooled R² rebuilt from per-year sizes and RMSEs.
    pub fn pooled_from_years(&self) -> Option<f64> {
        let sse: f64 = self
            .per_year
            .iter()
            .map(|y| y.n_obs as f64 * y.rmse_bp * y.rmse_bp)
            .sum();
        (self.sst_all > 0.0).then(|| 1.0 - sse / self.sst_all)
    }
}

/// Calendar years with at least `min_rows` rows, ascending.
pub fn eligible_years(panel: &Panel, min_rows: usize) -> Vec<i32> {
    let mut counts: BTreeMap<i32, usize> = BTreeMap::new();
    for k in panel.keys() {
        *counts.entry(k.date.year()).or_default() += 1;
    }
    counts
        .into_iter()
        .filter(|(_, n)| *n >= min_rows)
        .map(|(y, _)| y)
        .collect()
}

pub fn split_year(panel: &Panel, year: i32) -> (Panel, Panel) {
    (
        panel.filter(|k, _| k.date.year() != year),
        panel.filter(|k, _| k.date.year() == year),
    )
}

/// Fits on `train` and predicts `test`.
pub fn evaluate_holdout(train: &Panel, test: &Panel, spec: &Specification) -> Result<(FitResult, Vec<f64>)> {
    let fit = ols_fit(train, spec)?;
    let pred = fit.predict(test)?;
    Ok((fit, pred))
}

fn single_market(panel: &Panel) -> Option<Market> {
    let m = panel.markets();
    (m.len() == 1).then(|| *m.iter().next().expect("one"))
}

/// Leave-one-year-out evaluation. `years` defaults to every year with at
/// least [`MIN_FOLD_ROWS`] rows.
pub fn loyo(panel: &Panel, spec: &Specification, years: Option<&[i32]>) -> Result<CvReport> {
    let years = match years {
        Some(y) => y.to_vec(),
        None => eligible_years(panel, MIN_FOLD_ROWS),
    };
    if years.len() < 2 {
        return Err(Error::InsufficientSample(format!(
            "{} eligible years for leave-one-year-out; need 2",
            years.len()
        )));
    }
    let outcomes = years
        .par_iter()
        .map(|&year| {
            let (train, test) = split_year(panel, year);
            if test.len() < MIN_HOLDOUT_ROWS {
                log::warn!("{}: holdout year {year} has {} rows, skipped", spec.name, test.len());
                return Ok(None);
            }
            let (fit, predicted) = evaluate_holdout(&train, &test, spec)?;
            Ok(Some(FoldOutcome {
                year,
                actual: test.target().to_vec(),
                predicted,
                coefficients: fit.coefficients,
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    let skipped = years
        .iter()
        .zip(&outcomes)
        .filter(|(_, o)| o.is_none())
        .map(|(y, _)| *y)
        .collect();
    Ok(CvReport::from_folds(
        &spec.name,
        single_market(panel),
        spec.terms(),
        outcomes.into_iter().flatten().collect(),
        skipped,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinComparison {
    pub bin: MaturityBin,
    pub n_obs: usize,
    pub r2_a: Option<f64>,
    pub r2_b: Option<f64>,
    pub rmse_a: f64,
    pub rmse_b: f64,
    pub mae_a: f64,
    pub mae_b: f64,
}

impl BinComparison {
    pub fn delta_r2(&self) -> Option<f64> {
        Some(self.r2_b? - self.r2_a?)
    }

    pub fn delta_rmse(&self) -> f64 {
        self.rmse_b - self.rmse_a
    }

    pub fn delta_mae(&self) -> f64 {
        self.mae_b - self.mae_a
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinReport {
    pub spec_a: String,
    pub spec_b: String,
    pub market: Option<Market>,
    pub rows: Vec<BinComparison>,
    /// Bins with fewer than two rows.
    pub omitted: Vec<MaturityBin>,
    /// Rows shorter than the one-month floor.
    pub below_floor: usize,
}

/// Full-sample fits of both specs, with metrics computed per maturity bin.
pub fn bin_fit_report(panel: &Panel, spec_a: &Specification, spec_b: &Specification) -> Result<BinReport> {
    let fa = ols_fit(panel, spec_a)?;
    let fb = ols_fit(panel, spec_b)?;
    let y = panel.target();
    let mut groups: BTreeMap<MaturityBin, Vec<usize>> = BTreeMap::new();
    let mut below_floor = 0;
    for (i, tau) in panel.taus().iter().enumerate() {
        match tau_bin(*tau) {
            Ok(b) => groups.entry(b).or_default().push(i),
            Err(_) => below_floor += 1,
        }
    }
    let mut rows = Vec::new();
    let mut omitted = Vec::new();
    for bin in MaturityBin::ALL {
        let idx = groups.remove(&bin).unwrap_or_default();
        if idx.len() < 2 {
            omitted.push(bin);
            continue;
        }
        let pick = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<f64>>();
        let (act, pa, pb) = (pick(y), pick(&fa.fitted), pick(&fb.fitted));
        rows.push(BinComparison {
            bin,
            n_obs: idx.len(),
            r2_a: r_squared(&act, &pa),
            r2_b: r_squared(&act, &pb),
            rmse_a: rmse(&act, &pa),
            rmse_b: rmse(&act, &pb),
            mae_a: mae(&act, &pa),
            mae_b: mae(&act, &pb),
        });
    }
    Ok(BinReport {
        spec_a: spec_a.name.clone(),
        spec_b: spec_b.name.clone(),
        market: single_market(panel),
        rows,
        omitted,
        below_floor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::RowKey;
    use crate::market_data::Date;

    /// Rows spread over `years`, two maturities per weekday.
    pub(crate) fn toy_panel(years: i32, noise: impl Fn(usize) -> f64) -> Panel {
        let mut keys = Vec::new();
        let mut taus = Vec::new();
        let mut d = Date::from_ymd(2016, 1, 4).unwrap();
        let end = Date::from_ymd(2016 + years, 1, 1).unwrap();
        while d < end {
            if d.weekday() < 5 {
                for (m, days) in [(0, 45), (1, 400)] {
                    keys.push(RowKey {
                        market: Market::Spx,
                        date: d,
                        expiry: d.add_days(days + m),
                    });
                    taus.push(days as f64 / 365.0);
                }
            }
            d = d.add_days(3);
        }
        let n = keys.len();
        let a: Vec<f64> = (0..n).map(|i| (i as f64 * 0.13).sin()).collect();
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.029).cos() + taus[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| 3.0 + 2.0 * a[i] - b[i] + noise(i)).collect();
        let mut p = Panel::new(keys, taus, y).unwrap();
        p.push_column("a", a).unwrap();
        p.push_column("b", b).unwrap();
        p
    }

    fn spec() -> Specification {
        Specification::new("ab", vec!["a".into(), "b".into()]).unwrap()
    }

    #[test]
    fn noiseless_loyo_is_perfect() {
        let p = toy_panel(4, |_| 0.0);
        let r = loyo(&p, &spec(), None).unwrap();
        assert_eq!(r.per_year.len(), 4);
        for y in &r.per_year {
            assert!((y.oos_r2.unwrap() - 1.0).abs() < 1e-10);
        }
        assert!((r.pooled_r2.unwrap() - 1.0).abs() < 1e-10);
        assert_eq!(r.years_positive, 4);
    }

    #[test]
    fn pooled_consistency_and_intercept_only() {
        let p = toy_panel(5, |i| ((i * 7919) % 101) as f64 / 10.0 - 5.0);
        let r = loyo(&p, &spec(), None).unwrap();
        assert!((r.pooled_r2.unwrap() - r.pooled_from_years().unwrap()).abs() < 1e-10);

        let c = loyo(&p, &Specification::new("c", vec![]).unwrap(), None).unwrap();
        assert!(c.per_year.iter().all(|y| y.oos_r2.unwrap() <= 0.0));
    }

    #[test]
    fn loyo_needs_two_years() {
        let p = toy_panel(1, |_| 0.0);
        assert!(loyo(&p, &spec(), None).is_err());
    }

    #[test]
    fn bins_perfect_fit() {
        let p = toy_panel(2, |_| 0.0);
        let only_a = Specification::new("a", vec!["a".into()]).unwrap();
        let r = bin_fit_report(&p, &only_a, &spec()).unwrap();
        let labels: Vec<_> = r.rows.iter().map(|b| b.bin.label()).collect();
        assert_eq!(labels, ["1–2m", "10–14m"]);
        for b in &r.rows {
            assert!((b.r2_b.unwrap() - 1.0).abs() < 1e-10);
            assert!(b.delta_rmse() < 0.0);
        }
        assert_eq!(r.omitted.len(), 6);
    }
}
