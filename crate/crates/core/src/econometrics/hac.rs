use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::ols::{bread, scaled_qr};
use crate::error::{Error, Result};
use crate::market_data::Date;

pub const DEFAULT_HAC_LAG: usize = 21;

/// How rows are grouped into kernel periods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HacMode {
    /// Scores are summed within each date; the kernel runs over dates.
    #[default]
    DateCluster,
    /// Every row is its own period, ordered by date (stable within a date).
    RowOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HacConfig {
    pub lag: usize,
    pub mode: HacMode,
}

impl Default for HacConfig {
    fn default() -> Self {
        Self {
            lag: DEFAULT_HAC_LAG,
            mode: HacMode::DateCluster,
        }
    }
}

pub fn bartlett(l: usize, lag: usize) -> f64 {
    1.0 - l as f64 / (lag as f64 + 1.0)
}

/// Per-period score sums `s_t = sum x_r e_r`, in period order.
pub(crate) fn period_scores(
    x: &DMatrix<f64>,
    residuals: &[f64],
    dates: &[Date],
    mode: HacMode,
) -> Vec<Vec<f64>> {
    let p = x.ncols();
    let score = |r: usize| (0..p).map(|j| x[(r, j)] * residuals[r]).collect::<Vec<f64>>();
    match mode {
        HacMode::DateCluster => {
            let mut by_date: BTreeMap<Date, Vec<f64>> = BTreeMap::new();
            for r in 0..x.nrows() {
                let acc = by_date.entry(dates[r]).or_insert_with(|| vec![0.0; p]);
                for j in 0..p {
                    acc[j] += x[(r, j)] * residuals[r];
                }
            }
            by_date.into_values().collect()
        }
        HacMode::RowOrder => {
            let mut idx: Vec<usize> = (0..x.nrows()).collect();
            idx.sort_by_key(|&r| dates[r]);
            idx.into_iter().map(score).collect()
        }
    }
}

fn check_inputs(x: &DMatrix<f64>, residuals: &[f64], dates: &[Date]) -> Result<()> {
    if residuals.len() != x.nrows() || dates.len() != x.nrows() {
        return Err(Error::InvalidInput("design, residual and date lengths differ".into()));
    }
    Ok(())
}

pub(crate) fn check_periods(periods: usize, lag: usize) -> Result<()> {
    if periods < lag + 2 {
        return Err(Error::InsufficientSample(format!(
            "{periods} distinct periods for HAC lag {lag}; need at least {}",
            lag + 2
        )));
    }
    Ok(())
}

/// Newey-West long-run score covariance with Bartlett weights.
pub(crate) fn meat(scores: &[Vec<f64>], lag: usize) -> DMatrix<f64> {
    let p = scores.first().map_or(0, Vec::len);
    let mut m = DMatrix::zeros(p, p);
    for s in scores {
        for i in 0..p {
            for j in 0..p {
                m[(i, j)] += s[i] * s[j];
            }
        }
    }
    for l in 1..=lag.min(scores.len().saturating_sub(1)) {
        let w = bartlett(l, lag);
        let mut g = DMatrix::zeros(p, p);
        for t in l..scores.len() {
            let (a, b) = (&scores[t], &scores[t - l]);
            for i in 0..p {
                for j in 0..p {
                    g[(i, j)] += a[i] * b[j];
                }
            }
        }
        m += (&g + g.transpose()) * w;
    }
    m
}

/// HAC covariance of the OLS coefficients.
pub fn hac_cov(
    x: &DMatrix<f64>,
    residuals: &[f64],
    dates: &[Date],
    cfg: &HacConfig,
) -> Result<DMatrix<f64>> {
    check_inputs(x, residuals, dates)?;
    let names: Vec<String> = (0..x.ncols()).map(|j| format!("column {j}")).collect();
    let (_, r, scales, _) = scaled_qr(x, &names)?;
    hac_cov_with_bread(x, residuals, dates, cfg, &bread(&r, &scales)?)
}

pub(crate) fn hac_cov_with_bread(
    x: &DMatrix<f64>,
    residuals: &[f64],
    dates: &[Date],
    cfg: &HacConfig,
    xtx_inv: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    check_inputs(x, residuals, dates)?;
    let scores = period_scores(x, residuals, dates, cfg.mode);
    check_periods(scores.len(), cfg.lag)?;
    let m = meat(&scores, cfg.lag);
    Ok(xtx_inv * m * xtx_inv)
}

/// Standard errors: square roots of the HAC covariance diagonal.
pub fn hac_se(x: &DMatrix<f64>, residuals: &[f64], dates: &[Date], cfg: &HacConfig) -> Result<Vec<f64>> {
    let cov = hac_cov(x, residuals, dates, cfg)?;
    Ok((0..cov.nrows()).map(|i| cov[(i, i)].max(0.0).sqrt()).collect())
}
