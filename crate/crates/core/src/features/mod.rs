//! Regressor construction: path-risk (GBM) terms, slopes, maturity bins,
//! daily aggregation and the regression panel.

mod panel;
mod slope;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

pub use panel::{
    assemble_panel, AlignmentConfig, AssemblyStats, AssetTerm, FeatureRow, Panel, PanelBuilder,
    PanelSource, RowKey,
};
pub use slope::{fx_neutralize, log_ols_slope, slope_series, SlopeSeries};

use crate::error::{Error, Result};
use crate::implied_discount::median;
use crate::market_data::{DailySeries, Market, SeriesUnit};
use crate::ois_curve::CarryObservation;

/// Expected time-averaged Brownian support per unit of annualised vol:
/// `(2/3) sqrt(2 tau / pi)`, multiplied through to basis points.
fn path_risk_bp(rate_like: f64, vol_pct: f64, tau: f64) -> f64 {
    1e4 * rate_like * (2.0 / 3.0) * (vol_pct / 100.0) * ((2.0 * tau) / PI).sqrt()
}

/// OIS-based path-risk term in bp: the par rate (percent) is the
/// opportunity-cost component.
pub fn gbm_ois_term(rate_pct: f64, vol_pct: f64, tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::InvalidInput(format!("tau must be positive, got {tau}")));
    }
    if !(vol_pct >= 0.0) {
        return Err(Error::InvalidInput(format!("volatility must be non-negative, got {vol_pct}")));
    }
    Ok(path_risk_bp(rate_pct / 100.0, vol_pct, tau))
}

/// Asset-based path-risk term in bp. The slope stays in daily log units.
pub fn gbm_asset_term(slope: f64, vol_pct: f64, tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::InvalidInput(format!("tau must be positive, got {tau}")));
    }
    Ok(path_risk_bp(slope, vol_pct, tau))
}

/// Maturity buckets used for the per-bin fit report; half-open in months.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MaturityBin {
    M1To2,
    M2To3,
    M3To5,
    M5To7,
    M7To10,
    M10To14,
    M14To21,
    M21Plus,
}

impl MaturityBin {
    pub const ALL: [MaturityBin; 8] = [
        MaturityBin::M1To2,
        MaturityBin::M2To3,
        MaturityBin::M3To5,
        MaturityBin::M5To7,
        MaturityBin::M7To10,
        MaturityBin::M10To14,
        MaturityBin::M14To21,
        MaturityBin::M21Plus,
    ];

    /// `[lower, upper)` in months.
    pub fn bounds(self) -> (f64, f64) {
        match self {
            MaturityBin::M1To2 => (1.0, 2.0),
            MaturityBin::M2To3 => (2.0, 3.0),
            MaturityBin::M3To5 => (3.0, 5.0),
            MaturityBin::M5To7 => (5.0, 7.0),
            MaturityBin::M7To10 => (7.0, 10.0),
            MaturityBin::M10To14 => (10.0, 14.0),
            MaturityBin::M14To21 => (14.0, 21.0),
            MaturityBin::M21Plus => (21.0, f64::INFINITY),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            MaturityBin::M1To2 => "1–2m",
            MaturityBin::M2To3 => "2–3m",
            MaturityBin::M3To5 => "3–5m",
            MaturityBin::M5To7 => "5–7m",
            MaturityBin::M7To10 => "7–10m",
            MaturityBin::M10To14 => "10–14m",
            MaturityBin::M14To21 => "14–21m",
            MaturityBin::M21Plus => "21m+",
        }
    }
}

impl fmt::Display for MaturityBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

pub fn tau_bin(tau: f64) -> Result<MaturityBin> {
    let months = tau * 12.0;
    MaturityBin::ALL
        .into_iter()
        .find(|b| {
            let (lo, hi) = b.bounds();
            months >= lo && months < hi
        })
        .ok_or_else(|| {
            Error::InvalidInput(format!("maturity {months:.3} months is below the 1-month floor"))
        })
}

/// Daily median carry gap across eligible maturities of one market.
pub fn aggregate_daily(observations: &[CarryObservation], market: Market) -> Result<DailySeries> {
    let mut by_date: BTreeMap<_, Vec<f64>> = BTreeMap::new();
    for o in observations.iter().filter(|o| o.market == market) {
        by_date.entry(o.date).or_default().push(o.cg_bp);
    }
    let (dates, values) = by_date
        .into_iter()
        .map(|(d, mut v)| (d, median(&mut v).expect("non-empty group")))
        .unzip();
    DailySeries::new(format!("cg_bp_{market}"), dates, values, SeriesUnit::IndexPoints)
}
