//! OLS with HAC inference, fit metrics, PCA and residualization.

mod hac;
mod ols;
mod pca;

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use hac::{bartlett, hac_cov, hac_se, HacConfig, HacMode, DEFAULT_HAC_LAG};
pub use ols::MAX_CONDITION;
pub use pca::{align_common, pca_slopes, residualize, rotate_regressor_block, PcaResult};

use crate::error::{Error, Result};
use crate::features::{AssetTerm, Panel};
use crate::market_data::Market;

pub const INTERCEPT: &str = "const";

/// An ordered regressor list; the intercept is always included.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Specification {
    pub name: String,
    pub regressors: Vec<String>,
}

impl Specification {
    pub fn new(name: impl Into<String>, regressors: Vec<String>) -> Result<Self> {
        let spec = Self {
            name: name.into(),
            regressors,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for r in &self.regressors {
            if r == INTERCEPT || !seen.insert(r) {
                return Err(Error::Config(format!(
                    "spec `{}`: duplicate regressor `{r}`",
                    self.name
                )));
            }
        }
        Ok(())
    }

    /// OIS 1Y and 10Y path-risk terms, BA/tau and NFCI.
    pub fn baseline() -> Self {
        Self {
            name: "baseline".into(),
            regressors: ["gbm_ois_1y", "gbm_ois_10y", "ba_over_tau", "nfci"]
                .map(String::from)
                .to_vec(),
        }
    }

    /// OIS 1Y plus one path-risk term per asset, BA/tau and NFCI.
    pub fn with_assets(name: impl Into<String>, terms: &[AssetTerm]) -> Self {
        let mut regressors = vec!["gbm_ois_1y".to_string()];
        regressors.extend(terms.iter().map(AssetTerm::column_name));
        regressors.extend(["ba_over_tau".to_string(), "nfci".to_string()]);
        Self {
            name: name.into(),
            regressors,
        }
    }

    pub fn main3etf_terms() -> Vec<AssetTerm> {
        vec![
            AssetTerm::new("IEFA", 70),
            AssetTerm::new("IGOV", 441),
            AssetTerm::new("IAU", 315),
        ]
    }

    pub fn main3etf() -> Self {
        Self::with_assets("main3etf", &Self::main3etf_terms())
    }

    /// This spec with one extra regressor appended.
    pub fn plus(&self, name: impl Into<String>, column: &str) -> Self {
        let mut regressors = self.regressors.clone();
        regressors.push(column.to_string());
        Self {
            name: name.into(),
            regressors,
        }
    }

    /// Replaces the `block` columns (at the position of the first one) with `with`.
    pub fn replace_block(&self, name: impl Into<String>, block: &[String], with: &[String]) -> Result<Self> {
        let pos = self
            .regressors
            .iter()
            .position(|r| block.contains(r))
            .ok_or_else(|| Error::MissingColumn(block.join(",")))?;
        for b in block {
            if !self.regressors.contains(b) {
                return Err(Error::MissingColumn(b.clone()));
            }
        }
        let mut regressors: Vec<String> = self
            .regressors
            .iter()
            .filter(|r| !block.contains(r))
            .cloned()
            .collect();
        for (k, w) in with.iter().enumerate() {
            regressors.insert(pos + k, w.clone());
        }
        Specification::new(name, regressors)
    }

    /// Intercept followed by the regressors.
    pub fn terms(&self) -> Vec<String> {
        std::iter::once(INTERCEPT.to_string())
            .chain(self.regressors.iter().cloned())
            .collect()
    }
}

/// Design matrix with a leading intercept column.
pub fn design(panel: &Panel, regressors: &[String]) -> Result<DMatrix<f64>> {
    let cols = regressors
        .iter()
        .map(|r| panel.column(r))
        .collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_fn(panel.len(), cols.len() + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            cols[j - 1][i]
        }
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub spec_name: String,
    pub market: Option<Market>,
    pub terms: Vec<String>,
    pub coefficients: Vec<f64>,
    pub hac_se: Option<Vec<f64>>,
    pub n_obs: usize,
    pub n_dates: usize,
    pub r2: f64,
    pub adj_r2: f64,
    pub rmse_bp: f64,
    pub mae_bp: f64,
    pub condition: f64,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
}

impl FitResult {
    fn index(&self, term: &str) -> Option<usize> {
        self.terms.iter().position(|t| t == term)
    }

    pub fn coef(&self, term: &str) -> Option<f64> {
        self.index(term).map(|i| self.coefficients[i])
    }

    pub fn se(&self, term: &str) -> Option<f64> {
        let i = self.index(term)?;
        self.hac_se.as_ref().map(|s| s[i])
    }

    pub fn regressors(&self) -> &[String] {
        &self.terms[1..]
    }

    pub fn predict(&self, panel: &Panel) -> Result<Vec<f64>> {
        let x = design(panel, self.regressors())?;
        Ok((0..x.nrows())
            .map(|i| {
                self.coefficients
                    .iter()
                    .enumerate()
                    .map(|(j, b)| x[(i, j)] * b)
                    .sum()
            })
            .collect())
    }
}

/// `1 - SSE/SST` with SST about the mean of `actual`; `None` when SST is 0.
pub fn r_squared(actual: &[f64], predicted: &[f64]) -> Option<f64> {
    let n = actual.len() as f64;
    let mean = actual.iter().sum::<f64>() / n;
    let sst: f64 = actual.iter().map(|a| (a - mean).powi(2)).sum();
    let sse: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p).powi(2)).sum();
    (sst > 0.0).then(|| 1.0 - sse / sst)
}

pub fn rmse(actual: &[f64], predicted: &[f64]) -> f64 {
    let sse: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p).powi(2)).sum();
    (sse / actual.len() as f64).sqrt()
}

pub fn mae(actual: &[f64], predicted: &[f64]) -> f64 {
    actual.iter().zip(predicted).map(|(a, p)| (a - p).abs()).sum::<f64>() / actual.len() as f64
}

/// Pearson correlation; `None` if either side is constant.
pub fn correlation(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    (saa > 0.0 && sbb > 0.0).then(|| sab / (saa * sbb).sqrt())
}

/// Two-sided significance stars from normal critical values (1/5/10%).
pub fn stars(coef: f64, se: f64) -> &'static str {
    let z = (coef / se).abs();
    if !z.is_finite() {
        ""
    } else if z >= 2.5758 {
        "***"
    } else if z >= 1.9600 {
        "**"
    } else if z >= 1.6449 {
        "*"
    } else {
        ""
    }
}

fn fit_inner(panel: &Panel, spec: &Specification) -> Result<(FitResult, DMatrix<f64>, DMatrix<f64>)> {
    spec.validate()?;
    let n = panel.len();
    let k = spec.regressors.len();
    if n <= k + 1 {
        return Err(Error::InsufficientSample(format!(
            "spec `{}`: {n} rows for {k} regressors",
            spec.name
        )));
    }
    let x = design(panel, &spec.regressors)?;
    let terms = spec.terms();
    let y = panel.target();
    let ls = ols::least_squares(&x, y, &terms)?;
    let r2 = r_squared(y, &ls.fitted).ok_or_else(|| {
        Error::InsufficientSample(format!("spec `{}`: target has zero variance", spec.name))
    })?;
    let markets = panel.markets();
    let fit = FitResult {
        spec_name: spec.name.clone(),
        market: (markets.len() == 1).then(|| *markets.iter().next().expect("one")),
        terms,
        coefficients: ls.beta,
        hac_se: None,
        n_obs: n,
        n_dates: panel.n_dates(),
        r2,
        adj_r2: 1.0 - (1.0 - r2) * (n as f64 - 1.0) / (n as f64 - k as f64 - 1.0),
        rmse_bp: rmse(y, &ls.fitted),
        mae_bp: mae(y, &ls.fitted),
        condition: ls.condition,
        fitted: ls.fitted,
        residuals: ls.residuals,
    };
    Ok((fit, x, ls.xtx_inv))
}

/// Least-squares fit without standard errors.
pub fn ols_fit(panel: &Panel, spec: &Specification) -> Result<FitResult> {
    fit_inner(panel, spec).map(|(f, _, _)| f)
}

/// Least-squares fit with date-based HAC standard errors.
pub fn fit_with_hac(panel: &Panel, spec: &Specification, hac: &HacConfig) -> Result<FitResult> {
    let (mut fit, x, xtx_inv) = fit_inner(panel, spec)?;
    let cov = hac::hac_cov_with_bread(&x, &fit.residuals, &panel.dates(), hac, &xtx_inv)?;
    fit.hac_se = Some((0..cov.nrows()).map(|i| cov[(i, i)].max(0.0).sqrt()).collect());
    Ok(fit)
}
