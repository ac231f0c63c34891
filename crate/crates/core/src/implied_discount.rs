//! Option-implied discount factors from the synthetic forward.
//!
//! Under parity `C - P = B (F - K)`, so the synthetic forward `G = C - P` is
//! a line in strike with slope `-B` and intercept `B F`. Fitting that line
//! across the cross-section of strikes jointly identifies `B` and `F`, and
//! the chosen `B` is exactly the one that makes `G / B + K` flat in strike.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::{OptionQuote, Right};

/// Upper bound on a plausible fitted discount factor.
pub const MAX_DISCOUNT: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParityPair {
    pub strike: f64,
    pub call_mid: f64,
    pub put_mid: f64,
    pub call_spread: f64,
    pub put_spread: f64,
    pub synthetic_forward: f64,
}

impl ParityPair {
    pub fn new(strike: f64, call_mid: f64, put_mid: f64, call_spread: f64, put_spread: f64) -> Self {
        Self {
            strike,
            call_mid,
            put_mid,
            call_spread,
            put_spread,
            synthetic_forward: call_mid - put_mid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CleaningConfig {
    pub min_strikes: usize,
    pub min_mid_price: f64,
    pub max_rel_spread: f64,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        Self {
            min_strikes: 5,
            min_mid_price: 0.05,
            max_rel_spread: 0.5,
        }
    }
}

impl CleaningConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_strikes < 3 {
            return Err(Error::Config(format!(
                "min_strikes must be at least 3, got {}",
                self.min_strikes
            )));
        }
        if !(self.max_rel_spread > 0.0 && self.max_rel_spread <= 1.0) {
            return Err(Error::Config(format!(
                "max_rel_spread must lie in (0, 1], got {}",
                self.max_rel_spread
            )));
        }
        if !(self.min_mid_price >= 0.0) {
            return Err(Error::Config("min_mid_price must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentificationResult {
    pub b_hat: f64,
    pub f_hat: f64,
    pub n_strikes: usize,
    /// RMSE of the strike-recovered forward around `f_hat`, in price units.
    pub flatness_rmse: f64,
    pub ba_med_atm: f64,
    /// Classical OLS standard error of the fitted slope.
    pub b_se: f64,
}

/// Pairs calls and puts sharing a strike. Returns the pairs sorted by strike
/// together with the number of strikes that had only one side.
pub fn build_pairs(quotes: &[OptionQuote]) -> (Vec<ParityPair>, usize) {
    let mut sides: BTreeMap<u64, (Option<&OptionQuote>, Option<&OptionQuote>)> = BTreeMap::new();
    for q in quotes {
        // Strikes are positive, so the IEEE bit pattern orders like the value.
        let e = sides.entry(q.strike.to_bits()).or_default();
        match q.right {
            Right::Call => e.0 = Some(q),
            Right::Put => e.1 = Some(q),
        }
    }
    let mut unmatched = 0;
    let mut pairs = Vec::with_capacity(sides.len());
    for (_, side) in sides {
        match side {
            (Some(c), Some(p)) => pairs.push(ParityPair::new(c.strike, c.mid(), p.mid(), c.spread(), p.spread())),
            _ => unmatched += 1,
        }
    }
    (pairs, unmatched)
}

/// Drops illiquid pairs; returns nothing if fewer than `min_strikes` survive.
pub fn clean_pairs(pairs: &[ParityPair], cfg: &CleaningConfig) -> Vec<ParityPair> {
    let kept: Vec<ParityPair> = pairs
        .iter()
        .filter(|p| {
            let low = p.call_mid.min(p.put_mid);
            low >= cfg.min_mid_price
                && p.call_spread <= cfg.max_rel_spread * p.call_mid
                && p.put_spread <= cfg.max_rel_spread * p.put_mid
        })
        .copied()
        .collect();
    if kept.len() < cfg.min_strikes {
        Vec::new()
    } else {
        kept
    }
}

/// Least-squares line `G = a + b K`; returns `B = -b`, `F = a / B`.
///
/// The median ATM spread is left at zero; see [`median_atm_spread`].
pub fn identify_discount(pairs: &[ParityPair]) -> Result<IdentificationResult> {
    let n = pairs.len();
    if n < 2 {
        return Err(Error::DegenerateStrikes(format!("{n} pair(s)")));
    }
    let nf = n as f64;
    let k_mean = pairs.iter().map(|p| p.strike).sum::<f64>() / nf;
    let g_mean = pairs.iter().map(|p| p.synthetic_forward).sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for p in pairs {
        let dk = p.strike - k_mean;
        sxx += dk * dk;
        sxy += dk * (p.synthetic_forward - g_mean);
    }
    if !(sxx > f64::EPSILON * k_mean.abs().max(1.0).powi(2) * nf) {
        return Err(Error::DegenerateStrikes("strikes have zero variance".into()));
    }
    let slope = sxy / sxx;
    let b_hat = -slope;
    if !(b_hat > 0.0 && b_hat < MAX_DISCOUNT) {
        return Err(Error::ArbitrageViolation { b_hat });
    }
    let intercept = g_mean - slope * k_mean;
    let f_hat = intercept / b_hat;

    let mut ssr = 0.0;
    let mut flat = 0.0;
    for p in pairs {
        let resid = p.synthetic_forward - intercept - slope * p.strike;
        ssr += resid * resid;
        let dev = p.synthetic_forward / b_hat + p.strike - f_hat;
        flat += dev * dev;
    }
    let b_se = if n > 2 { (ssr / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(IdentificationResult {
        b_hat,
        f_hat,
        n_strikes: n,
        flatness_rmse: (flat / nf).sqrt(),
        ba_med_atm: 0.0,
        b_se,
    })
}

pub(crate) fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

/// Median call and put spread over pairs within `atm_band` moneyness of
/// `f_hat`, falling back to the single pair nearest the forward.
pub fn median_atm_spread(pairs: &[ParityPair], f_hat: f64, atm_band: f64) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::InvalidInput("no pairs for ATM spread".into()));
    }
    if !(f_hat > 0.0) {
        return Err(Error::InvalidInput(format!("forward must be positive, got {f_hat}")));
    }
    let mut spreads: Vec<f64> = pairs
        .iter()
        .filter(|p| (p.strike / f_hat - 1.0).abs() <= atm_band)
        .flat_map(|p| [p.call_spread, p.put_spread])
        .collect();
    if spreads.is_empty() {
        let nearest = pairs
            .iter()
            .min_by(|a, b| {
                (a.strike - f_hat)
                    .abs()
                    .total_cmp(&(b.strike - f_hat).abs())
            })
            .expect("non-empty");
        spreads = vec![nearest.call_spread, nearest.put_spread];
    }
    Ok(median(&mut spreads).expect("non-empty"))
}
