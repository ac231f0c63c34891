//! Look-ahead-free rolling log-price OLS slopes.

use crate::error::{Error, Result};
use crate::market_data::{align_forward_fill, DailySeries, Date, SeriesUnit, TradingCalendar};

/// Slope of `ln P` regressed on a forward time index over `logp`.
/// Positive when prices trend up.
pub(crate) fn ols_slope(logp: &[f64]) -> f64 {
    let n = logp.len();
    let nf = n as f64;
    let x_mean = (nf - 1.0) / 2.0;
    let anchor = logp[n - 1];
    let mut sxy = 0.0;
    for (j, y) in logp.iter().enumerate() {
        sxy += (j as f64 - x_mean) * (y - anchor);
    }
    let sxx = nf * (nf * nf - 1.0) / 12.0;
    sxy / sxx
}

fn log_prices(prices: &DailySeries) -> Result<Vec<f64>> {
    prices
        .iter()
        .map(|(d, p)| {
            if p > 0.0 {
                Ok(p.ln())
            } else {
                Err(Error::InvalidInput(format!(
                    "series `{}`: non-positive price {p} on {d}",
                    prices.name()
                )))
            }
        })
        .collect()
}

/// Slope at date `t` using the `n` most recent observations strictly before
/// `t` on the series' own calendar.
pub fn log_ols_slope(prices: &DailySeries, t: Date, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("slope window must be at least 2, got {n}")));
    }
    let have = prices.dates().partition_point(|d| *d < t);
    if have < n {
        return Err(Error::InsufficientHistory {
            needed: n,
            have,
            date: t,
        });
    }
    let logp = log_prices(prices)?;
    Ok(ols_slope(&logp[have - n..have]))
}

/// Rolling slopes for one asset and window.
///
/// `slopes[i]` belongs to `dates[i]` and uses only prices dated before it.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeSeries {
    pub asset: String,
    pub window: usize,
    pub dates: Vec<Date>,
    pub slopes: Vec<f64>,
    /// Date of the `window`-th price observation; any date after it has a
    /// full window behind it.
    history_end: Option<Date>,
}

impl SlopeSeries {
    /// Slope valid on an arbitrary date `t`, which need not be a trading day
    /// of the asset.
    pub fn at(&self, t: Date) -> Option<f64> {
        if t <= self.history_end? {
            return None;
        }
        let i = self.dates.partition_point(|d| *d < t);
        self.slopes.get(i).copied()
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn to_series(&self) -> Result<DailySeries> {
        DailySeries::new(
            format!("{}_{}", self.asset, self.window),
            self.dates.clone(),
            self.slopes.clone(),
            SeriesUnit::IndexLevel,
        )
    }
}

pub fn slope_series(prices: &DailySeries, n: usize) -> Result<SlopeSeries> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("slope window must be at least 2, got {n}")));
    }
    let logp = log_prices(prices)?;
    let dates = prices.dates();
    let (out_dates, slopes) = if logp.len() > n {
        (n..logp.len())
            .map(|p| (dates[p], ols_slope(&logp[p - n..p])))
            .unzip()
    } else {
        (Vec::new(), Vec::new())
    };
    Ok(SlopeSeries {
        asset: prices.name().to_string(),
        window: n,
        dates: out_dates,
        slopes,
        history_end: dates.get(n.wrapping_sub(1)).copied(),
    })
}

/// Divides prices by the broad-dollar index, forward-filled onto the
/// asset's own calendar.
pub fn fx_neutralize(prices: &DailySeries, dollar_index: &DailySeries) -> Result<DailySeries> {
    if let Some((d, v)) = dollar_index.iter().find(|(_, v)| *v <= 0.0) {
        return Err(Error::InvalidInput(format!(
            "dollar index `{}` non-positive ({v}) on {d}",
            dollar_index.name()
        )));
    }
    let calendar = TradingCalendar::new(prices.dates().iter().copied());
    let filled = align_forward_fill(dollar_index, &calendar)?;
    let values = prices
        .values()
        .iter()
        .zip(filled.values())
        .map(|(p, x)| p / x)
        .collect();
    DailySeries::new(prices.name(), prices.dates().to_vec(), values, prices.unit())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weekdays(n: usize) -> Vec<Date> {
        let mut d: Date = "2019-01-01".parse().unwrap();
        let mut out = Vec::new();
        while out.len() < n {
            if d.weekday() < 5 {
                out.push(d);
            }
            d = d.add_days(1);
        }
        out
    }

    fn series(values: Vec<f64>) -> DailySeries {
        DailySeries::new("x", weekdays(values.len()), values, SeriesUnit::PriceLevel).unwrap()
    }

    #[test]
    fn exponential_prices_have_exact_slope() {
        let s = series((0..50).map(|j| (0.001 * j as f64).exp()).collect());
        let t = s.dates()[49];
        for n in [2, 5, 20, 49] {
            let b = log_ols_slope(&s, t, n).unwrap();
            assert!((b - 0.001).abs() < 1e-15, "n={n} slope={b}");
        }
    }

    #[test]
    fn constant_prices_have_zero_slope() {
        let s = series(vec![42.0; 30]);
        assert_eq!(log_ols_slope(&s, s.dates()[29], 10).unwrap(), 0.0);
    }

    #[test]
    fn insufficient_history() {
        let s = series(vec![1.0; 10]);
        assert!(matches!(
            log_ols_slope(&s, s.dates()[5], 6),
            Err(Error::InsufficientHistory { have: 5, .. })
        ));
        assert!(log_ols_slope(&s, s.dates()[6], 6).is_ok());
    }

    #[test]
    fn series_matches_pointwise_slopes() {
        let s = series((0..40).map(|j| 100.0 + (j as f64 * 0.7).sin()).collect());
        let ss = slope_series(&s, 7).unwrap();
        assert_eq!(ss.len(), 33);
        for (d, b) in ss.dates.iter().zip(&ss.slopes) {
            assert_eq!(*b, log_ols_slope(&s, *d, 7).unwrap());
        }
        // A date between trading days uses the same window as the next one.
        let sat = s.dates()[10].add_days(1);
        let probe = if sat.weekday() >= 5 { sat } else { s.dates()[10] };
        assert_eq!(ss.at(probe), Some(log_ols_slope(&s, probe, 7).unwrap()));
        assert_eq!(ss.at(s.dates()[6]), None);
        assert!(ss.at(s.dates()[7]).is_some());
    }

    #[test]
    fn fx_neutralize_identity_and_ratio() {
        let p = series(vec![10.0, 11.0, 12.0, 13.0]);
        let one = series(vec![1.0; 4]);
        assert_eq!(fx_neutralize(&p, &one).unwrap(), p);

        let same = fx_neutralize(&p, &p).unwrap();
        assert!(same.values().iter().all(|v| *v == 1.0));
        assert_eq!(log_ols_slope(&same, same.dates()[3].add_days(1), 3).unwrap(), 0.0);

        // Index with a gap on the third date.
        let d = p.dates();
        let idx = DailySeries::new(
            "dxy",
            vec![d[0], d[1], d[3]],
            vec![2.0, 4.0, 5.0],
            SeriesUnit::IndexLevel,
        )
        .unwrap();
        let out = fx_neutralize(&p, &idx).unwrap();
        assert_eq!(out.values(), &[10.0 / 2.0, 11.0 / 4.0, 12.0 / 4.0, 13.0 / 5.0]);

        let bad = DailySeries::new("dxy", vec![d[0]], vec![0.0], SeriesUnit::IndexLevel).unwrap();
        assert!(fx_neutralize(&p, &bad).is_err());
    }
}
