//! OIS discount-curve bootstrap, log-linear interpolation and the carry gap.
//!
//! Conventions: tenors are ACT/365 year fractions; tenors up to one year are
//! single-payment instruments, longer tenors pay an annual fixed leg whose
//! schedule is rolled back from maturity in whole years (a short front stub
//! when the tenor is fractional).

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::implied_discount::IdentificationResult;
use crate::market_data::{check_header, reader, Date, Market};

pub const OIS_HEADER: [&str; 3] = ["date", "tenor_years", "par_rate_pct"];
pub const CURVE_HEADER: [&str; 4] = ["date", "tau", "df", "zero_rate_pct"];

const SINGLE_PAYMENT_MAX: f64 = 1.0 + 1e-12;
const MAX_DF: f64 = 1.1;

/// Par rates for one date, in percent per annum.
#[derive(Debug, Clone, PartialEq)]
pub struct OisQuoteSet {
    pub date: Date,
    pub tenors: Vec<f64>,
    pub par_rates: Vec<f64>,
}

impl OisQuoteSet {
    pub fn new(date: Date, tenors: Vec<f64>, par_rates: Vec<f64>) -> Result<Self> {
        if tenors.len() != par_rates.len() || tenors.is_empty() {
            return Err(Error::InvalidInput(format!(
                "OIS quotes on {date}: {} tenors, {} rates",
                tenors.len(),
                par_rates.len()
            )));
        }
        Ok(Self {
            date,
            tenors,
            par_rates,
        })
    }

    /// Par rate quoted at exactly `tenor` years, if present.
    pub fn par_rate(&self, tenor: f64) -> Option<f64> {
        self.tenors
            .iter()
            .position(|t| (t - tenor).abs() < 1e-9)
            .map(|i| self.par_rates[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscountCurve {
    pub date: Date,
    pub pillar_taus: Vec<f64>,
    pub pillar_dfs: Vec<f64>,
}

/// Log-linear interpolation on `(0, 1)` followed by the given pillars.
/// `tau` must lie in `(0, last pillar]`.
fn log_linear(taus: &[f64], dfs: &[f64], tau: f64) -> f64 {
    let i = taus.partition_point(|t| *t < tau);
    if i < taus.len() && taus[i] == tau {
        return dfs[i];
    }
    let (t0, l0) = if i == 0 { (0.0, 0.0) } else { (taus[i - 1], dfs[i - 1].ln()) };
    let (t1, l1) = (taus[i], dfs[i].ln());
    let w = (tau - t0) / (t1 - t0);
    (l0 + w * (l1 - l0)).exp()
}

impl DiscountCurve {
    pub fn last_tau(&self) -> f64 {
        *self.pillar_taus.last().expect("curve has pillars")
    }

    /// Maturity-matched discount factor.
    pub fn discount_at(&self, tau: f64) -> Result<f64> {
        discount_at(self, tau)
    }

    pub fn zero_rate_pct(&self, tau: f64) -> Result<f64> {
        Ok(-self.discount_at(tau)?.ln() / tau * 100.0)
    }
}

pub fn discount_at(curve: &DiscountCurve, tau: f64) -> Result<f64> {
    let last = curve.last_tau();
    if !(tau > 0.0) || tau > last {
        return Err(Error::OutsideCurve { tau, last });
    }
    Ok(log_linear(&curve.pillar_taus, &curve.pillar_dfs, tau))
}

/// Fixed-leg payment times for an annual leg maturing at `tau`.
fn annual_schedule(tau: f64) -> Vec<f64> {
    let mut times: Vec<f64> = (0..)
        .map(|m| tau - m as f64)
        .take_while(|t| *t > 1e-9)
        .collect();
    times.reverse();
    times
}

pub fn bootstrap(quotes: &OisQuoteSet) -> Result<DiscountCurve> {
    let date = quotes.date;
    let fail = |msg: String| Error::Bootstrap(format!("{date}: {msg}"));
    if quotes.tenors.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(fail("tenors not strictly increasing".into()));
    }
    if !(quotes.tenors[0] > 0.0) {
        return Err(fail("tenors must be positive".into()));
    }
    if quotes.tenors[0] > SINGLE_PAYMENT_MAX {
        return Err(fail("no pillar at or below one year".into()));
    }
    if let Some(r) = quotes.par_rates.iter().find(|r| !r.is_finite()) {
        return Err(fail(format!("non-finite par rate {r}")));
    }

    let mut taus: Vec<f64> = Vec::with_capacity(quotes.tenors.len());
    let mut dfs: Vec<f64> = Vec::with_capacity(quotes.tenors.len());
    for (&tau, &rate_pct) in quotes.tenors.iter().zip(&quotes.par_rates) {
        let r = rate_pct / 100.0;
        let df = if tau <= SINGLE_PAYMENT_MAX {
            let denom = 1.0 + r * tau;
            if denom <= 0.0 {
                return Err(fail(format!("rate {rate_pct}% at {tau}y gives non-positive denominator")));
            }
            1.0 / denom
        } else {
            solve_swap_pillar(&taus, &dfs, tau, r).map_err(fail)?
        };
        if !(df > 0.0 && df.is_finite()) {
            return Err(fail(format!("non-positive discount factor at {tau}y")));
        }
        taus.push(tau);
        dfs.push(df);
    }
    if dfs[0] > MAX_DF {
        return Err(fail(format!("first discount factor {} above {MAX_DF}", dfs[0])));
    }
    Ok(DiscountCurve {
        date,
        pillar_taus: taus,
        pillar_dfs: dfs,
    })
}

/// Solves the par condition of an annual-fixed swap for its final discount
/// factor. Coupon dates beyond the last known pillar are interpolated towards
/// the unknown final pillar, so the solve is a fixed-point iteration; with
/// `|r| < 1` the map is a contraction.
fn solve_swap_pillar(
    taus: &[f64],
    dfs: &[f64],
    tau: f64,
    r: f64,
) -> std::result::Result<f64, String> {
    let schedule = annual_schedule(tau);
    let n = schedule.len();
    let accrual = |i: usize| schedule[i] - if i == 0 { 0.0 } else { schedule[i - 1] };
    let alpha_n = accrual(n - 1);
    let denom = 1.0 + r * alpha_n;
    if denom <= 0.0 {
        return Err(format!("rate {}% at {tau}y gives non-positive denominator", r * 100.0));
    }

    let mut ext_taus = taus.to_vec();
    ext_taus.push(tau);
    let mut ext_dfs = dfs.to_vec();
    let mut d_n = *dfs.last().ok_or("no short pillar")?;
    ext_dfs.push(d_n);
    for _ in 0..200 {
        *ext_dfs.last_mut().expect("pushed") = d_n;
        let annuity: f64 = (0..n - 1)
            .map(|i| accrual(i) * log_linear(&ext_taus, &ext_dfs, schedule[i]))
            .sum();
        let next = (1.0 - r * annuity) / denom;
        if !(next > 0.0) {
            return Err(format!("non-positive discount factor at {tau}y"));
        }
        let done = (next - d_n).abs() <= 2.0 * f64::EPSILON * next;
        d_n = next;
        if done {
            return Ok(d_n);
        }
    }
    Err(format!("swap pillar {tau}y did not converge"))
}

/// One identified (market, date, expiry) carry-gap record.
#[derive(Debug, Clone, PartialEq)]
pub struct CarryObservation {
    pub market: Market,
    pub date: Date,
    pub expiry: Date,
    pub tau: f64,
    pub identification: IdentificationResult,
    pub d_ois: f64,
    pub cg_bp: f64,
}

/// ACT/365 year fraction between two dates.
pub fn year_fraction(start: Date, end: Date) -> f64 {
    start.days_until(end) as f64 / 365.0
}

/// Annualised log wedge between OIS and option-implied discounting, in bp.
pub fn carry_gap_bp(d_ois: f64, b_hat: f64, tau: f64) -> Result<f64> {
    if !(d_ois > 0.0 && b_hat > 0.0 && tau > 0.0) {
        return Err(Error::InvalidInput(format!(
            "carry gap needs positive inputs (d_ois={d_ois}, b_hat={b_hat}, tau={tau})"
        )));
    }
    Ok(1e4 * (d_ois.ln() - b_hat.ln()) / tau)
}

/// Reads the long-format OIS file (`date,tenor_years,par_rate_pct`) into one
/// quote set per date, dates ascending and tenors sorted.
pub fn load_ois(path: impl AsRef<Path>) -> Result<Vec<OisQuoteSet>> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &OIS_HEADER)?;
    let mut by_date: BTreeMap<Date, BTreeMap<u64, f64>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let row_err = |message: String| Error::Row {
            path: path.to_path_buf(),
            line,
            message,
        };
        if rec.len() != 3 {
            return Err(row_err(format!("expected 3 fields, found {}", rec.len())));
        }
        let date: Date = rec[0].parse().map_err(|e: Error| row_err(e.to_string()))?;
        let tenor: f64 = rec[1]
            .parse()
            .map_err(|_| row_err(format!("bad tenor `{}`", &rec[1])))?;
        let rate: f64 = rec[2]
            .parse()
            .map_err(|_| row_err(format!("bad rate `{}`", &rec[2])))?;
        if !(tenor > 0.0 && tenor.is_finite()) {
            return Err(row_err(format!("tenor must be positive, got {tenor}")));
        }
        if !rate.is_finite() {
            return Err(row_err("non-finite rate".into()));
        }
        if by_date.entry(date).or_default().insert(tenor.to_bits(), rate).is_some() {
            return Err(row_err(format!("duplicate tenor {tenor} on {date}")));
        }
    }
    if by_date.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    by_date
        .into_iter()
        .map(|(date, m)| {
            let (tenors, rates): (Vec<f64>, Vec<f64>) =
                m.into_iter().map(|(t, r)| (f64::from_bits(t), r)).unzip();
            OisQuoteSet::new(date, tenors, rates)
        })
        .collect()
}

pub fn write_ois(path: impl AsRef<Path>, sets: &[OisQuoteSet]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    let err = |e| Error::csv(path, e);
    w.write_record(OIS_HEADER).map_err(err)?;
    for s in sets {
        for (t, r) in s.tenors.iter().zip(&s.par_rates) {
            w.write_record([s.date.to_string(), t.to_string(), r.to_string()])
                .map_err(err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Curve dump rows at the pillars: `date,tau,df,zero_rate_pct`.
pub fn curve_rows(curve: &DiscountCurve) -> Vec<[String; 4]> {
    curve
        .pillar_taus
        .iter()
        .zip(&curve.pillar_dfs)
        .map(|(t, df)| {
            [
                curve.date.to_string(),
                t.to_string(),
                df.to_string(),
                (-df.ln() / t * 100.0).to_string(),
            ]
        })
        .collect()
}
