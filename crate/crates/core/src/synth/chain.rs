use rand::Rng;

use crate::market_data::{Date, Market, OptionQuote, Right};

/// Floor on synthetic option mids; keeps planted chains clear of cleaning.
pub const MID_FLOOR: f64 = 0.05;
/// Strikes within this moneyness of the forward carry the ATM spread.
pub const ATM_SPREAD_BAND: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct ChainParams {
    pub market: Market,
    pub quote_date: Date,
    pub expiry: Date,
    pub b: f64,
    pub f: f64,
    pub strikes: Vec<f64>,
    /// Half-width of the uniform noise added to each pair value.
    pub noise_scale: f64,
    pub atm_spread: f64,
    /// Total volatility `sigma * sqrt(tau)` shaping the time value.
    pub vol_sqrt_tau: f64,
}

impl ChainParams {
    /// Minimal chain for the given discount factor, forward and strikes.
    pub fn simple(b: f64, f: f64, strikes: Vec<f64>, noise_scale: f64) -> Self {
        let quote_date = Date::from_ordinal(18_262);
        Self {
            market: Market::Spx,
            quote_date,
            expiry: quote_date.add_days(182),
            b,
            f,
            strikes,
            noise_scale,
            atm_spread: 0.5,
            vol_sqrt_tau: 0.15,
        }
    }
}

/// Rough out-of-the-money time value, positive everywhere.
fn time_value(b: f64, f: f64, k: f64, s: f64) -> f64 {
    let z = (k / f).ln() / s;
    b * f * s * 0.4 * (-0.5 * z * z).exp()
}

/// Strikes around `f`: one at the rounded forward and `n - 1` more spread
/// evenly over `f * (1 ± half_width)`, rounded to `tick`.
pub fn strike_grid(f: f64, n: usize, half_width: f64, tick: f64) -> Vec<f64> {
    let mut k: Vec<f64> = (0..n)
        .map(|i| {
            let m = if n > 1 {
                -half_width + 2.0 * half_width * i as f64 / (n - 1) as f64
            } else {
                0.0
            };
            (f * (1.0 + m) / tick).round() * tick
        })
        .collect();
    k.push((f / tick).round() * tick);
    k.retain(|x| *x > 0.0);
    k.sort_by(f64::total_cmp);
    k.dedup();
    k
}

/// Call and put quotes whose mids satisfy `C - P = b (f - K) + e`, with `e`
/// uniform on `[-noise_scale, noise_scale]`. The out-of-the-money leg is its
/// time value (floored), the other leg follows from the pair value.
pub fn gen_chain<R: Rng + ?Sized>(p: &ChainParams, rng: &mut R) -> Vec<OptionQuote> {
    let mut out = Vec::with_capacity(2 * p.strikes.len());
    for &k in &p.strikes {
        let eps = if p.noise_scale > 0.0 {
            rng.random_range(-p.noise_scale..=p.noise_scale)
        } else {
            0.0
        };
        let g = p.b * (p.f - k) + eps;
        let otm = time_value(p.b, p.f, k, p.vol_sqrt_tau).max(MID_FLOOR) + p.noise_scale;
        let (call, put) = if k >= p.f { (otm, otm - g) } else { (otm + g, otm) };
        for (right, mid) in [(Right::Call, call), (Right::Put, put)] {
            let spread = if (k / p.f - 1.0).abs() <= ATM_SPREAD_BAND {
                p.atm_spread.min(0.4 * mid)
            } else {
                p.atm_spread.min(0.4 * otm)
            };
            out.push(OptionQuote {
                market: p.market,
                quote_date: p.quote_date,
                expiry: p.expiry,
                strike: k,
                right,
                bid: mid - spread / 2.0,
                ask: mid + spread / 2.0,
            });
        }
    }
    out
}
