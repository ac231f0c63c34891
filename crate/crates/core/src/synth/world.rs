//! A full synthetic input set with a planted linear carry-gap model.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::chain::{gen_chain, strike_grid, ChainParams};
use crate::error::{Error, Result};
use crate::features::{gbm_asset_term, gbm_ois_term, slope_series, AssetTerm};
use crate::market_data::{
    write_option_quotes, write_series, DailySeries, Date, Market, OptionQuote, SeriesUnit,
};
use crate::ois_curve::{bootstrap, write_ois, year_fraction, OisQuoteSet};

pub const OIS_TENORS: [f64; 8] = [0.25, 0.5, 1.0, 2.0, 3.0, 5.0, 7.0, 10.0];
pub const RNG_NAME: &str = "ChaCha8";
const TRADING_DAYS: f64 = 252.0;

const STREAM_PRICES: u64 = 2;
const STREAM_VOL: u64 = 3;
const STREAM_NFCI: u64 = 4;
const STREAM_DXY: u64 = 5;
const STREAM_OIS: u64 = 6;
const STREAM_SPOT: u64 = 7;
const STREAM_ROWS: u64 = 8;
const STREAM_NOISE: u64 = 9;
const STREAM_CHAINS: u64 = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedAsset {
    pub asset: String,
    pub window: usize,
    pub coef: f64,
}

/// Coefficients of the planted model, in bp per unit regressor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantedModel {
    pub intercept: f64,
    pub gbm_ois_1y: f64,
    pub gbm_ois_10y: f64,
    pub assets: Vec<PlantedAsset>,
    pub ba_over_tau: f64,
    pub nfci: f64,
}

impl Default for PlantedModel {
    fn default() -> Self {
        let a = |asset: &str, window, coef| PlantedAsset {
            asset: asset.into(),
            window,
            coef,
        };
        Self {
            intercept: 10.0,
            gbm_ois_1y: -0.8,
            gbm_ois_10y: 0.0,
            assets: vec![a("IEFA", 70, -10.0), a("IGOV", 441, 15.0), a("IAU", 315, 12.0)],
            ba_over_tau: 2.0,
            nfci: 20.0,
        }
    }
}

impl PlantedModel {
    pub fn terms(&self) -> Vec<AssetTerm> {
        self.assets
            .iter()
            .map(|a| AssetTerm::new(a.asset.clone(), a.window))
            .collect()
    }

    /// `(column name, coefficient)` with the intercept first, in the order
    /// regression specs list their regressors.
    pub fn coefficients(&self) -> Vec<(String, f64)> {
        let mut out = vec![
            (crate::econometrics::INTERCEPT.to_string(), self.intercept),
            ("gbm_ois_1y".to_string(), self.gbm_ois_1y),
        ];
        if self.gbm_ois_10y != 0.0 {
            out.push(("gbm_ois_10y".to_string(), self.gbm_ois_10y));
        }
        out.extend(self.assets.iter().map(|a| (AssetTerm::new(a.asset.clone(), a.window).column_name(), a.coef)));
        out.push(("ba_over_tau".to_string(), self.ba_over_tau));
        out.push(("nfci".to_string(), self.nfci));
        out
    }

    /// The same model with the asset windows replaced in order.
    pub fn with_windows(mut self, windows: &[usize]) -> Self {
        for (a, w) in self.assets.iter_mut().zip(windows) {
            a.window = *w;
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthWorldConfig {
    pub seed: u64,
    pub start_year: i32,
    pub years: u32,
    /// Trading days of price history before the first panel date.
    pub history_days: usize,
    pub markets: Vec<Market>,
    /// Every ETF with a price file; planted assets must be among them.
    pub assets: Vec<String>,
    pub strikes_per_chain: usize,
    /// Half-width of uniform noise on each call-minus-put value.
    pub quote_noise: f64,
    pub maturity_months: Vec<f64>,
    pub maturities_per_date: usize,
    pub model: PlantedModel,
    /// Signal share of carry-gap variance per market; overrides
    /// `noise_sd_bp` when set.
    pub target_r2: Option<f64>,
    pub noise_sd_bp: f64,
    /// Annualised sd of the regime drifts in ETF prices.
    pub drift_sd: f64,
    pub regime_days: (usize, usize),
    pub asset_vol: f64,
}

impl Default for SynthWorldConfig {
    fn default() -> Self {
        Self {
            seed: 20240611,
            start_year: 2016,
            years: 10,
            history_days: 600,
            markets: Market::ALL.to_vec(),
            assets: ["IEFA", "IGOV", "IAU", "VTI", "BND", "IEMG", "EBND"]
                .map(String::from)
                .to_vec(),
            strikes_per_chain: 11,
            quote_noise: 0.0,
            maturity_months: vec![1.5, 2.5, 4.0, 6.0, 8.5, 12.0, 17.0, 24.0],
            maturities_per_date: 3,
            model: PlantedModel::default(),
            target_r2: Some(0.4),
            noise_sd_bp: 5.0,
            drift_sd: 0.35,
            regime_days: (40, 250),
            asset_vol: 0.15,
        }
    }
}

impl SynthWorldConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("synthetic world: {m}")));
        if self.years == 0 || self.markets.is_empty() {
            return bad("needs at least one year and one market".into());
        }
        if self.strikes_per_chain < 5 {
            return bad(format!("{} strikes per chain, need at least 5", self.strikes_per_chain));
        }
        if self.maturity_months.is_empty()
            || self.maturity_months.iter().any(|m| !(*m > 0.0 && *m <= 120.0))
        {
            return bad("maturities must lie in (0, 120] months".into());
        }
        if self.maturities_per_date == 0 || self.maturities_per_date > self.maturity_months.len() {
            return bad("maturities_per_date must be between 1 and the number of maturities".into());
        }
        for a in &self.model.assets {
            if !self.assets.contains(&a.asset) {
                return bad(format!("planted asset {} has no price series", a.asset));
            }
            if a.window < 2 || a.window > self.history_days {
                return bad(format!(
                    "{} window {} outside [2, history_days = {}]",
                    a.asset, a.window, self.history_days
                ));
            }
        }
        if let Some(r) = self.target_r2 {
            if !(r > 0.0 && r <= 1.0) {
                return bad(format!("target_r2 {r} outside (0, 1]"));
            }
        } else if !(self.noise_sd_bp >= 0.0) {
            return bad("noise_sd_bp must be non-negative".into());
        }
        if !(self.quote_noise >= 0.0 && self.drift_sd >= 0.0 && self.asset_vol > 0.0) {
            return bad("quote_noise and drift_sd must be non-negative, asset_vol positive".into());
        }
        if self.regime_days.0 == 0 || self.regime_days.0 > self.regime_days.1 {
            return bad("regime_days must be a non-empty range".into());
        }
        Ok(())
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(stream);
        r
    }
}

/// One planted panel row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub market: Market,
    pub date: Date,
    pub expiry: Date,
    pub tau: f64,
    pub atm_spread: f64,
    pub cg_signal: f64,
    pub noise: f64,
    pub cg_bp: f64,
}

pub const TRUTH_HEADER: [&str; 8] = [
    "market", "date", "expiry", "tau", "atm_spread", "cg_signal", "noise", "cg_bp",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketTruth {
    pub rows: usize,
    pub noise_sd_bp: f64,
    pub signal_var: f64,
    /// Sample share of signal variance in `cg_bp`.
    pub signal_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub rng: String,
    pub config: SynthWorldConfig,
    pub coefficients: Vec<(String, f64)>,
    pub windows: BTreeMap<String, usize>,
    pub markets: BTreeMap<Market, MarketTruth>,
    pub rows: usize,
    pub first_date: Date,
    pub last_date: Date,
    pub files: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct World {
    pub manifest: Manifest,
    pub quotes: Vec<OptionQuote>,
    pub ois: Vec<OisQuoteSet>,
    pub prices: BTreeMap<String, DailySeries>,
    pub vol: BTreeMap<Market, DailySeries>,
    pub nfci: DailySeries,
    pub dollar_index: DailySeries,
    pub truth: Vec<TruthRow>,
}

fn weekdays_between(start: Date, end: Date) -> Vec<Date> {
    (0..start.days_until(end))
        .map(|i| start.add_days(i))
        .filter(|d| d.weekday() < 5)
        .collect()
}

/// Weekdays before `first`, oldest first.
fn weekdays_before(first: Date, n: usize) -> Vec<Date> {
    let mut out = Vec::with_capacity(n);
    let mut d = first.add_days(-1);
    while out.len() < n {
        if d.weekday() < 5 {
            out.push(d);
        }
        d = d.add_days(-1);
    }
    out.reverse();
    out
}

/// Geometric path with regime drifts on `dates`, a few days removed.
fn etf_prices(cfg: &SynthWorldConfig, name: &str, dates: &[Date], rng: &mut ChaCha8Rng) -> Result<DailySeries> {
    let dt = 1.0 / TRADING_DAYS;
    let sd = cfg.asset_vol * dt.sqrt();
    let mut level = rng.random_range(40.0..120.0_f64).ln();
    let mut drift = 0.0;
    let mut left = 0;
    let mut kept_dates = Vec::with_capacity(dates.len());
    let mut values = Vec::with_capacity(dates.len());
    for &d in dates {
        if left == 0 {
            left = rng.random_range(cfg.regime_days.0..=cfg.regime_days.1);
            drift = cfg.drift_sd * rng.sample::<f64, _>(StandardNormal);
        }
        left -= 1;
        let z: f64 = rng.sample(StandardNormal);
        level += (drift - 0.5 * cfg.asset_vol * cfg.asset_vol) * dt + sd * z;
        if rng.random::<f64>() >= 0.01 {
            kept_dates.push(d);
            values.push(level.exp());
        }
    }
    DailySeries::new(name, kept_dates, values, SeriesUnit::PriceLevel)
}

fn vol_indices(cfg: &SynthWorldConfig, dates: &[Date]) -> Result<BTreeMap<Market, DailySeries>> {
    let mut rng = cfg.rng(STREAM_VOL);
    let dt = 1.0 / TRADING_DAYS;
    let (mu, kappa, sigma) = (18.0_f64.ln(), 5.0, 0.9);
    let mut x = mu;
    let mut gap = 0.18;
    let mut vix = Vec::with_capacity(dates.len());
    let mut rvx = Vec::with_capacity(dates.len());
    for _ in dates {
        x += kappa * (mu - x) * dt + sigma * dt.sqrt() * rng.sample::<f64, _>(StandardNormal);
        gap = 0.18 + 0.9 * (gap - 0.18) + 0.03 * rng.sample::<f64, _>(StandardNormal);
        vix.push(x.exp());
        rvx.push((x + gap).exp());
    }
    let mut out = BTreeMap::new();
    for m in &cfg.markets {
        let values = match m {
            Market::Spx => vix.clone(),
            Market::Rut => rvx.clone(),
        };
        out.insert(*m, DailySeries::new(m.vol_index(), dates.to_vec(), values, SeriesUnit::IndexPoints)?);
    }
    Ok(out)
}

/// Weekly (Friday) readings covering `dates` from at least a week before.
fn nfci_series(cfg: &SynthWorldConfig, dates: &[Date]) -> Result<DailySeries> {
    let mut rng = cfg.rng(STREAM_NFCI);
    let first = dates[0].add_days(-7);
    let last = *dates.last().expect("non-empty calendar");
    let mut n = -0.4;
    let mut ds = Vec::new();
    let mut vs = Vec::new();
    let mut d = first;
    while d <= last {
        if d.weekday() == 4 {
            n = -0.4 + 0.95 * (n + 0.4) + 0.08 * rng.sample::<f64, _>(StandardNormal);
            ds.push(d);
            vs.push(n);
        }
        d = d.add_days(1);
    }
    DailySeries::new("NFCI", ds, vs, SeriesUnit::IndexLevel)
}

fn dollar_index(cfg: &SynthWorldConfig, dates: &[Date]) -> Result<DailySeries> {
    let mut rng = cfg.rng(STREAM_DXY);
    let mut x = 95.0_f64.ln();
    let mut ds = Vec::new();
    let mut vs = Vec::new();
    for &d in dates {
        x += 0.005 * rng.sample::<f64, _>(StandardNormal);
        if rng.random::<f64>() >= 0.02 {
            ds.push(d);
            vs.push(x.exp());
        }
    }
    DailySeries::new("DXY", ds, vs, SeriesUnit::IndexLevel)
}

/// Par curves `level + slope * (1 - exp(-T / 3))`.
fn ois_quotes(cfg: &SynthWorldConfig, dates: &[Date]) -> Result<Vec<OisQuoteSet>> {
    let mut rng = cfg.rng(STREAM_OIS);
    let mut level: f64 = 1.5;
    let mut slope: f64 = 0.8;
    let mut out = Vec::with_capacity(dates.len());
    for &d in dates {
        level = (level + 0.03 * rng.sample::<f64, _>(StandardNormal)).clamp(0.1, 5.5);
        slope = (0.8 + 0.98 * (slope - 0.8) + 0.03 * rng.sample::<f64, _>(StandardNormal)).clamp(-1.5, 2.5);
        let rates = OIS_TENORS
            .iter()
            .map(|t| {
                let r = level + slope * (1.0 - (-t / 3.0).exp());
                (r.max(0.01) * 1e6).round() / 1e6
            })
            .collect();
        out.push(OisQuoteSet::new(d, OIS_TENORS.to_vec(), rates)?);
    }
    Ok(out)
}

struct PendingRow {
    market: Market,
    date: Date,
    expiry: Date,
    tau: f64,
    atm_spread: f64,
    d_ois: f64,
    forward: f64,
    vol_sqrt_tau: f64,
    signal: f64,
}

/// Builds the world in memory.
pub fn build_world(cfg: &SynthWorldConfig) -> Result<World> {
    cfg.validate()?;
    let start = Date::from_ymd(cfg.start_year, 1, 1)?;
    let end = Date::from_ymd(cfg.start_year + cfg.years as i32, 1, 1)?;
    let panel_dates = weekdays_between(start, end);
    let mut all_dates = weekdays_before(panel_dates[0], cfg.history_days + 5);
    all_dates.extend(&panel_dates);

    let mut price_rng = cfg.rng(STREAM_PRICES);
    let mut prices = BTreeMap::new();
    for a in &cfg.assets {
        prices.insert(a.clone(), etf_prices(cfg, a, &all_dates, &mut price_rng)?);
    }
    let vol = vol_indices(cfg, &all_dates)?;
    let nfci = nfci_series(cfg, &panel_dates)?;
    let dollar = dollar_index(cfg, &all_dates)?;
    let ois = ois_quotes(cfg, &panel_dates)?;

    let slopes = cfg
        .model
        .assets
        .iter()
        .map(|a| slope_series(&prices[&a.asset], a.window))
        .collect::<Result<Vec<_>>>()?;

    let mut spot_rng = cfg.rng(STREAM_SPOT);
    let mut row_rng = cfg.rng(STREAM_ROWS);
    let mut spots: BTreeMap<Market, f64> = cfg
        .markets
        .iter()
        .map(|m| (*m, if *m == Market::Spx { 3000.0 } else { 1500.0 }))
        .collect();
    let n_mat = cfg.maturity_months.len();
    let mut pending = Vec::new();
    for (i, (&date, set)) in panel_dates.iter().zip(&ois).enumerate() {
        let curve = bootstrap(set)?;
        let r1 = set.par_rate(1.0).expect("tenor present");
        let r10 = set.par_rate(10.0).expect("tenor present");
        let nf = nfci.as_of(date).expect("weekly series starts early");
        for m in &cfg.markets {
            let v = vol[m].get(date).expect("vol on every weekday");
            let s = spots.get_mut(m).expect("spot per market");
            *s *= (0.0002 + v / 100.0 / TRADING_DAYS.sqrt() * spot_rng.sample::<f64, _>(StandardNormal)).exp();
            for k in 0..cfg.maturities_per_date {
                let months = cfg.maturity_months[(i * cfg.maturities_per_date + k) % n_mat];
                let expiry = date.add_days((months * 365.0 / 12.0).round() as i32);
                let tau = year_fraction(date, expiry);
                let tick_spread = if *m == Market::Spx { 0.1 } else { 0.05 };
                let atm_spread = tick_spread * row_rng.random_range(1..=20) as f64;
                let ba_over_tau = atm_spread / tau;
                let mut signal = cfg.model.intercept
                    + cfg.model.gbm_ois_1y * gbm_ois_term(r1, v, tau)?
                    + cfg.model.gbm_ois_10y * gbm_ois_term(r10, v, tau)?
                    + cfg.model.ba_over_tau * ba_over_tau
                    + cfg.model.nfci * nf;
                for (a, sl) in cfg.model.assets.iter().zip(&slopes) {
                    let b = sl.at(date).ok_or_else(|| {
                        Error::Config(format!("history_days too short for {} window {}", a.asset, a.window))
                    })?;
                    signal += a.coef * gbm_asset_term(b, v, tau)?;
                }
                pending.push(PendingRow {
                    market: *m,
                    date,
                    expiry,
                    tau,
                    atm_spread,
                    d_ois: curve.discount_at(tau)?,
                    forward: *s * (0.015 * tau).exp(),
                    vol_sqrt_tau: v / 100.0 * tau.sqrt(),
                    signal,
                });
            }
        }
    }

    let mut markets = BTreeMap::new();
    for m in &cfg.markets {
        let sig: Vec<f64> = pending.iter().filter(|r| r.market == *m).map(|r| r.signal).collect();
        let var = variance(&sig);
        let sd = match cfg.target_r2 {
            Some(r) => (var * (1.0 - r) / r).sqrt(),
            None => cfg.noise_sd_bp,
        };
        markets.insert(
            *m,
            MarketTruth {
                rows: sig.len(),
                noise_sd_bp: sd,
                signal_var: var,
                signal_share: f64::NAN,
            },
        );
    }

    let mut noise_rng = cfg.rng(STREAM_NOISE);
    let mut chain_rng = cfg.rng(STREAM_CHAINS);
    let mut truth = Vec::with_capacity(pending.len());
    let mut quotes = Vec::with_capacity(pending.len() * 2 * (cfg.strikes_per_chain + 1));
    for r in &pending {
        let sd = markets[&r.market].noise_sd_bp;
        let noise = if sd > 0.0 {
            Normal::new(0.0, sd)
                .map_err(|e| Error::Numerical(e.to_string()))?
                .sample(&mut noise_rng)
        } else {
            0.0
        };
        let cg = r.signal + noise;
        let b = r.d_ois * (-cg * r.tau / 1e4).exp();
        let tick = if r.market == Market::Spx { 5.0 } else { 1.0 };
        let half_width = (2.0 * r.vol_sqrt_tau).clamp(0.05, 0.6);
        let params = ChainParams {
            market: r.market,
            quote_date: r.date,
            expiry: r.expiry,
            b,
            f: r.forward,
            strikes: strike_grid(r.forward, cfg.strikes_per_chain, half_width, tick),
            noise_scale: cfg.quote_noise,
            atm_spread: r.atm_spread,
            vol_sqrt_tau: r.vol_sqrt_tau,
        };
        quotes.extend(gen_chain(&params, &mut chain_rng));
        truth.push(TruthRow {
            market: r.market,
            date: r.date,
            expiry: r.expiry,
            tau: r.tau,
            atm_spread: r.atm_spread,
            cg_signal: r.signal,
            noise,
            cg_bp: cg,
        });
    }
    for (m, t) in markets.iter_mut() {
        let cg: Vec<f64> = truth.iter().filter(|r| r.market == *m).map(|r| r.cg_bp).collect();
        t.signal_share = t.signal_var / variance(&cg);
    }

    let mut files = vec!["options.csv".to_string(), "ois.csv".to_string()];
    files.extend(cfg.assets.iter().map(|a| format!("prices/{a}.csv")));
    files.extend(vol.values().map(|v| format!("{}.csv", v.name())));
    files.extend(["NFCI.csv", "DXY.csv", "truth.csv", "manifest.json", "config.toml"].map(String::from));

    let manifest = Manifest {
        seed: cfg.seed,
        rng: RNG_NAME.into(),
        config: cfg.clone(),
        coefficients: cfg.model.coefficients(),
        windows: cfg.model.assets.iter().map(|a| (a.asset.clone(), a.window)).collect(),
        markets,
        rows: truth.len(),
        first_date: panel_dates[0],
        last_date: *panel_dates.last().expect("non-empty"),
        files,
    };
    Ok(World {
        manifest,
        quotes,
        ois,
        prices,
        vol,
        nfci,
        dollar_index: dollar,
        truth,
    })
}

fn variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n
}

pub fn write_truth(path: &Path, rows: &[TruthRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    let err = |e| Error::csv(path, e);
    w.write_record(TRUTH_HEADER).map_err(err)?;
    for r in rows {
        w.write_record([
            r.market.as_str().to_string(),
            r.date.to_string(),
            r.expiry.to_string(),
            r.tau.to_string(),
            r.atm_spread.to_string(),
            r.cg_signal.to_string(),
            r.noise.to_string(),
            r.cg_bp.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_truth(path: &Path) -> Result<Vec<TruthRow>> {
    let mut rdr = crate::market_data::reader(path)?;
    crate::market_data::check_header(path, &mut rdr, &TRUTH_HEADER)?;
    rdr.deserialize()
        .map(|r| r.map_err(|e| Error::csv(path, e)))
        .collect()
}

/// Run configuration pointing at the files `gen_world` writes, with a
/// `planted` spec holding the true windows.
pub fn world_run_config(world: &World) -> crate::config::RunConfig {
    use crate::config::{RunConfig, SpecConfig};
    let cfg = &world.manifest.config;
    let mut rc = RunConfig::default();
    rc.seed = cfg.seed;
    rc.synth = cfg.clone();
    rc.inputs.option_quotes = "options.csv".into();
    rc.inputs.ois = "ois.csv".into();
    rc.inputs.nfci = "NFCI.csv".into();
    rc.inputs.dollar_index = Some("DXY.csv".into());
    rc.inputs.vol = world
        .vol
        .iter()
        .map(|(m, s)| (*m, format!("{}.csv", s.name()).into()))
        .collect();
    rc.inputs.prices = cfg
        .assets
        .iter()
        .map(|a| (a.clone(), format!("prices/{a}.csv").into()))
        .collect();
    rc.specs.retain(|s| s.assets.iter().all(|t| cfg.assets.contains(&t.asset)));
    let mut base = vec!["gbm_ois_1y".to_string()];
    if cfg.model.gbm_ois_10y != 0.0 {
        base.push("gbm_ois_10y".into());
    }
    base.extend(["ba_over_tau".to_string(), "nfci".to_string()]);
    rc.specs.push(SpecConfig {
        name: "planted".into(),
        base,
        assets: cfg.model.terms(),
    });
    let names: Vec<String> = rc.specs.iter().map(|s| s.name.clone()).collect();
    rc.cv.specs.retain(|s| names.contains(s));
    if !names.contains(&rc.pca.spec) {
        rc.pca.spec = "planted".into();
    }
    rc.scan.grids.retain(|g| cfg.assets.contains(&g.asset));
    rc
}

/// Writes the world's input files, ground truth, manifest and a matching
/// run configuration into `dir`.
pub fn gen_world(cfg: &SynthWorldConfig, dir: &Path) -> Result<World> {
    let world = build_world(cfg)?;
    let mkdir = |p: &Path| std::fs::create_dir_all(p).map_err(|e| Error::io(p, e));
    mkdir(dir)?;
    mkdir(&dir.join("prices"))?;
    write_option_quotes(dir.join("options.csv"), &world.quotes)?;
    write_ois(dir.join("ois.csv"), &world.ois)?;
    for (a, s) in &world.prices {
        write_series(dir.join(format!("prices/{a}.csv")), s)?;
    }
    for s in world.vol.values() {
        write_series(dir.join(format!("{}.csv", s.name())), s)?;
    }
    write_series(dir.join("NFCI.csv"), &world.nfci)?;
    write_series(dir.join("DXY.csv"), &world.dollar_index)?;
    write_truth(&dir.join("truth.csv"), &world.truth)?;
    let json = serde_json::to_string_pretty(&world.manifest)
        .map_err(|e| Error::Numerical(format!("manifest: {e}")))?;
    let path = dir.join("manifest.json");
    std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    let path = dir.join("config.toml");
    std::fs::write(&path, world_run_config(&world).to_toml()?).map_err(|e| Error::io(&path, e))?;
    Ok(world)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthWorldConfig {
        SynthWorldConfig {
            years: 1,
            assets: vec!["IEFA".into(), "IGOV".into(), "IAU".into()],
            ..Default::default()
        }
    }

    #[test]
    fn deterministic_and_counted() {
        let a = build_world(&small()).unwrap();
        let b = build_world(&small()).unwrap();
        assert_eq!(a.manifest, b.manifest);
        assert_eq!(a.quotes, b.quotes);
        let days = a.ois.len();
        assert_eq!(a.truth.len(), days * 2 * 3);
        assert_eq!(a.manifest.rows, a.truth.len());
        for m in a.manifest.markets.values() {
            assert!((m.signal_share - 0.4).abs() < 0.1);
        }
    }

    #[test]
    fn truth_is_signal_plus_noise() {
        let w = build_world(&small()).unwrap();
        assert!(w.truth.iter().all(|r| r.cg_bp == r.cg_signal + r.noise));
    }

    #[test]
    fn rejects_short_history() {
        let mut c = small();
        c.history_days = 100;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        c = small();
        c.strikes_per_chain = 4;
        assert!(c.validate().is_err());
    }
}
