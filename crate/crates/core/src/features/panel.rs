//! The regression panel: one row per identified (market, date, expiry).

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::slope::{slope_series, SlopeSeries};
use super::{gbm_asset_term, gbm_ois_term};
use crate::error::{Error, Result};
use crate::market_data::{DailySeries, Date, Market};
use crate::ois_curve::{CarryObservation, OisQuoteSet};

pub const OIS_SHORT_TENOR: f64 = 1.0;
pub const OIS_LONG_TENOR: f64 = 10.0;

/// An asset slope entering the regression at a given lookback window.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AssetTerm {
    pub asset: String,
    pub window: usize,
}

impl AssetTerm {
    pub fn new(asset: impl Into<String>, window: usize) -> Self {
        Self {
            asset: asset.into(),
            window,
        }
    }

    pub fn column_name(&self) -> String {
        format!("gbm_{}_{}", self.asset.to_lowercase(), self.window)
    }
}

/// Lags (in observations) applied to the volatility index and NFCI.
/// Zero means same-date alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignmentConfig {
    pub vol_lag: usize,
    pub nfci_lag: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub market: Market,
    pub date: Date,
    pub expiry: Date,
    pub tau: f64,
    pub cg_bp: f64,
    pub gbm_ois_1y: f64,
    pub gbm_ois_10y: f64,
    pub gbm_asset: Vec<(AssetTerm, f64)>,
    pub ba_over_tau: f64,
    pub nfci: f64,
    /// Volatility index level (percent) used in the path-risk terms.
    pub vol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AssemblyStats {
    pub rows: usize,
    pub dropped_vol: usize,
    pub dropped_nfci: usize,
    pub dropped_ois: usize,
    pub dropped_slope: usize,
}

impl AssemblyStats {
    pub fn dropped(&self) -> usize {
        self.dropped_vol + self.dropped_nfci + self.dropped_ois + self.dropped_slope
    }
}

fn lagged_same_date(series: &DailySeries, date: Date, lag: usize) -> Option<f64> {
    if lag == 0 {
        return series.get(date);
    }
    let before = series.dates().partition_point(|d| *d < date);
    before.checked_sub(lag).map(|i| series.values()[i])
}

fn lagged_as_of(series: &DailySeries, date: Date, lag: usize) -> Option<f64> {
    let upto = series.dates().partition_point(|d| *d <= date);
    upto.checked_sub(1 + lag).map(|i| series.values()[i])
}

enum Drop {
    Vol,
    Nfci,
    Ois,
}

fn base_row(
    o: &CarryObservation,
    ois: &BTreeMap<Date, &OisQuoteSet>,
    vol: &DailySeries,
    nfci: &DailySeries,
    align: &AlignmentConfig,
) -> std::result::Result<FeatureRow, Drop> {
    let v = lagged_same_date(vol, o.date, align.vol_lag).ok_or(Drop::Vol)?;
    let n = lagged_as_of(nfci, o.date, align.nfci_lag).ok_or(Drop::Nfci)?;
    let set = ois.get(&o.date).ok_or(Drop::Ois)?;
    let r1 = set.par_rate(OIS_SHORT_TENOR).ok_or(Drop::Ois)?;
    let r10 = set.par_rate(OIS_LONG_TENOR).ok_or(Drop::Ois)?;
    Ok(FeatureRow {
        market: o.market,
        date: o.date,
        expiry: o.expiry,
        tau: o.tau,
        cg_bp: o.cg_bp,
        gbm_ois_1y: gbm_ois_term(r1, v, o.tau).map_err(|_| Drop::Vol)?,
        gbm_ois_10y: gbm_ois_term(r10, v, o.tau).map_err(|_| Drop::Vol)?,
        gbm_asset: Vec::new(),
        ba_over_tau: o.identification.ba_med_atm / o.tau,
        nfci: n,
        vol: v,
    })
}

fn base_rows(
    observations: &[CarryObservation],
    ois: &[OisQuoteSet],
    vol: &BTreeMap<Market, DailySeries>,
    nfci: &DailySeries,
    align: &AlignmentConfig,
) -> (Vec<FeatureRow>, AssemblyStats) {
    let ois: BTreeMap<Date, &OisQuoteSet> = ois.iter().map(|s| (s.date, s)).collect();
    let mut stats = AssemblyStats::default();
    let mut rows = Vec::with_capacity(observations.len());
    for o in observations {
        let Some(vol) = vol.get(&o.market) else {
            stats.dropped_vol += 1;
            continue;
        };
        match base_row(o, &ois, vol, nfci, align) {
            Ok(r) => rows.push(r),
            Err(Drop::Vol) => stats.dropped_vol += 1,
            Err(Drop::Nfci) => stats.dropped_nfci += 1,
            Err(Drop::Ois) => stats.dropped_ois += 1,
        }
    }
    rows.sort_by(|a, b| (a.market, a.date, a.expiry).cmp(&(b.market, b.date, b.expiry)));
    stats.rows = rows.len();
    (rows, stats)
}

/// Joins identifications with the OIS, volatility, NFCI and slope inputs for
/// one market. Rows missing any regressor are dropped and counted.
pub fn assemble_panel(
    observations: &[CarryObservation],
    ois: &[OisQuoteSet],
    vol: &DailySeries,
    nfci: &DailySeries,
    slopes: &[SlopeSeries],
    market: Market,
    align: &AlignmentConfig,
) -> (Vec<FeatureRow>, AssemblyStats) {
    let own: Vec<CarryObservation> = observations
        .iter()
        .filter(|o| o.market == market)
        .cloned()
        .collect();
    let vols = BTreeMap::from([(market, vol.clone())]);
    let (rows, mut stats) = base_rows(&own, ois, &vols, nfci, align);
    let mut out = Vec::with_capacity(rows.len());
    'rows: for mut row in rows {
        for s in slopes {
            let Some(slope) = s.at(row.date) else {
                stats.dropped_slope += 1;
                continue 'rows;
            };
            let term = gbm_asset_term(slope, row.vol, row.tau).expect("tau checked positive");
            row.gbm_asset.push((AssetTerm::new(s.asset.clone(), s.window), term));
        }
        out.push(row);
    }
    stats.rows = out.len();
    (out, stats)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RowKey {
    pub market: Market,
    pub date: Date,
    pub expiry: Date,
}

/// Column-oriented regression table with `cg_bp` as the target.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    keys: Vec<RowKey>,
    taus: Vec<f64>,
    target: Vec<f64>,
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl Panel {
    pub fn new(keys: Vec<RowKey>, taus: Vec<f64>, target: Vec<f64>) -> Result<Self> {
        if keys.len() != target.len() || keys.len() != taus.len() {
            return Err(Error::InvalidInput("panel key/target length mismatch".into()));
        }
        Ok(Self {
            keys,
            taus,
            target,
            names: Vec::new(),
            columns: Vec::new(),
        })
    }

    pub fn from_rows(rows: &[FeatureRow]) -> Result<Self> {
        let mut p = Panel::new(
            rows.iter()
                .map(|r| RowKey {
                    market: r.market,
                    date: r.date,
                    expiry: r.expiry,
                })
                .collect(),
            rows.iter().map(|r| r.tau).collect(),
            rows.iter().map(|r| r.cg_bp).collect(),
        )?;
        p.push_column("gbm_ois_1y", rows.iter().map(|r| r.gbm_ois_1y).collect())?;
        p.push_column("gbm_ois_10y", rows.iter().map(|r| r.gbm_ois_10y).collect())?;
        if let Some(first) = rows.first() {
            for (k, (term, _)) in first.gbm_asset.iter().enumerate() {
                let values = rows
                    .iter()
                    .map(|r| match r.gbm_asset.get(k) {
                        Some((t, v)) if t == term => Ok(*v),
                        _ => Err(Error::InvalidInput("rows carry different asset terms".into())),
                    })
                    .collect::<Result<Vec<f64>>>()?;
                p.push_column(&term.column_name(), values)?;
            }
        }
        p.push_column("ba_over_tau", rows.iter().map(|r| r.ba_over_tau).collect())?;
        p.push_column("nfci", rows.iter().map(|r| r.nfci).collect())?;
        Ok(p)
    }

    pub fn push_column(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::InvalidInput(format!(
                "column `{name}` has {} values for {} rows",
                values.len(),
                self.len()
            )));
        }
        if self.names.iter().any(|n| n == name) {
            return Err(Error::InvalidInput(format!("duplicate column `{name}`")));
        }
        self.names.push(name.to_string());
        self.columns.push(values);
        Ok(())
    }

    pub fn remove_column(&mut self, name: &str) -> Result<Vec<f64>> {
        let i = self.column_index(name)?;
        self.names.remove(i);
        Ok(self.columns.remove(i))
    }

    fn column_index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        Ok(&self.columns[self.column_index(name)?])
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.names.iter().any(|n| n == name)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn keys(&self) -> &[RowKey] {
        &self.keys
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn target_mut(&mut self) -> &mut [f64] {
        &mut self.target
    }

    pub fn dates(&self) -> Vec<Date> {
        self.keys.iter().map(|k| k.date).collect()
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn n_dates(&self) -> usize {
        self.keys.iter().map(|k| k.date).collect::<BTreeSet<_>>().len()
    }

    pub fn years(&self) -> BTreeSet<i32> {
        self.keys.iter().map(|k| k.date.year()).collect()
    }

    pub fn markets(&self) -> BTreeSet<Market> {
        self.keys.iter().map(|k| k.market).collect()
    }

    /// Rows at the given indices, in that order.
    pub fn select(&self, idx: &[usize]) -> Panel {
        Panel {
            keys: idx.iter().map(|&i| self.keys[i]).collect(),
            taus: idx.iter().map(|&i| self.taus[i]).collect(),
            target: idx.iter().map(|&i| self.target[i]).collect(),
            names: self.names.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| idx.iter().map(|&i| c[i]).collect())
                .collect(),
        }
    }

    pub fn filter(&self, mut keep: impl FnMut(&RowKey, f64) -> bool) -> Panel {
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| keep(&self.keys[i], self.taus[i]))
            .collect();
        self.select(&idx)
    }

    pub fn market(&self, market: Market) -> Panel {
        self.filter(|k, _| k.market == market)
    }

    /// RFC-4180 CSV: `market,date,expiry,tau,cg_bp,<columns>`.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Numerical(format!("panel write: {e}"));
        let mut header = vec!["market", "date", "expiry", "tau", "cg_bp"];
        header.extend(self.names.iter().map(String::as_str));
        w.write_record(&header).map_err(err)?;
        for i in 0..self.len() {
            let k = self.keys[i];
            let mut rec = vec![
                k.market.to_string(),
                k.date.to_string(),
                k.expiry.to_string(),
                self.taus[i].to_string(),
                self.target[i].to_string(),
            ];
            rec.extend(self.columns.iter().map(|c| c[i].to_string()));
            w.write_record(&rec).map_err(err)?;
        }
        w.flush()
            .map_err(|e| Error::Numerical(format!("panel write: {e}")))
    }
}

/// Source of regression tables whose asset-slope columns can be rebuilt at
/// any lookback window. Horizon scans and the nested search work against it.
pub trait PanelSource: Sync {
    /// All rows with the window-independent regressors.
    fn base(&self) -> &Panel;

    /// Path-risk term of `asset` at `window` for each base row, `None` where
    /// the slope history is too short.
    fn asset_column(&self, asset: &str, window: usize) -> Result<Vec<Option<f64>>>;

    /// Base panel plus the given asset terms, restricted to rows where every
    /// term is defined. Returns the panel and the number of rows dropped.
    fn panel_with(&self, terms: &[AssetTerm]) -> Result<(Panel, usize)> {
        let base = self.base();
        let cols = terms
            .iter()
            .map(|t| self.asset_column(&t.asset, t.window))
            .collect::<Result<Vec<_>>>()?;
        let keep: Vec<usize> = (0..base.len())
            .filter(|&i| cols.iter().all(|c| c[i].is_some()))
            .collect();
        let mut p = base.select(&keep);
        for (t, c) in terms.iter().zip(&cols) {
            p.push_column(
                &t.column_name(),
                keep.iter().map(|&i| c[i].expect("filtered")).collect(),
            )?;
        }
        Ok((p, base.len() - keep.len()))
    }
}

/// Panel source backed by identifications and raw input series.
#[derive(Debug, Clone)]
pub struct PanelBuilder {
    rows: Vec<FeatureRow>,
    base: Panel,
    prices: BTreeMap<String, DailySeries>,
    stats: AssemblyStats,
}

impl PanelBuilder {
    /// `prices` maps asset name to its (already FX-adjusted, if desired)
    /// price series.
    pub fn new(
        observations: &[CarryObservation],
        ois: &[OisQuoteSet],
        vol: &BTreeMap<Market, DailySeries>,
        nfci: &DailySeries,
        prices: BTreeMap<String, DailySeries>,
        align: &AlignmentConfig,
    ) -> Result<Self> {
        let (rows, stats) = base_rows(observations, ois, vol, nfci, align);
        let base = Panel::from_rows(&rows)?;
        Ok(Self {
            rows,
            base,
            prices,
            stats,
        })
    }

    pub fn rows(&self) -> &[FeatureRow] {
        &self.rows
    }

    pub fn stats(&self) -> AssemblyStats {
        self.stats
    }

    pub fn prices(&self, asset: &str) -> Result<&DailySeries> {
        self.prices
            .get(asset)
            .ok_or_else(|| Error::Config(format!("no price series for asset `{asset}`")))
    }

    pub fn slope_series(&self, asset: &str, window: usize) -> Result<SlopeSeries> {
        slope_series(self.prices(asset)?, window)
    }

    /// Feature rows carrying the given asset terms; rows lacking slope
    /// history are dropped and counted.
    pub fn feature_rows(&self, terms: &[AssetTerm]) -> Result<(Vec<FeatureRow>, AssemblyStats)> {
        let slopes = terms
            .iter()
            .map(|t| self.slope_series(&t.asset, t.window))
            .collect::<Result<Vec<_>>>()?;
        let mut stats = self.stats;
        let mut out = Vec::with_capacity(self.rows.len());
        'rows: for r in &self.rows {
            let mut row = r.clone();
            for (t, s) in terms.iter().zip(&slopes) {
                let Some(slope) = s.at(r.date) else {
                    stats.dropped_slope += 1;
                    continue 'rows;
                };
                row.gbm_asset
                    .push((t.clone(), gbm_asset_term(slope, r.vol, r.tau)?));
            }
            out.push(row);
        }
        stats.rows = out.len();
        Ok((out, stats))
    }
}

impl PanelSource for PanelBuilder {
    fn base(&self) -> &Panel {
        &self.base
    }

    fn asset_column(&self, asset: &str, window: usize) -> Result<Vec<Option<f64>>> {
        let s = self.slope_series(asset, window)?;
        self.rows
            .iter()
            .map(|r| {
                s.at(r.date)
                    .map(|b| gbm_asset_term(b, r.vol, r.tau))
                    .transpose()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::implied_discount::IdentificationResult;
    use crate::market_data::SeriesUnit;

    fn d(s: &str) -> Date {
        s.parse().unwrap()
    }

    fn obs(market: Market, date: Date, days: i32) -> CarryObservation {
        CarryObservation {
            market,
            date,
            expiry: date.add_days(days),
            tau: days as f64 / 365.0,
            identification: IdentificationResult {
                b_hat: 0.99,
                f_hat: 3000.0,
                n_strikes: 9,
                flatness_rmse: 0.0,
                ba_med_atm: 1.5,
                b_se: 0.0,
            },
            d_ois: 0.991,
            cg_bp: 12.0,
        }
    }

    fn series(name: &str, dates: &[Date], values: &[f64]) -> DailySeries {
        DailySeries::new(name, dates.to_vec(), values.to_vec(), SeriesUnit::IndexLevel).unwrap()
    }

    fn ois(date: Date) -> OisQuoteSet {
        OisQuoteSet::new(date, vec![0.5, 1.0, 10.0], vec![1.0, 1.5, 2.5]).unwrap()
    }

    #[test]
    fn single_observation_gives_one_row() {
        let t = d("2020-03-02");
        let vix = series("VIX", &[t], &[20.0]);
        let nfci = series("NFCI", &[d("2020-02-28")], &[-0.4]);
        let (rows, stats) = assemble_panel(
            &[obs(Market::Spx, t, 73)],
            &[ois(t)],
            &vix,
            &nfci,
            &[],
            Market::Spx,
            &AlignmentConfig::default(),
        );
        assert_eq!(rows.len(), 1);
        assert_eq!(stats.dropped(), 0);
        let r = &rows[0];
        assert_eq!(r.nfci, -0.4);
        assert_eq!(r.ba_over_tau, 1.5 / (73.0 / 365.0));
        assert_eq!(r.gbm_ois_1y, gbm_ois_term(1.5, 20.0, 73.0 / 365.0).unwrap());
        assert_eq!(r.gbm_ois_10y, gbm_ois_term(2.5, 20.0, 73.0 / 365.0).unwrap());
    }

    #[test]
    fn missing_vol_drops_row() {
        let t1 = d("2020-03-02");
        let t2 = d("2020-03-03");
        let rvx = series("RVX", &[t1], &[25.0]);
        let nfci = series("NFCI", &[d("2020-02-28")], &[-0.4]);
        let (rows, stats) = assemble_panel(
            &[obs(Market::Rut, t1, 60), obs(Market::Rut, t2, 60)],
            &[ois(t1), ois(t2)],
            &rvx,
            &nfci,
            &[],
            Market::Rut,
            &AlignmentConfig::default(),
        );
        assert_eq!(rows.len(), 1);
        assert_eq!(stats.dropped_vol, 1);
    }

    #[test]
    fn lagged_alignment() {
        let dates = [d("2020-03-02"), d("2020-03-03"), d("2020-03-04")];
        let s = series("VIX", &dates, &[10.0, 11.0, 12.0]);
        assert_eq!(lagged_same_date(&s, dates[2], 0), Some(12.0));
        assert_eq!(lagged_same_date(&s, dates[2], 1), Some(11.0));
        assert_eq!(lagged_same_date(&s, dates[0], 1), None);
        assert_eq!(lagged_as_of(&s, d("2020-03-06"), 0), Some(12.0));
        assert_eq!(lagged_as_of(&s, d("2020-03-06"), 2), Some(10.0));
    }

    #[test]
    fn panel_select_and_columns() {
        let keys: Vec<RowKey> = (0..4)
            .map(|i| RowKey {
                market: if i < 2 { Market::Spx } else { Market::Rut },
                date: d("2020-01-02").add_days(i),
                expiry: d("2020-06-01"),
            })
            .collect();
        let mut p = Panel::new(keys, vec![0.5; 4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        p.push_column("a", vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        assert!(p.push_column("a", vec![0.0; 4]).is_err());
        assert!(p.push_column("b", vec![0.0; 3]).is_err());
        let spx = p.market(Market::Spx);
        assert_eq!(spx.target(), &[1.0, 2.0]);
        assert_eq!(spx.column("a").unwrap(), &[0.1, 0.2]);
        assert!(matches!(p.column("zzz"), Err(Error::MissingColumn(_))));
        let mut buf = Vec::new();
        spx.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("market,date,expiry,tau,cg_bp,a\nSPX,2020-01-02,2020-06-01,0.5,1,0.1\n"));
    }
}
