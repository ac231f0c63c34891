use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{eligible_years, evaluate_holdout, CvReport, FoldOutcome, YearMetrics};
use crate::econometrics::Specification;
use crate::error::{Error, Result};
use crate::features::{AssetTerm, Panel, PanelSource};
use crate::market_data::Market;

/// Scaled Gram matrices above this condition number make a candidate
/// undefined.
const MAX_GRAM_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub assets: Vec<String>,
    pub start: Vec<usize>,
    pub bounds: Vec<(usize, usize)>,
    pub grid_steps: Vec<usize>,
    pub refine_step: usize,
    pub max_iter: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            assets: vec!["IEFA".into(), "IGOV".into(), "IAU".into()],
            start: vec![70, 441, 315],
            bounds: vec![(20, 130), (120, 550), (120, 550)],
            grid_steps: vec![7, 21, 21],
            refine_step: 1,
            max_iter: 1000,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        let k = self.assets.len();
        if k == 0 || self.start.len() != k || self.bounds.len() != k || self.grid_steps.len() != k {
            return Err(Error::Config(
                "search assets, start, bounds and grid steps must have equal, non-zero length".into(),
            ));
        }
        for i in 0..k {
            let (lo, hi) = self.bounds[i];
            if lo < 2 || lo > hi || self.start[i] < lo || self.start[i] > hi {
                return Err(Error::Config(format!(
                    "{}: start {} outside bounds [{lo}, {hi}] (lower bound must be at least 2)",
                    self.assets[i], self.start[i]
                )));
            }
            if self.grid_steps[i] == 0 {
                return Err(Error::Config(format!("{}: grid step must be positive", self.assets[i])));
            }
        }
        if self.refine_step == 0 {
            return Err(Error::Config("refine step must be positive".into()));
        }
        Ok(())
    }

    fn grids(&self) -> Vec<Vec<usize>> {
        (0..self.assets.len())
            .map(|i| grid_points(self.start[i], self.bounds[i], self.grid_steps[i]))
            .collect()
    }

    pub fn terms(&self, windows: &[usize]) -> Vec<AssetTerm> {
        self.assets
            .iter()
            .zip(windows)
            .map(|(a, w)| AssetTerm::new(a.clone(), *w))
            .collect()
    }
}

/// `start + k * step` for every integer `k` that stays within `bounds`, ascending.
pub fn grid_points(start: usize, (lo, hi): (usize, usize), step: usize) -> Vec<usize> {
    let first = start - (start - lo) / step * step;
    (first..=hi).step_by(step).collect()
}

pub trait WindowObjective: Sync {
    /// Makes every combination of the given per-asset windows evaluable.
    fn prepare(&mut self, windows: &[Vec<usize>]) -> Result<()>;

    /// `None` when the candidate is degenerate.
    fn value(&self, windows: &[usize]) -> Option<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStage {
    Start,
    Grid,
    Climb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub stage: SearchStage,
    pub windows: Vec<usize>,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub selected: Vec<usize>,
    pub objective: f64,
    /// Start point followed by every accepted improvement.
    pub trace: Vec<TraceStep>,
    pub converged: bool,
    pub hit_boundary: bool,
    pub iterations: usize,
    pub evaluations: usize,
    pub skipped: usize,
}

fn cartesian(grids: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for g in grids {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                g.iter().map(move |w| {
                    let mut p = prefix.clone();
                    p.push(*w);
                    p
                })
            })
            .collect();
    }
    out
}

/// Coarse grid over the start-anchored per-asset grids, then a hill-climb
/// over single-asset moves of `refine_step`. The start is the incumbent and
/// only strict improvements are accepted, so ties keep the earlier candidate
/// in lexicographic order.
pub fn search_windows<O: WindowObjective>(obj: &mut O, cfg: &SearchConfig) -> Result<SearchOutcome> {
    cfg.validate()?;
    let grids = cfg.grids();
    obj.prepare(&grids)?;
    let candidates = cartesian(&grids);
    let values: Vec<Option<f64>> = candidates.par_iter().map(|c| obj.value(c)).collect();
    let mut evaluations = candidates.len();
    let mut skipped = values.iter().filter(|v| v.is_none()).count();
    if skipped > 0 {
        log::info!("{skipped} degenerate grid candidates skipped");
    }

    let mut trace = Vec::new();
    let mut best: Option<(Vec<usize>, f64)> = obj.value(&cfg.start).map(|v| (cfg.start.clone(), v));
    if let Some((w, v)) = &best {
        trace.push(TraceStep {
            stage: SearchStage::Start,
            windows: w.clone(),
            objective: *v,
        });
    }
    for (c, v) in candidates.iter().zip(&values) {
        if let Some(v) = v {
            if best.as_ref().is_none_or(|(_, b)| v > b) {
                best = Some((c.clone(), *v));
            }
        }
    }
    let (mut current, mut value) =
        best.ok_or_else(|| Error::Numerical("every grid candidate is degenerate".into()))?;
    if trace.last().is_none_or(|t| t.windows != current) {
        trace.push(TraceStep {
            stage: SearchStage::Grid,
            windows: current.clone(),
            objective: value,
        });
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iter {
        iterations += 1;
        let mut moves = Vec::new();
        for (i, &(lo, hi)) in cfg.bounds.iter().enumerate() {
            let w = current[i];
            if w >= lo + cfg.refine_step {
                let mut m = current.clone();
                m[i] = w - cfg.refine_step;
                moves.push(m);
            }
            if w + cfg.refine_step <= hi {
                let mut m = current.clone();
                m[i] = w + cfg.refine_step;
                moves.push(m);
            }
        }
        moves.sort();
        let needed: Vec<Vec<usize>> = (0..cfg.assets.len())
            .map(|i| {
                let mut ws: Vec<usize> = moves.iter().map(|m| m[i]).collect();
                ws.sort_unstable();
                ws.dedup();
                ws
            })
            .collect();
        obj.prepare(&needed)?;
        let mut step: Option<(Vec<usize>, f64)> = None;
        for m in moves {
            evaluations += 1;
            match obj.value(&m) {
                Some(v) if v > value && step.as_ref().is_none_or(|(_, b)| v > *b) => step = Some((m, v)),
                Some(_) => {}
                None => skipped += 1,
            }
        }
        match step {
            Some((m, v)) => {
                current = m;
                value = v;
                trace.push(TraceStep {
                    stage: SearchStage::Climb,
                    windows: current.clone(),
                    objective: value,
                });
            }
            None => {
                converged = true;
                break;
            }
        }
    }
    let hit_boundary = current
        .iter()
        .zip(&cfg.bounds)
        .any(|(w, (lo, hi))| w == lo || w == hi);
    Ok(SearchOutcome {
        selected: current,
        objective: value,
        trace,
        converged,
        hit_boundary,
        iterations,
        evaluations,
        skipped,
    })
}

type Column = Arc<Vec<Option<f64>>>;

/// Memoizes asset columns of a panel source; shared across folds.
pub struct ColumnCache<'a> {
    source: &'a dyn PanelSource,
    columns: Mutex<HashMap<(String, usize), Column>>,
}

impl<'a> ColumnCache<'a> {
    pub fn new(source: &'a dyn PanelSource) -> Self {
        Self {
            source,
            columns: Mutex::new(HashMap::new()),
        }
    }

    pub fn source(&self) -> &'a dyn PanelSource {
        self.source
    }

    pub fn get(&self, asset: &str, window: usize) -> Result<Column> {
        let key = (asset.to_string(), window);
        if let Some(c) = self.columns.lock().expect("cache lock").get(&key) {
            return Ok(c.clone());
        }
        let c = Arc::new(self.source.asset_column(asset, window)?);
        Ok(self
            .columns
            .lock()
            .expect("cache lock")
            .entry(key)
            .or_insert(c)
            .clone())
    }
}

struct Block {
    rows: Vec<usize>,
    base: Vec<Vec<f64>>,
    y: Vec<f64>,
    syy: f64,
    base_gram: DMatrix<f64>,
    base_y: Vec<f64>,
}

struct BlockColumn {
    values: Vec<f64>,
    base_dot: Vec<f64>,
    y_dot: f64,
    self_dot: f64,
}

fn centered(v: Vec<f64>) -> Vec<f64> {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.into_iter().map(|x| x - m).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

type WindowKey = (usize, usize);

/// Equal-weighted R² across row blocks (one per market), computed from
/// centered cross-products so that each candidate costs a small solve.
pub struct GramObjective<'a> {
    cache: &'a ColumnCache<'a>,
    assets: Vec<String>,
    blocks: Vec<Block>,
    columns: HashMap<WindowKey, Vec<BlockColumn>>,
    cross: HashMap<(WindowKey, WindowKey), Vec<f64>>,
}

impl<'a> GramObjective<'a> {
    /// `blocks` holds row indices into the source's base panel; every asset
    /// window prepared later must be defined on all of them.
    pub fn new(
        cache: &'a ColumnCache<'a>,
        base_regressors: &[String],
        assets: &[String],
        blocks: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let panel = cache.source().base();
        let cols = base_regressors
            .iter()
            .map(|r| panel.column(r))
            .collect::<Result<Vec<_>>>()?;
        let y_all = panel.target();
        let blocks = blocks
            .into_iter()
            .map(|rows| {
                if rows.len() <= base_regressors.len() + assets.len() + 1 {
                    return Err(Error::InsufficientSample(format!(
                        "{} rows in a search block",
                        rows.len()
                    )));
                }
                let base: Vec<Vec<f64>> = cols
                    .iter()
                    .map(|c| centered(rows.iter().map(|&i| c[i]).collect()))
                    .collect();
                let y = centered(rows.iter().map(|&i| y_all[i]).collect());
                let nb = base.len();
                let base_gram = DMatrix::from_fn(nb, nb, |i, j| dot(&base[i], &base[j]));
                let base_y = base.iter().map(|b| dot(b, &y)).collect();
                Ok(Block {
                    syy: dot(&y, &y),
                    rows,
                    base,
                    y,
                    base_gram,
                    base_y,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            cache,
            assets: assets.to_vec(),
            blocks,
            columns: HashMap::new(),
            cross: HashMap::new(),
        })
    }

    fn block_columns(&self, asset: usize, window: usize) -> Result<Vec<BlockColumn>> {
        let raw = self.cache.get(&self.assets[asset], window)?;
        self.blocks
            .iter()
            .map(|b| {
                let values = b
                    .rows
                    .iter()
                    .map(|&i| {
                        raw[i].ok_or_else(|| {
                            Error::InsufficientSample(format!(
                                "{} window {window} undefined on a search row",
                                self.assets[asset]
                            ))
                        })
                    })
                    .collect::<Result<Vec<f64>>>()?;
                let values = centered(values);
                Ok(BlockColumn {
                    base_dot: b.base.iter().map(|c| dot(c, &values)).collect(),
                    y_dot: dot(&b.y, &values),
                    self_dot: dot(&values, &values),
                    values,
                })
            })
            .collect()
    }

    fn block_r2(&self, b: usize, windows: &[usize]) -> Option<f64> {
        let block = &self.blocks[b];
        let nb = block.base.len();
        let na = windows.len();
        let p = nb + na;
        let mut g = DMatrix::zeros(p, p);
        let mut c = DVector::zeros(p);
        g.view_mut((0, 0), (nb, nb)).copy_from(&block.base_gram);
        for i in 0..nb {
            c[i] = block.base_y[i];
        }
        for (i, &wi) in windows.iter().enumerate() {
            let col = &self.columns.get(&(i, wi))?[b];
            for j in 0..nb {
                g[(nb + i, j)] = col.base_dot[j];
                g[(j, nb + i)] = col.base_dot[j];
            }
            g[(nb + i, nb + i)] = col.self_dot;
            c[nb + i] = col.y_dot;
            for (j, &wj) in windows.iter().enumerate().skip(i + 1) {
                let v = self.cross.get(&((i, wi), (j, wj)))?[b];
                g[(nb + i, nb + j)] = v;
                g[(nb + j, nb + i)] = v;
            }
        }
        let d: Vec<f64> = (0..p).map(|i| g[(i, i)].sqrt()).collect();
        if d.iter().any(|x| !(*x > 0.0)) || !(block.syy > 0.0) {
            return None;
        }
        for i in 0..p {
            c[i] /= d[i];
            for j in 0..p {
                g[(i, j)] /= d[i] * d[j];
            }
        }
        let eig = SymmetricEigen::new(g.clone()).eigenvalues;
        let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0_f64), |(a, b), e| (a.min(*e), b.max(*e)));
        if !(lo > 0.0) || hi / lo > MAX_GRAM_CONDITION {
            return None;
        }
        let beta = g.cholesky()?.solve(&c);
        Some(beta.dot(&c) / block.syy)
    }
}

impl WindowObjective for GramObjective<'_> {
    fn prepare(&mut self, windows: &[Vec<usize>]) -> Result<()> {
        let new: Vec<WindowKey> = windows
            .iter()
            .enumerate()
            .flat_map(|(a, ws)| ws.iter().map(move |w| (a, *w)))
            .filter(|k| !self.columns.contains_key(k))
            .collect();
        let built = new
            .par_iter()
            .map(|&(a, w)| self.block_columns(a, w))
            .collect::<Result<Vec<_>>>()?;
        self.columns.extend(new.into_iter().zip(built));

        let mut keys: Vec<WindowKey> = self.columns.keys().copied().collect();
        keys.sort_unstable();
        let pairs: Vec<(WindowKey, WindowKey)> = keys
            .iter()
            .flat_map(|a| keys.iter().map(move |b| (*a, *b)))
            .filter(|(a, b)| a.0 < b.0 && !self.cross.contains_key(&(*a, *b)))
            .collect();
        let dots: Vec<Vec<f64>> = pairs
            .par_iter()
            .map(|(a, b)| {
                let (ca, cb) = (&self.columns[a], &self.columns[b]);
                ca.iter().zip(cb).map(|(x, y)| dot(&x.values, &y.values)).collect()
            })
            .collect();
        self.cross.extend(pairs.into_iter().zip(dots));
        Ok(())
    }

    fn value(&self, windows: &[usize]) -> Option<f64> {
        let mut total = 0.0;
        for b in 0..self.blocks.len() {
            total += self.block_r2(b, windows)?;
        }
        Some(total / self.blocks.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NestedConfig {
    pub search: SearchConfig,
    /// Regressors entering alongside the asset terms.
    pub base_regressors: Vec<String>,
    pub min_fold_rows: usize,
}

impl Default for NestedConfig {
    fn default() -> Self {
        Self {
            search: SearchConfig::default(),
            base_regressors: vec!["gbm_ois_1y".into(), "ba_over_tau".into(), "nfci".into()],
            min_fold_rows: super::MIN_FOLD_ROWS,
        }
    }
}

impl NestedConfig {
    pub fn spec(&self, name: &str, windows: &[usize]) -> Specification {
        let mut regressors = self.base_regressors.clone();
        regressors.extend(self.search.terms(windows).iter().map(AssetTerm::column_name));
        Specification {
            name: name.to_string(),
            regressors,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HorizonSelection {
    /// `None` for the full-sample selection.
    pub fold_year: Option<i32>,
    pub selected: Vec<AssetTerm>,
    pub outcome: SearchOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NestedFold {
    pub selection: HorizonSelection,
    /// Per market: baseline and selected-window holdout metrics.
    pub metrics: Vec<(Market, YearMetrics, YearMetrics)>,
}

impl NestedFold {
    pub fn year(&self) -> i32 {
        self.selection.fold_year.expect("fold selections carry a year")
    }

    /// Mean holdout R² of the selected-window spec across markets.
    pub fn ew_selected_r2(&self) -> Option<f64> {
        let v: Option<Vec<f64>> = self.metrics.iter().map(|(_, _, s)| s.oos_r2).collect();
        let v = v?;
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NestedReport {
    pub folds: Vec<NestedFold>,
    /// Per market: baseline then selected-window summaries.
    pub summaries: Vec<CvReport>,
    pub full_sample: HorizonSelection,
    pub common_rows: usize,
    pub dropped_rows: usize,
}

struct Common {
    rows: Vec<usize>,
    panel: Panel,
}

fn common_sample(cache: &ColumnCache<'_>, cfg: &SearchConfig) -> Result<Common> {
    let base = cache.source().base();
    let upper = cfg
        .assets
        .iter()
        .zip(&cfg.bounds)
        .map(|(a, (_, hi))| cache.get(a, *hi))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<usize> = (0..base.len())
        .filter(|&i| upper.iter().all(|c| c[i].is_some()))
        .collect();
    Ok(Common {
        panel: base.select(&rows),
        rows,
    })
}

fn panel_with_windows(cache: &ColumnCache<'_>, common: &Common, cfg: &SearchConfig, windows: &[usize]) -> Result<Panel> {
    let mut p = common.panel.clone();
    for t in cfg.terms(windows) {
        let col = cache.get(&t.asset, t.window)?;
        let values = common
            .rows
            .iter()
            .map(|&i| {
                col[i].ok_or_else(|| Error::InsufficientSample(format!("{} undefined on common sample", t.column_name())))
            })
            .collect::<Result<Vec<f64>>>()?;
        p.push_column(&t.column_name(), values)?;
    }
    Ok(p)
}

fn select(
    cache: &ColumnCache<'_>,
    common: &Common,
    cfg: &NestedConfig,
    markets: &[Market],
    holdout: Option<i32>,
) -> Result<HorizonSelection> {
    let blocks = markets
        .iter()
        .map(|m| {
            common
                .rows
                .iter()
                .zip(common.panel.keys())
                .filter(|(_, k)| k.market == *m && Some(k.date.year()) != holdout)
                .map(|(i, _)| *i)
                .collect()
        })
        .collect();
    let mut obj = GramObjective::new(cache, &cfg.base_regressors, &cfg.search.assets, blocks)?;
    let outcome = search_windows(&mut obj, &cfg.search)?;
    Ok(HorizonSelection {
        fold_year: holdout,
        selected: cfg.search.terms(&outcome.selected),
        outcome,
    })
}

/// Per fold: select windows on the training years, then fit the baseline
/// and the selected-window spec on the same years and score the holdout.
pub fn nested_horizon_search(
    source: &dyn PanelSource,
    baseline: &Specification,
    cfg: &NestedConfig,
    years: Option<&[i32]>,
) -> Result<NestedReport> {
    cfg.search.validate()?;
    let cache = ColumnCache::new(source);
    let common = common_sample(&cache, &cfg.search)?;
    let markets: Vec<Market> = common.panel.markets().into_iter().collect();
    if markets.is_empty() {
        return Err(Error::InsufficientSample("no rows with full slope history".into()));
    }
    let years = match years {
        Some(y) => y.to_vec(),
        None => {
            let per_market: Vec<Vec<i32>> = markets
                .iter()
                .map(|m| eligible_years(&common.panel.market(*m), cfg.min_fold_rows))
                .collect();
            per_market[0]
                .iter()
                .copied()
                .filter(|y| per_market.iter().all(|p| p.contains(y)))
                .collect()
        }
    };
    if years.len() < 2 {
        return Err(Error::InsufficientSample(format!(
            "{} eligible years for nested search; need 2",
            years.len()
        )));
    }

    let folds = years
        .par_iter()
        .map(|&year| {
            let selection = select(&cache, &common, cfg, &markets, Some(year))?;
            let windows: Vec<usize> = selection.selected.iter().map(|t| t.window).collect();
            let panel = panel_with_windows(&cache, &common, &cfg.search, &windows)?;
            let chosen = cfg.spec("selected", &windows);
            let mut metrics = Vec::new();
            let mut outcomes = Vec::new();
            for &m in &markets {
                let mp = panel.market(m);
                let (train, test) = super::split_year(&mp, year);
                let (fb, pb) = evaluate_holdout(&train, &test, baseline)?;
                let (fs, ps) = evaluate_holdout(&train, &test, &chosen)?;
                metrics.push((
                    m,
                    YearMetrics::new(year, test.target(), &pb),
                    YearMetrics::new(year, test.target(), &ps),
                ));
                let actual = test.target().to_vec();
                outcomes.push((
                    FoldOutcome {
                        year,
                        actual: actual.clone(),
                        predicted: pb,
                        coefficients: fb.coefficients,
                    },
                    FoldOutcome {
                        year,
                        actual,
                        predicted: ps,
                        coefficients: fs.coefficients,
                    },
                ));
            }
            Ok((NestedFold { selection, metrics }, outcomes))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut by_market: BTreeMap<usize, (Vec<FoldOutcome>, Vec<FoldOutcome>)> = BTreeMap::new();
    let mut nested_folds = Vec::with_capacity(folds.len());
    for (fold, outcomes) in folds {
        for (i, (b, s)) in outcomes.into_iter().enumerate() {
            let e = by_market.entry(i).or_default();
            e.0.push(b);
            e.1.push(s);
        }
        nested_folds.push(fold);
    }
    let mut summaries = Vec::new();
    for (i, (b, s)) in by_market {
        let m = markets[i];
        summaries.push(CvReport::from_folds(&baseline.name, Some(m), baseline.terms(), b, vec![]));
        let terms = {
            let mut t = vec![crate::econometrics::INTERCEPT.to_string()];
            t.extend(cfg.base_regressors.iter().cloned());
            t.extend(cfg.search.assets.iter().map(|a| format!("gbm_{}_selected", a.to_lowercase())));
            t
        };
        summaries.push(CvReport::from_folds("selected", Some(m), terms, s, vec![]));
    }
    let full_sample = select(&cache, &common, cfg, &markets, None)?;
    Ok(NestedReport {
        folds: nested_folds,
        summaries,
        full_sample,
        common_rows: common.rows.len(),
        dropped_rows: source.base().len() - common.rows.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_anchored_at_start() {
        assert_eq!(grid_points(70, (20, 130), 7).first(), Some(&21));
        assert_eq!(grid_points(70, (20, 130), 7).last(), Some(&126));
        assert!(grid_points(70, (20, 130), 7).contains(&70));
        assert_eq!(grid_points(441, (120, 550), 21).first(), Some(&126));
        assert_eq!(grid_points(441, (120, 550), 21).last(), Some(&546));
        assert_eq!(grid_points(5, (5, 5), 3), vec![5]);
    }

    #[test]
    fn cartesian_is_lexicographic() {
        let c = cartesian(&[vec![1, 2], vec![5, 6]]);
        assert_eq!(c, vec![vec![1, 5], vec![1, 6], vec![2, 5], vec![2, 6]]);
    }

    struct Quadratic {
        peak: Vec<f64>,
    }

    impl WindowObjective for Quadratic {
        fn prepare(&mut self, _: &[Vec<usize>]) -> Result<()> {
            Ok(())
        }

        fn value(&self, w: &[usize]) -> Option<f64> {
            Some(-w.iter().zip(&self.peak).map(|(a, b)| (*a as f64 - b).powi(2)).sum::<f64>())
        }
    }

    struct Flat;

    impl WindowObjective for Flat {
        fn prepare(&mut self, _: &[Vec<usize>]) -> Result<()> {
            Ok(())
        }

        fn value(&self, _: &[usize]) -> Option<f64> {
            Some(0.25)
        }
    }

    #[test]
    fn climbs_to_off_grid_peak() {
        let mut q = Quadratic {
            peak: vec![80.0, 320.0, 323.0],
        };
        let out = search_windows(&mut q, &SearchConfig::default()).unwrap();
        assert_eq!(out.selected, vec![80, 320, 323]);
        assert!(out.converged && !out.hit_boundary);
        for pair in out.trace.windows(2) {
            assert!(pair[1].objective >= pair[0].objective);
        }
        assert_eq!(out.trace[0].stage, SearchStage::Start);
    }

    #[test]
    fn flat_objective_keeps_start() {
        let out = search_windows(&mut Flat, &SearchConfig::default()).unwrap();
        assert_eq!(out.selected, vec![70, 441, 315]);
        assert!(out.converged && !out.hit_boundary);
        assert_eq!(out.iterations, 1);
        assert_eq!(out.trace.len(), 1);
    }

    #[test]
    fn boundary_and_max_iter() {
        let mut q = Quadratic {
            peak: vec![10.0, 441.0, 315.0],
        };
        let out = search_windows(&mut q, &SearchConfig::default()).unwrap();
        assert_eq!(out.selected, vec![20, 441, 315]);
        assert!(out.hit_boundary);

        let cfg = SearchConfig {
            max_iter: 2,
            ..SearchConfig::default()
        };
        let mut q = Quadratic {
            peak: vec![80.0, 330.0, 330.0],
        };
        let out = search_windows(&mut q, &cfg).unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 2);
    }
}
