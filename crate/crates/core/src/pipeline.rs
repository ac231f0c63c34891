//! Batch stages behind the command-line tool. Every stage returns a
//! [`Report`] held in memory, so a failing run writes nothing.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::econometrics::{
    fit_with_hac, pca_slopes, residualize, rotate_regressor_block, stars, FitResult,
    Specification,
};
use crate::error::{Error, Result};
use crate::features::{
    aggregate_daily, fx_neutralize, gbm_asset_term, tau_bin, AssetTerm, Panel, PanelBuilder,
    PanelSource,
};
use crate::implied_discount::{build_pairs, clean_pairs, identify_discount, median_atm_spread};
use crate::market_data::{load_option_quotes, load_series, DailySeries, Date, Market, OptionQuote, SeriesUnit};
use crate::ois_curve::{bootstrap, carry_gap_bp, curve_rows, load_ois, CarryObservation, DiscountCurve, OisQuoteSet};
use crate::validation::{bin_fit_report, horizon_scan, loyo, nested_horizon_search, CvReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Identify,
    Fit,
    Loyo,
    Scan,
    Nested,
    Pca,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Identify => "identify",
            Command::Fit => "fit",
            Command::Loyo => "loyo",
            Command::Scan => "scan",
            Command::Nested => "nested",
            Command::Pca => "pca",
            Command::Report => "report",
        }
    }
}

/// Output files by relative name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Report {
    files: BTreeMap<String, String>,
}

impl Report {
    pub fn files(&self) -> &BTreeMap<String, String> {
        &self.files
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.get(name).map(String::as_str)
    }

    pub fn insert(&mut self, name: impl Into<String>, contents: String) {
        self.files.insert(name.into(), contents);
    }

    pub fn extend(&mut self, other: Report) {
        self.files.extend(other.files);
    }

    /// Number of data rows (comment and header lines excluded) in a CSV.
    pub fn data_rows(&self, name: &str) -> Option<usize> {
        self.get(name)
            .map(|s| s.lines().filter(|l| !l.starts_with('#')).count().saturating_sub(1))
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, contents) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

/// Comment block naming the command and the resolved configuration.
fn preamble(cmd: Command, cfg: &RunConfig) -> Result<String> {
    let mut s = format!("# carrygap {}\n", cmd.name());
    for line in cfg.to_toml()?.lines() {
        s.push_str("# ");
        s.push_str(line);
        s.push('\n');
    }
    Ok(s)
}

fn csv_text<I>(preamble: &str, header: &[&str], rows: I) -> Result<String>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Numerical(format!("csv encoding: {e}"));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    let body = w
        .into_inner()
        .map_err(|e| Error::Numerical(format!("csv encoding: {e}")))?;
    Ok(format!("{preamble}{}", String::from_utf8(body).expect("csv output is utf-8")))
}

fn s<T: Display>(v: T) -> String {
    v.to_string()
}

fn opt<T: Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Option quotes by market and the OIS quote sets.
#[derive(Debug, Clone, Default)]
pub struct MarketData {
    pub quotes: BTreeMap<Market, Vec<OptionQuote>>,
    pub rejected: BTreeMap<Market, usize>,
    pub ois: Vec<OisQuoteSet>,
}

pub fn load_market_data(cfg: &RunConfig) -> Result<MarketData> {
    let ois_path = cfg.resolve(&cfg.inputs.ois);
    let ois = match load_ois(&ois_path) {
        Err(Error::EmptyFile(_)) => Vec::new(),
        r => r?,
    };
    let qpath = cfg.resolve(&cfg.inputs.option_quotes);
    let mut data = MarketData {
        ois,
        ..Default::default()
    };
    for m in Market::ALL {
        let load = load_option_quotes(&qpath, m)?;
        if load.rejected > 0 {
            log::warn!("{m}: {} malformed quote rows skipped", load.rejected);
        }
        data.rejected.insert(m, load.rejected);
        data.quotes.insert(m, load.quotes);
    }
    Ok(data)
}

/// Counts of chains lost at each identification step, per market.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IdentifyCounts {
    pub quotes: usize,
    pub rejected_quotes: usize,
    pub chains: usize,
    pub unmatched_strikes: usize,
    pub too_few_strikes: usize,
    pub failed: usize,
    pub expired: usize,
    pub identified: usize,
    pub missing_curve: usize,
    pub outside_curve: usize,
    pub carry_gaps: usize,
}

#[derive(Debug, Clone)]
pub struct Identification {
    pub market: Market,
    pub date: Date,
    pub expiry: Date,
    pub tau: f64,
    pub result: crate::implied_discount::IdentificationResult,
}

#[derive(Debug, Clone, Default)]
pub struct IdentifyOutput {
    pub identifications: Vec<Identification>,
    pub observations: Vec<CarryObservation>,
    pub curves: Vec<DiscountCurve>,
    pub failed_curve_dates: Vec<Date>,
    pub counts: BTreeMap<Market, IdentifyCounts>,
}

enum ChainOutcome {
    TooFew,
    Failed,
    Expired,
    Identified(Identification),
}

fn identify_chain(quotes: &[OptionQuote], cfg: &RunConfig) -> (usize, ChainOutcome) {
    let q = &quotes[0];
    let (pairs, unmatched) = build_pairs(quotes);
    let days = q.quote_date.days_until(q.expiry);
    if days <= 0 {
        return (unmatched, ChainOutcome::Expired);
    }
    if pairs.is_empty() {
        return (unmatched, ChainOutcome::TooFew);
    }
    let clean = clean_pairs(&pairs, &cfg.cleaning);
    if clean.is_empty() {
        return (unmatched, ChainOutcome::TooFew);
    }
    let result = identify_discount(&clean).and_then(|mut r| {
        r.ba_med_atm = median_atm_spread(&clean, r.f_hat, cfg.atm_band)?;
        Ok(r)
    });
    match result {
        Ok(result) => (
            unmatched,
            ChainOutcome::Identified(Identification {
                market: q.market,
                date: q.quote_date,
                expiry: q.expiry,
                tau: cfg.day_count.year_fraction(days),
                result,
            }),
        ),
        Err(e) => {
            log::debug!("{} {} {}: {e}", q.market, q.quote_date, q.expiry);
            (unmatched, ChainOutcome::Failed)
        }
    }
}

/// Identifies every chain and converts the successes into carry gaps.
pub fn identify_stage(data: &MarketData, cfg: &RunConfig) -> Result<IdentifyOutput> {
    let boots: Vec<(Date, Result<DiscountCurve>)> =
        data.ois.par_iter().map(|s| (s.date, bootstrap(s))).collect();
    let mut out = IdentifyOutput::default();
    for (d, c) in boots {
        match c {
            Ok(c) => out.curves.push(c),
            Err(e) => {
                log::warn!("OIS bootstrap failed on {d}: {e}");
                out.failed_curve_dates.push(d);
            }
        }
    }
    let curves: BTreeMap<Date, &DiscountCurve> = out.curves.iter().map(|c| (c.date, c)).collect();

    for (m, quotes) in &data.quotes {
        let mut counts = IdentifyCounts {
            quotes: quotes.len(),
            rejected_quotes: data.rejected.get(m).copied().unwrap_or(0),
            ..Default::default()
        };
        let mut chains: BTreeMap<(Date, Date), Vec<OptionQuote>> = BTreeMap::new();
        for q in quotes {
            chains.entry((q.quote_date, q.expiry)).or_default().push(q.clone());
        }
        counts.chains = chains.len();
        let chains: Vec<Vec<OptionQuote>> = chains.into_values().collect();
        let outcomes: Vec<(usize, ChainOutcome)> = chains.par_iter().map(|c| identify_chain(c, cfg)).collect();
        for (unmatched, o) in outcomes {
            counts.unmatched_strikes += unmatched;
            match o {
                ChainOutcome::TooFew => counts.too_few_strikes += 1,
                ChainOutcome::Failed => counts.failed += 1,
                ChainOutcome::Expired => counts.expired += 1,
                ChainOutcome::Identified(id) => {
                    counts.identified += 1;
                    let Some(curve) = curves.get(&id.date) else {
                        counts.missing_curve += 1;
                        out.identifications.push(id);
                        continue;
                    };
                    match curve.discount_at(id.tau) {
                        Ok(d) => {
                            let cg = carry_gap_bp(d, id.result.b_hat, id.tau)?;
                            counts.carry_gaps += 1;
                            out.observations.push(CarryObservation {
                                market: id.market,
                                date: id.date,
                                expiry: id.expiry,
                                tau: id.tau,
                                identification: id.result,
                                d_ois: d,
                                cg_bp: cg,
                            });
                        }
                        Err(_) => counts.outside_curve += 1,
                    }
                    out.identifications.push(id);
                }
            }
        }
        out.counts.insert(*m, counts);
    }
    Ok(out)
}

fn identify_report(cmd: Command, cfg: &RunConfig, id: &IdentifyOutput) -> Result<Report> {
    let pre = preamble(cmd, cfg)?;
    let mut r = Report::default();
    r.insert(
        "identification.csv",
        csv_text(
            &pre,
            &["market", "date", "expiry", "tau_years", "b_hat", "f_hat", "n_strikes", "flatness_rmse", "ba_med_atm"],
            id.identifications.iter().map(|i| {
                vec![
                    s(i.market),
                    s(i.date),
                    s(i.expiry),
                    s(i.tau),
                    s(i.result.b_hat),
                    s(i.result.f_hat),
                    s(i.result.n_strikes),
                    s(i.result.flatness_rmse),
                    s(i.result.ba_med_atm),
                ]
            }),
        )?,
    );
    r.insert(
        "carry_gap.csv",
        csv_text(
            &pre,
            &["market", "date", "expiry", "tau_years", "bin", "b_hat", "d_ois", "cg_bp"],
            id.observations.iter().map(|o| {
                vec![
                    s(o.market),
                    s(o.date),
                    s(o.expiry),
                    s(o.tau),
                    tau_bin(o.tau).map(|b| b.label().to_string()).unwrap_or_default(),
                    s(o.identification.b_hat),
                    s(o.d_ois),
                    s(o.cg_bp),
                ]
            }),
        )?,
    );
    let mut daily = Vec::new();
    for m in id.counts.keys() {
        if id.observations.iter().any(|o| o.market == *m) {
            let series = aggregate_daily(&id.observations, *m)?;
            daily.extend(series.iter().map(|(d, v)| vec![s(m), s(d), s(v)]));
        }
    }
    r.insert("daily_carry_gap.csv", csv_text(&pre, &["market", "date", "cg_bp"], daily)?);
    r.insert(
        "curves.csv",
        csv_text(
            &pre,
            &crate::ois_curve::CURVE_HEADER,
            id.curves.iter().flat_map(curve_rows).map(|row| row.to_vec()),
        )?,
    );
    r.insert(
        "identify_counts.csv",
        csv_text(
            &pre,
            &[
                "market", "quotes", "rejected_quotes", "chains", "unmatched_strikes", "too_few_strikes",
                "failed", "expired", "identified", "missing_curve", "outside_curve", "carry_gaps",
            ],
            id.counts.iter().map(|(m, c)| {
                vec![
                    s(m),
                    s(c.quotes),
                    s(c.rejected_quotes),
                    s(c.chains),
                    s(c.unmatched_strikes),
                    s(c.too_few_strikes),
                    s(c.failed),
                    s(c.expired),
                    s(c.identified),
                    s(c.missing_curve),
                    s(c.outside_curve),
                    s(c.carry_gaps),
                ]
            }),
        )?,
    );
    Ok(r)
}

/// Loads the regressor inputs and assembles the panel source.
pub fn panel_source(cfg: &RunConfig, id: &IdentifyOutput, ois: &[OisQuoteSet]) -> Result<PanelBuilder> {
    let mut vol = BTreeMap::new();
    for (m, p) in &cfg.inputs.vol {
        vol.insert(*m, load_series(cfg.resolve(p), SeriesUnit::IndexPoints)?);
    }
    let nfci = load_series(cfg.resolve(&cfg.inputs.nfci), SeriesUnit::IndexLevel)?;
    let dollar = match &cfg.inputs.dollar_index {
        Some(p) if !cfg.fx_neutral.is_empty() => Some(load_series(cfg.resolve(p), SeriesUnit::IndexLevel)?),
        _ => None,
    };
    let mut prices = BTreeMap::new();
    for (a, p) in &cfg.inputs.prices {
        let mut series = load_series(cfg.resolve(p), SeriesUnit::PriceLevel)?;
        if cfg.fx_neutral.contains(a) {
            let dxy = dollar.as_ref().ok_or_else(|| {
                Error::Config(format!("{a} is FX-neutralised but no dollar index is configured"))
            })?;
            series = fx_neutralize(&series, dxy)?;
        }
        prices.insert(a.clone(), series.renamed(a.clone()));
    }
    let builder = PanelBuilder::new(&id.observations, ois, &vol, &nfci, prices, &cfg.alignment)?;
    let st = builder.stats();
    if st.dropped() > 0 {
        log::warn!(
            "panel: {} rows kept, dropped {} (vol), {} (nfci), {} (ois)",
            st.rows,
            st.dropped_vol,
            st.dropped_nfci,
            st.dropped_ois
        );
    }
    Ok(builder)
}

/// Asset terms of a configured spec.
fn terms_of(cfg: &RunConfig, spec: &Specification) -> Result<Vec<AssetTerm>> {
    Ok(cfg.spec_config(&spec.name)?.assets.clone())
}

fn union_terms(cfg: &RunConfig, specs: &[Specification]) -> Result<Vec<AssetTerm>> {
    let mut t = Vec::new();
    for s in specs {
        t.extend(terms_of(cfg, s)?);
    }
    t.sort();
    t.dedup();
    Ok(t)
}

fn fit_rows(f: &FitResult, market: Market) -> Vec<Vec<String>> {
    f.terms
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let se = f.hac_se.as_ref().map(|v| v[i]);
            vec![
                f.spec_name.clone(),
                s(market),
                t.clone(),
                s(f.coefficients[i]),
                opt(se),
                se.map(|se| stars(f.coefficients[i], se).to_string()).unwrap_or_default(),
            ]
        })
        .collect()
}

fn markets_of(p: &Panel) -> Vec<Market> {
    p.markets().into_iter().collect()
}

/// Per spec and market: HAC fit on the rows where the spec's terms exist.
pub fn fit_all(
    source: &dyn PanelSource,
    cfg: &RunConfig,
    specs: &[Specification],
) -> Result<Vec<(Specification, Market, Result<FitResult>)>> {
    let mut out = Vec::new();
    for spec in specs {
        let (panel, _) = source.panel_with(&terms_of(cfg, spec)?)?;
        let markets = markets_of(source.base());
        let fits: Vec<_> = markets
            .par_iter()
            .map(|m| (spec.clone(), *m, fit_with_hac(&panel.market(*m), spec, &cfg.hac)))
            .collect();
        out.extend(fits);
    }
    Ok(out)
}

fn fit_report(cmd: Command, cfg: &RunConfig, source: &PanelBuilder, specs: &[Specification]) -> Result<Report> {
    let pre = preamble(cmd, cfg)?;
    let fits = fit_all(source, cfg, specs)?;
    let mut coef = Vec::new();
    let mut metrics = Vec::new();
    let mut errors = Vec::new();
    for (spec, m, f) in &fits {
        match f {
            Ok(f) => {
                coef.extend(fit_rows(f, *m));
                metrics.push(vec![
                    spec.name.clone(),
                    s(m),
                    s(f.r2),
                    s(f.adj_r2),
                    s(f.rmse_bp),
                    s(f.mae_bp),
                    s(f.n_obs),
                    s(f.n_dates),
                ]);
            }
            Err(e) => {
                log::warn!("fit {} {m}: {e}", spec.name);
                errors.push(vec![spec.name.clone(), s(m), format!("{:?}", e.kind()).to_lowercase(), e.to_string()]);
            }
        }
    }
    let mut r = Report::default();
    r.insert(
        "coefficients.csv",
        csv_text(&pre, &["spec", "market", "term", "coef", "hac_se", "stars"], coef)?,
    );
    r.insert(
        "metrics.csv",
        csv_text(&pre, &["spec", "market", "r2", "adj_r2", "rmse_bp", "mae_bp", "n_obs", "n_dates"], metrics)?,
    );
    r.insert("fit_errors.csv", csv_text(&pre, &["spec", "market", "kind", "message"], errors)?);

    let (panel, _) = source.panel_with(&union_terms(cfg, specs)?)?;
    let mut buf = Vec::new();
    panel.write_csv(&mut buf)?;
    r.insert("panel.csv", format!("{pre}{}", String::from_utf8(buf).expect("utf-8")));

    let mut bins = Vec::new();
    let base = cfg.spec_config(&cfg.scan.baseline)?.specification()?;
    for spec in specs.iter().filter(|s| s.name != base.name) {
        let (panel, _) = source.panel_with(&terms_of(cfg, spec)?)?;
        for m in markets_of(&panel) {
            match bin_fit_report(&panel.market(m), &base, spec) {
                Ok(b) => bins.extend(b.rows.iter().map(|c| {
                    vec![
                        base.name.clone(),
                        spec.name.clone(),
                        s(m),
                        c.bin.label().to_string(),
                        s(c.n_obs),
                        opt(c.r2_a),
                        opt(c.r2_b),
                        opt(c.delta_r2()),
                        s(c.delta_rmse()),
                        s(c.delta_mae()),
                    ]
                })),
                Err(e) => log::warn!("bin report {} {m}: {e}", spec.name),
            }
        }
    }
    r.insert(
        "bins.csv",
        csv_text(
            &pre,
            &["spec_a", "spec_b", "market", "bin", "n_obs", "r2_a", "r2_b", "delta_r2", "delta_rmse", "delta_mae"],
            bins,
        )?,
    );
    Ok(r)
}

/// LOYO per configured spec and market, on the rows where every compared
/// spec is defined.
pub fn loyo_all(source: &dyn PanelSource, cfg: &RunConfig, specs: &[Specification]) -> Result<Vec<CvReport>> {
    let (panel, _) = source.panel_with(&union_terms(cfg, specs)?)?;
    let mut out = Vec::new();
    for spec in specs {
        for m in markets_of(&panel) {
            let p = panel.market(m);
            let years = if cfg.cv.years.is_empty() {
                crate::validation::eligible_years(&p, cfg.cv.min_fold_rows)
            } else {
                cfg.cv.years.clone()
            };
            let mut rep = loyo(&p, spec, Some(&years))?;
            rep.market = Some(m);
            out.push(rep);
        }
    }
    Ok(out)
}

fn cv_rows(reps: &[CvReport]) -> (Vec<Vec<String>>, Vec<Vec<String>>) {
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for r in reps {
        let m = opt(r.market);
        for y in &r.per_year {
            rows.push(vec![
                r.spec_name.clone(),
                m.clone(),
                s(y.year),
                opt(y.oos_r2),
                s(y.rmse_bp),
                opt(y.corr),
                s(y.n_obs),
            ]);
        }
        rows.push(vec![r.spec_name.clone(), m.clone(), "mean".into(), opt(r.mean_r2), s(r.mean_rmse_bp), opt(r.mean_corr), s(r.n_obs)]);
        rows.push(vec![r.spec_name.clone(), m.clone(), "median".into(), opt(r.median_r2), String::new(), String::new(), s(r.n_obs)]);
        rows.push(vec![r.spec_name.clone(), m.clone(), "pooled".into(), opt(r.pooled_r2), String::new(), String::new(), s(r.n_obs)]);
        summary.push(vec![
            r.spec_name.clone(),
            m,
            s(r.per_year.len()),
            opt(r.mean_r2),
            opt(r.median_r2),
            opt(r.pooled_r2),
            s(r.mean_rmse_bp),
            opt(r.mean_corr),
            s(r.years_positive),
            s(r.n_obs),
            r.skipped_years.iter().map(|y| y.to_string()).collect::<Vec<_>>().join(" "),
        ]);
    }
    (rows, summary)
}

const CV_HEADER: [&str; 7] = ["spec", "market", "year", "oos_r2", "rmse_bp", "corr", "n_obs"];
const CV_SUMMARY_HEADER: [&str; 11] = [
    "spec", "market", "n_years", "mean_r2", "median_r2", "pooled_r2", "mean_rmse_bp", "mean_corr",
    "years_positive", "n_obs", "skipped_years",
];

fn loyo_report(cmd: Command, cfg: &RunConfig, source: &PanelBuilder) -> Result<Report> {
    let pre = preamble(cmd, cfg)?;
    let specs = cfg.selected_specs(&cfg.cv.specs)?;
    let reps = loyo_all(source, cfg, &specs)?;
    let (rows, summary) = cv_rows(&reps);
    let mut r = Report::default();
    r.insert("cv.csv", csv_text(&pre, &CV_HEADER, rows)?);
    r.insert("cv_summary.csv", csv_text(&pre, &CV_SUMMARY_HEADER, summary)?);
    Ok(r)
}

fn scan_report(cmd: Command, cfg: &RunConfig, source: &PanelBuilder) -> Result<Report> {
    let pre = preamble(cmd, cfg)?;
    let base = cfg.spec_config(&cfg.scan.baseline)?.specification()?;
    let markets = markets_of(source.base());
    let mut rows = Vec::new();
    let mut dropped = Vec::new();
    for g in &cfg.scan.grids {
        let scan = horizon_scan(source, &g.asset, &g.windows(), &base, &markets)?;
        rows.extend(scan.points.iter().map(|p| {
            vec![
                scan.asset.clone(),
                s(p.window),
                s(p.market),
                s(p.delta_r2),
                s(p.base_r2),
                s(p.r2),
                s(p.n_obs),
                s(p.rank_deficient),
            ]
        }));
        dropped.extend(scan.dropped_windows.iter().map(|w| vec![scan.asset.clone(), s(w)]));
    }
    let mut r = Report::default();
    r.insert(
        "scan.csv",
        csv_text(&pre, &["asset", "window", "market", "delta_r2", "base_r2", "r2", "n_obs", "rank_deficient"], rows)?,
    );
    r.insert("scan_dropped.csv", csv_text(&pre, &["asset", "window"], dropped)?);
    Ok(r)
}

fn nested_report(cmd: Command, cfg: &RunConfig, source: &PanelBuilder) -> Result<Report> {
    let pre = preamble(cmd, cfg)?;
    let base = cfg.spec_config(&cfg.scan.baseline)?.specification()?;
    let years = (!cfg.cv.years.is_empty()).then_some(cfg.cv.years.as_slice());
    let rep = nested_horizon_search(source, &base, &cfg.nested, years)?;
    let assets: Vec<String> = cfg.nested.search.assets.iter().map(|a| a.to_lowercase()).collect();
    let markets: Vec<Market> = rep
        .folds
        .first()
        .map(|f| f.metrics.iter().map(|(m, _, _)| *m).collect())
        .unwrap_or_default();

    let mut header: Vec<String> = vec!["year".into()];
    header.extend(assets.iter().cloned());
    for m in &markets {
        let m = m.as_str().to_lowercase();
        header.push(format!("{m}_base"));
        header.push(format!("{m}_3etf"));
    }
    header.push("ew_3etf".into());
    let rows = rep.folds.iter().map(|f| {
        let mut row = vec![s(f.year())];
        row.extend(f.selection.selected.iter().map(|t| s(t.window)));
        for (_, b, sel) in &f.metrics {
            row.push(opt(b.oos_r2));
            row.push(opt(sel.oos_r2));
        }
        row.push(opt(f.ew_selected_r2()));
        row
    });
    let header_ref: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut r = Report::default();
    r.insert("nested.csv", csv_text(&pre, &header_ref, rows)?);

    let mut sel_header: Vec<String> = vec!["fold".into()];
    sel_header.extend(assets.iter().cloned());
    sel_header.extend(
        ["objective", "converged", "hit_boundary", "iterations", "evaluations", "skipped"].map(String::from),
    );
    let selections = rep
        .folds
        .iter()
        .map(|f| &f.selection)
        .chain(std::iter::once(&rep.full_sample));
    let mut sel_rows = Vec::new();
    let mut trace_rows = Vec::new();
    for sel in selections {
        let fold = sel.fold_year.map(|y| y.to_string()).unwrap_or_else(|| "full".into());
        let o = &sel.outcome;
        let mut row = vec![fold.clone()];
        row.extend(o.selected.iter().map(|w| s(w)));
        row.extend([
            s(o.objective),
            s(o.converged),
            s(o.hit_boundary),
            s(o.iterations),
            s(o.evaluations),
            s(o.skipped),
        ]);
        sel_rows.push(row);
        for (i, t) in o.trace.iter().enumerate() {
            let mut row = vec![fold.clone(), s(i), format!("{:?}", t.stage).to_lowercase()];
            row.extend(t.windows.iter().map(|w| s(w)));
            row.push(s(t.objective));
            trace_rows.push(row);
        }
    }
    let h: Vec<&str> = sel_header.iter().map(String::as_str).collect();
    r.insert("nested_selection.csv", csv_text(&pre, &h, sel_rows)?);
    let mut th: Vec<String> = ["fold", "step", "stage"].map(String::from).to_vec();
    th.extend(assets.iter().cloned());
    th.push("objective".into());
    let h: Vec<&str> = th.iter().map(String::as_str).collect();
    r.insert("nested_trace.csv", csv_text(&pre, &h, trace_rows)?);
    let (cv, summary) = cv_rows(&rep.summaries);
    r.insert("nested_cv.csv", csv_text(&pre, &CV_HEADER, cv)?);
    r.insert("nested_summary.csv", csv_text(&pre, &CV_SUMMARY_HEADER, summary)?);
    r.insert(
        "nested_sample.csv",
        csv_text(&pre, &["common_rows", "dropped_rows"], [vec![s(rep.common_rows), s(rep.dropped_rows)]])?,
    );
    Ok(r)
}

/// Principal components of a spec's asset slopes plus the rotated and
/// residualized refits.
pub struct PcaOutput {
    pub spec: Specification,
    pub terms: Vec<AssetTerm>,
    pub pca: crate::econometrics::PcaResult,
    /// `weights[(j, k)]` maps asset term `j` into component `k`.
    pub weights: DMatrix<f64>,
    pub fits: Vec<(String, Market, FitResult)>,
    pub first_stage: Vec<(AssetTerm, f64)>,
}

/// Gbm columns of the component scores: loadings divided by the slope sds,
/// so each column is the path-risk term of one unit-variance component
/// net of its mean.
pub fn pca_stage(source: &PanelBuilder, cfg: &RunConfig) -> Result<PcaOutput> {
    let spec = cfg.spec_config(&cfg.pca.spec)?.specification()?;
    let terms = cfg.spec_config(&cfg.pca.spec)?.assets.clone();
    if terms.len() < 2 {
        return Err(Error::Config(format!("pca spec `{}` needs at least two asset terms", spec.name)));
    }
    let slopes = terms
        .iter()
        .map(|t| source.slope_series(&t.asset, t.window)?.to_series())
        .collect::<Result<Vec<DailySeries>>>()?;
    let refs: Vec<&DailySeries> = slopes.iter().collect();
    let pca = pca_slopes(&refs)?;
    let k = terms.len();
    let weights = DMatrix::from_fn(k, k, |j, c| pca.loadings[(j, c)] / pca.sds[j]);

    let block: Vec<String> = terms.iter().map(AssetTerm::column_name).collect();
    let pc_names: Vec<String> = (1..=k).map(|i| format!("gbm_pc{i}")).collect();
    let rotated_spec = spec.replace_block(format!("{}_pca", spec.name), &block, &pc_names)?;
    let (panel, _) = source.panel_with(&terms)?;
    let rotated = rotate_regressor_block(&panel, &block, &weights, &pc_names)?;

    let mut first_stage = Vec::new();
    let mut resid_cols = Vec::new();
    for (i, t) in terms.iter().enumerate() {
        let others: Vec<&DailySeries> = (0..k).filter(|&j| j != i).map(|j| &slopes[j]).collect();
        let (res, r2) = residualize(&slopes[i], &others)?;
        first_stage.push((t.clone(), r2));
        resid_cols.push(res);
    }
    let resid_names: Vec<String> = terms
        .iter()
        .map(|t| format!("gbm_{}_{}_resid", t.asset.to_lowercase(), t.window))
        .collect();
    let resid_spec = spec.replace_block(format!("{}_resid", spec.name), &block, &resid_names)?;
    let rows = source.rows();
    let cols: Vec<Vec<Option<f64>>> = resid_cols
        .iter()
        .map(|res| {
            rows.iter()
                .map(|r| res.get(r.date).map(|b| gbm_asset_term(b, r.vol, r.tau)).transpose())
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let keep: Vec<usize> = (0..rows.len()).filter(|&i| cols.iter().all(|c| c[i].is_some())).collect();
    let mut resid_panel = source.base().select(&keep);
    for (name, c) in resid_names.iter().zip(&cols) {
        resid_panel.push_column(name, keep.iter().map(|&i| c[i].expect("kept")).collect())?;
    }

    let mut fits = Vec::new();
    for m in markets_of(&panel) {
        fits.push((spec.name.clone(), m, fit_with_hac(&panel.market(m), &spec, &cfg.hac)?));
        fits.push((rotated_spec.name.clone(), m, fit_with_hac(&rotated.market(m), &rotated_spec, &cfg.hac)?));
        let rp = resid_panel.market(m);
        match fit_with_hac(&rp, &resid_spec, &cfg.hac) {
            Ok(f) => fits.push((resid_spec.name.clone(), m, f)),
            Err(e) => log::warn!("residualized fit {m}: {e}"),
        }
    }
    Ok(PcaOutput {
        spec,
        terms,
        pca,
        weights,
        fits,
        first_stage,
    })
}

fn pca_report(cmd: Command, cfg: &RunConfig, source: &PanelBuilder) -> Result<Report> {
    let pre = preamble(cmd, cfg)?;
    let out = pca_stage(source, cfg)?;
    let k = out.terms.len();
    let mut header: Vec<String> = ["component", "eigenvalue", "variance_share"].map(String::from).to_vec();
    header.extend(out.terms.iter().map(|t| format!("loading_{}", t.column_name())));
    let rows = (0..k).map(|c| {
        let mut row = vec![format!("pc{}", c + 1), s(out.pca.eigenvalues[c]), s(out.pca.variance_shares[c])];
        row.extend((0..k).map(|j| s(out.pca.loadings[(j, c)])));
        row
    });
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut r = Report::default();
    r.insert("pca.csv", csv_text(&pre, &h, rows)?);
    r.insert(
        "pca_fit.csv",
        csv_text(
            &pre,
            &["spec", "market", "r2", "adj_r2", "rmse_bp", "n_obs"],
            out.fits
                .iter()
                .map(|(n, m, f)| vec![n.clone(), s(m), s(f.r2), s(f.adj_r2), s(f.rmse_bp), s(f.n_obs)]),
        )?,
    );
    let coef: Vec<Vec<String>> = out.fits.iter().flat_map(|(_, m, f)| fit_rows(f, *m)).collect();
    r.insert(
        "pca_coefficients.csv",
        csv_text(&pre, &["spec", "market", "term", "coef", "hac_se", "stars"], coef)?,
    );
    r.insert(
        "residualization.csv",
        csv_text(
            &pre,
            &["asset", "window", "first_stage_r2"],
            out.first_stage
                .iter()
                .map(|(t, r2)| vec![t.asset.clone(), s(t.window), s(r2)]),
        )?,
    );
    Ok(r)
}

/// Runs one command end to end and returns its report.
pub fn run(cmd: Command, cfg: &RunConfig, spec_names: &[String]) -> Result<Report> {
    let specs = cfg.selected_specs(spec_names)?;
    let data = load_market_data(cfg)?;
    let id = identify_stage(&data, cfg)?;
    let mut report = identify_report(cmd, cfg, &id)?;
    if cmd == Command::Identify {
        return Ok(report);
    }
    if id.observations.is_empty() {
        log::warn!("no carry-gap observations; {} produces an empty report", cmd.name());
        return Ok(report);
    }
    let source = panel_source(cfg, &id, &data.ois)?;
    if matches!(cmd, Command::Fit | Command::Report) {
        report.extend(fit_report(cmd, cfg, &source, &specs)?);
    }
    if matches!(cmd, Command::Loyo | Command::Report) {
        report.extend(loyo_report(cmd, cfg, &source)?);
    }
    if matches!(cmd, Command::Scan | Command::Report) {
        report.extend(scan_report(cmd, cfg, &source)?);
    }
    if matches!(cmd, Command::Nested | Command::Report) {
        report.extend(nested_report(cmd, cfg, &source)?);
    }
    if matches!(cmd, Command::Pca | Command::Report) {
        report.extend(pca_report(cmd, cfg, &source)?);
    }
    Ok(report)
}
