use rayon::prelude::*;

use crate::econometrics::{ols_fit, Specification};
use crate::error::{Error, Result};
use crate::features::{AssetTerm, PanelSource};
use crate::market_data::Market;

#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint {
    pub market: Market,
    pub window: usize,
    pub n_obs: usize,
    pub base_r2: f64,
    pub r2: f64,
    pub delta_r2: f64,
    /// The augmented design was rank deficient; `delta_r2` is reported as 0.
    pub rank_deficient: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HorizonScan {
    pub asset: String,
    pub windows: Vec<usize>,
    /// Windows without any computable slope on the panel dates.
    pub dropped_windows: Vec<usize>,
    pub points: Vec<ScanPoint>,
}

/// Incremental R² of one asset term over `baseline`, window by window, on
/// the rows where every scanned window is computable.
pub fn horizon_scan(
    source: &dyn PanelSource,
    asset: &str,
    windows: &[usize],
    baseline: &Specification,
    markets: &[Market],
) -> Result<HorizonScan> {
    let columns = windows
        .par_iter()
        .map(|&w| source.asset_column(asset, w))
        .collect::<Result<Vec<_>>>()?;
    let (mut kept, mut dropped) = (Vec::new(), Vec::new());
    for (w, c) in windows.iter().zip(columns) {
        if c.iter().any(Option::is_some) {
            kept.push((*w, c));
        } else {
            log::warn!("scan {asset}: window {w} exceeds the available history, dropped");
            dropped.push(*w);
        }
    }
    let base = source.base();
    let common: Vec<usize> = (0..base.len())
        .filter(|&i| kept.iter().all(|(_, c)| c[i].is_some()))
        .collect();
    let mut panel = base.select(&common);
    for (w, c) in &kept {
        let name = AssetTerm::new(asset, *w).column_name();
        panel.push_column(&name, common.iter().map(|&i| c[i].expect("common")).collect())?;
    }

    let mut points = Vec::new();
    for &market in markets {
        let sub = panel.market(market);
        if sub.is_empty() {
            continue;
        }
        let base_r2 = ols_fit(&sub, baseline)?.r2;
        let per_window = kept
            .par_iter()
            .map(|(w, _)| {
                let col = AssetTerm::new(asset, *w).column_name();
                let spec = baseline.plus(format!("{}+{col}", baseline.name), &col);
                match ols_fit(&sub, &spec) {
                    Ok(f) => Ok(ScanPoint {
                        market,
                        window: *w,
                        n_obs: f.n_obs,
                        base_r2,
                        r2: f.r2,
                        delta_r2: f.r2 - base_r2,
                        rank_deficient: false,
                    }),
                    Err(Error::RankDeficient { .. }) => Ok(ScanPoint {
                        market,
                        window: *w,
                        n_obs: sub.len(),
                        base_r2,
                        r2: base_r2,
                        delta_r2: 0.0,
                        rank_deficient: true,
                    }),
                    Err(e) => Err(e),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        points.extend(per_window);
    }
    Ok(HorizonScan {
        asset: asset.to_string(),
        windows: kept.into_iter().map(|(w, _)| w).collect(),
        dropped_windows: dropped,
        points,
    })
}
