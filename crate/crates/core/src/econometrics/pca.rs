use std::collections::BTreeSet;

use nalgebra::{DMatrix, SymmetricEigen};

use super::ols::{least_squares, MAX_CONDITION};
use crate::error::{Error, Result};
use crate::features::Panel;
use crate::market_data::{DailySeries, Date, SeriesUnit};

#[derive(Debug, Clone, PartialEq)]
pub struct PcaResult {
    pub names: Vec<String>,
    pub dates: Vec<Date>,
    pub means: Vec<f64>,
    /// Population standard deviations used for standardization.
    pub sds: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    /// Column `k` holds the loadings of component `k`.
    pub loadings: DMatrix<f64>,
    pub variance_shares: Vec<f64>,
    /// Row per date, column per component.
    pub scores: DMatrix<f64>,
}

/// Values of every series on the dates all of them share.
pub fn align_common(series: &[&DailySeries]) -> (Vec<Date>, DMatrix<f64>) {
    let mut common: Option<BTreeSet<Date>> = None;
    for s in series {
        let d: BTreeSet<Date> = s.dates().iter().copied().collect();
        common = Some(match common {
            None => d,
            Some(c) => c.intersection(&d).copied().collect(),
        });
    }
    let dates: Vec<Date> = common.unwrap_or_default().into_iter().collect();
    let m = DMatrix::from_fn(dates.len(), series.len(), |i, j| {
        series[j].get(dates[i]).expect("common date")
    });
    (dates, m)
}

pub fn pca_slopes(series: &[&DailySeries]) -> Result<PcaResult> {
    let k = series.len();
    if k < 2 {
        return Err(Error::InvalidInput("PCA needs at least two series".into()));
    }
    let (dates, x) = align_common(series);
    let n = dates.len();
    if n < 4 {
        return Err(Error::InsufficientSample(format!("{n} common dates for PCA; need 4")));
    }
    let nf = n as f64;
    let mut means = Vec::with_capacity(k);
    let mut sds = Vec::with_capacity(k);
    let mut z = x.clone();
    for j in 0..k {
        let c = x.column(j);
        let m = c.sum() / nf;
        let sd = (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / nf).sqrt();
        if !(sd > 0.0) {
            return Err(Error::Numerical(format!("series `{}` is constant", series[j].name())));
        }
        z.column_mut(j).apply(|v| *v = (*v - m) / sd);
        means.push(m);
        sds.push(sd);
    }
    let corr = (z.transpose() * &z) / nf;
    let eig = SymmetricEigen::new(corr);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let mut loadings = DMatrix::zeros(k, k);
    for (c, &i) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(i);
        let big = v.iter().copied().fold(0.0_f64, |acc, e| if e.abs() > acc.abs() { e } else { acc });
        let sign = if big < 0.0 { -1.0 } else { 1.0 };
        loadings.set_column(c, &(v * sign));
    }
    let total: f64 = eigenvalues.iter().sum();
    let variance_shares = eigenvalues.iter().map(|l| l / total).collect();
    let scores = &z * &loadings;
    Ok(PcaResult {
        names: series.iter().map(|s| s.name().to_string()).collect(),
        dates,
        means,
        sds,
        eigenvalues,
        loadings,
        variance_shares,
        scores,
    })
}

/// Replaces `block` with `names.len()` columns, `new_k = sum_j block_j * weights[j, k]`.
pub fn rotate_regressor_block(
    panel: &Panel,
    block: &[String],
    weights: &DMatrix<f64>,
    names: &[String],
) -> Result<Panel> {
    let k = block.len();
    if weights.shape() != (k, k) || names.len() != k {
        return Err(Error::InvalidInput(format!(
            "rotation of {k} columns needs a {k}x{k} matrix and {k} names"
        )));
    }
    let sv = weights.singular_values();
    let (smax, smin) = sv.iter().fold((0.0_f64, f64::INFINITY), |(a, b), s| (a.max(*s), b.min(*s)));
    if !(smin > 0.0) || smax / smin > MAX_CONDITION {
        return Err(Error::Numerical("rotation matrix is singular".into()));
    }
    let cols = block
        .iter()
        .map(|b| panel.column(b).map(<[f64]>::to_vec))
        .collect::<Result<Vec<_>>>()?;
    let mut out = panel.clone();
    for b in block {
        out.remove_column(b)?;
    }
    for (c, name) in names.iter().enumerate() {
        let values = (0..panel.len())
            .map(|i| (0..k).map(|j| cols[j][i] * weights[(j, c)]).sum())
            .collect();
        out.push_column(name, values)?;
    }
    Ok(out)
}

/// Residual of `target` on `others` plus an intercept over the common dates,
/// and the first-stage R².
pub fn residualize(target: &DailySeries, others: &[&DailySeries]) -> Result<(DailySeries, f64)> {
    let mut all = vec![target];
    all.extend_from_slice(others);
    let (dates, m) = align_common(&all);
    let n = dates.len();
    if n < 4 {
        return Err(Error::InsufficientSample(format!("{n} common dates; need 4")));
    }
    let p = others.len() + 1;
    let x = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { m[(i, j)] });
    let y: Vec<f64> = m.column(0).iter().copied().collect();
    let names: Vec<String> = std::iter::once("const".to_string())
        .chain(others.iter().map(|s| s.name().to_string()))
        .collect();
    let ls = least_squares(&x, &y, &names)?;
    let mean = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let sse: f64 = ls.residuals.iter().map(|e| e * e).sum();
    let r2 = if sst > 0.0 { 1.0 - sse / sst } else { 1.0 };
    let resid = DailySeries::new(
        format!("{}_resid", target.name()),
        dates,
        ls.residuals,
        SeriesUnit::IndexLevel,
    )?;
    Ok((resid, r2))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(name: &str, values: Vec<f64>) -> DailySeries {
        let dates = (0..values.len()).map(|i| Date::from_ordinal(18000 + i as i32)).collect();
        DailySeries::new(name, dates, values, SeriesUnit::IndexLevel).unwrap()
    }

    #[test]
    fn identical_series() {
        let v: Vec<f64> = (0..20).map(|i| (i as f64).sin()).collect();
        let a = s("a", v.clone());
        let r = pca_slopes(&[&a, &s("b", v.clone()), &s("c", v)]).unwrap();
        assert!((r.variance_shares[0] - 1.0).abs() < 1e-12);
        assert!(r.variance_shares[1].abs() < 1e-12);
        // Equal loadings, positive by the sign convention.
        for j in 0..3 {
            assert!((r.loadings[(j, 0)] - 1.0 / 3f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn orthogonal_series() {
        let a = s("a", vec![1.0, -1.0, 1.0, -1.0]);
        let b = s("b", vec![1.0, 1.0, -1.0, -1.0]);
        let c = s("c", vec![1.0, -1.0, -1.0, 1.0]);
        let r = pca_slopes(&[&a, &b, &c]).unwrap();
        for share in &r.variance_shares {
            assert!((share - 1.0 / 3.0).abs() < 1e-12);
        }
        let g = r.loadings.transpose() * &r.loadings;
        assert!((g - DMatrix::identity(3, 3)).abs().max() < 1e-12);
        assert!(pca_slopes(&[&a, &s("b", vec![1.0, 2.0, 3.0])]).is_err());
    }

    #[test]
    fn residualize_exact_and_orthogonal() {
        let a: Vec<f64> = (0..30).map(|i| (i as f64 * 0.4).sin()).collect();
        let b: Vec<f64> = (0..30).map(|i| (i as f64 * 0.9).cos()).collect();
        let t: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 1.0 + 2.0 * x - y).collect();
        let (sa, sb) = (s("a", a.clone()), s("b", b.clone()));
        let (res, r2) = residualize(&s("t", t), &[&sa, &sb]).unwrap();
        assert!((r2 - 1.0).abs() < 1e-12);
        assert!(res.values().iter().all(|e| e.abs() < 1e-12));

        let w: Vec<f64> = (0..30).map(|i| ((i * 17 % 11) as f64).sqrt()).collect();
        let (res, _) = residualize(&s("w", w), &[&sa, &sb]).unwrap();
        let e = res.values();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for reg in [&a, &b] {
            let dot: f64 = e.iter().zip(reg.iter()).map(|(x, y)| x * y).sum();
            assert!(dot.abs() <= 1e-8 * norm(e) * norm(reg));
        }
        assert!(e.iter().sum::<f64>().abs() < 1e-10);
    }
}
