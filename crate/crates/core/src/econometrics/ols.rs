use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Condition number above which a design is treated as rank deficient.
pub const MAX_CONDITION: f64 = 1e10;

/// Householder least squares on unit-norm columns.
#[derive(Debug, Clone)]
pub(crate) struct LeastSquares {
    pub beta: Vec<f64>,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    pub condition: f64,
    /// `(X'X)^{-1}` in the original column units.
    pub xtx_inv: DMatrix<f64>,
}

fn column_scales(x: &DMatrix<f64>) -> Vec<f64> {
    x.column_iter().map(|c| c.norm()).collect()
}

/// Upper-triangular `R` from the column-scaled design, plus the scales.
/// Fails with the offending column names when the condition number of `R`
/// exceeds [`MAX_CONDITION`].
pub(crate) fn scaled_qr(
    x: &DMatrix<f64>,
    names: &[String],
) -> Result<(DMatrix<f64>, DMatrix<f64>, Vec<f64>, f64)> {
    let p = x.ncols();
    let scales = column_scales(x);
    let zero: Vec<String> = scales
        .iter()
        .zip(names)
        .filter(|(s, _)| !(**s > 0.0) || !s.is_finite())
        .map(|(_, n)| n.clone())
        .collect();
    if !zero.is_empty() {
        return Err(Error::RankDeficient {
            condition: f64::INFINITY,
            columns: zero,
        });
    }
    let mut xs = x.clone();
    for (j, s) in scales.iter().enumerate() {
        xs.column_mut(j).unscale_mut(*s);
    }
    let qr = xs.qr();
    let r = qr.r();
    let svd = r.clone().svd(false, true);
    let sv = &svd.singular_values;
    let (mut smax, mut smin, mut imin) = (0.0_f64, f64::INFINITY, 0);
    for (i, s) in sv.iter().enumerate() {
        smax = smax.max(*s);
        if *s < smin {
            smin = *s;
            imin = i;
        }
    }
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        let v_t = svd.v_t.expect("requested");
        let columns = (0..p)
            .filter(|&j| v_t[(imin, j)].abs() > 0.1)
            .map(|j| names[j].clone())
            .collect();
        return Err(Error::RankDeficient { condition, columns });
    }
    Ok((qr.q(), r, scales, condition))
}

/// `(R'R)^{-1}` mapped back to original units.
pub(crate) fn bread(r: &DMatrix<f64>, scales: &[f64]) -> Result<DMatrix<f64>> {
    let p = r.ncols();
    let r_inv = r
        .clone()
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| Error::Numerical("singular triangular factor".into()))?;
    let mut b = &r_inv * r_inv.transpose();
    for i in 0..p {
        for j in 0..p {
            b[(i, j)] /= scales[i] * scales[j];
        }
    }
    Ok(b)
}

pub(crate) fn least_squares(x: &DMatrix<f64>, y: &[f64], names: &[String]) -> Result<LeastSquares> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::InvalidInput(format!("{} targets for {n} rows", y.len())));
    }
    let (q, r, scales, condition) = scaled_qr(x, names)?;
    let yv = DVector::from_column_slice(y);
    let qty = q.transpose() * &yv;
    let bs = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Numerical("singular triangular factor".into()))?;
    let beta: Vec<f64> = (0..p).map(|j| bs[j] / scales[j]).collect();
    let fitted: Vec<f64> = (0..n)
        .map(|i| (0..p).map(|j| x[(i, j)] * beta[j]).sum())
        .collect();
    let residuals = y.iter().zip(&fitted).map(|(a, f)| a - f).collect();
    Ok(LeastSquares {
        beta,
        fitted,
        residuals,
        condition,
        xtx_inv: bread(&r, &scales)?,
    })
}
