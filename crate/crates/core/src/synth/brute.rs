use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::market_data::Date;

/// Gauss-Jordan inverse with partial pivoting.
pub fn gauss_jordan_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut inv = DMatrix::<f64>::identity(n, n);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[(i, col)].abs().total_cmp(&m[(j, col)].abs()))
            .expect("non-empty");
        if m[(pivot, col)] == 0.0 {
            return Err(Error::Numerical("singular matrix".into()));
        }
        m.swap_rows(col, pivot);
        inv.swap_rows(col, pivot);
        let d = m[(col, col)];
        for j in 0..n {
            m[(col, j)] /= d;
            inv[(col, j)] /= d;
        }
        for i in 0..n {
            if i != col {
                let f = m[(i, col)];
                if f != 0.0 {
                    for j in 0..n {
                        m[(i, j)] -= f * m[(col, j)];
                        inv[(i, j)] -= f * inv[(col, j)];
                    }
                }
            }
        }
    }
    Ok(inv)
}

/// Reference date-based Newey-West covariance: normal equations for the
/// bread and a full double sum over date pairs for the meat.
pub fn brute_hac(x: &DMatrix<f64>, residuals: &[f64], dates: &[Date], lag: usize) -> Result<DMatrix<f64>> {
    let (n, p) = x.shape();
    let mut uniq: Vec<Date> = dates.to_vec();
    uniq.sort();
    uniq.dedup();
    let t = uniq.len();
    if t < lag + 2 {
        return Err(Error::InsufficientSample(format!("{t} dates for lag {lag}")));
    }
    let mut s = vec![vec![0.0; p]; t];
    for r in 0..n {
        let d = uniq.binary_search(&dates[r]).expect("present");
        for j in 0..p {
            s[d][j] += x[(r, j)] * residuals[r];
        }
    }
    let mut meat = DMatrix::<f64>::zeros(p, p);
    for a in 0..t {
        for b in 0..t {
            let l = a.abs_diff(b);
            if l > lag {
                continue;
            }
            let w = 1.0 - l as f64 / (lag as f64 + 1.0);
            for i in 0..p {
                for j in 0..p {
                    meat[(i, j)] += w * s[a][i] * s[b][j];
                }
            }
        }
    }
    let mut xtx = DMatrix::<f64>::zeros(p, p);
    for r in 0..n {
        for i in 0..p {
            for j in 0..p {
                xtx[(i, j)] += x[(r, i)] * x[(r, j)];
            }
        }
    }
    let inv = gauss_jordan_inverse(&xtx)?;
    Ok(&inv * meat * &inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_round_trip() {
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0]);
        let inv = gauss_jordan_inverse(&a).unwrap();
        assert!(((&a * inv) - DMatrix::identity(3, 3)).abs().max() < 1e-14);
        assert!(gauss_jordan_inverse(&DMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn hand_computed_three_dates() {
        // One regressor x = 1, residuals (1, 2, -3) on three dates, lag 1.
        // Scores s = (1, 2, -3); weight 1/2 at lag 1.
        // meat = 1 + 4 + 9 + 2 * 0.5 * (1*2 + 2*(-3)) = 14 - 4 = 10.
        // X'X = 3, so var = 10 / 9.
        let x = DMatrix::from_element(3, 1, 1.0);
        let d: Vec<Date> = (0..3).map(|i| Date::from_ordinal(100 + i)).collect();
        let cov = brute_hac(&x, &[1.0, 2.0, -3.0], &d, 1).unwrap();
        assert!((cov[(0, 0)] - 10.0 / 9.0).abs() < 1e-15);
    }
}
