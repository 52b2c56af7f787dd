//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Numerical rank from singular values relative to the largest one.
pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0f64, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}

/// Assemble `[[H, A^T], [A, 0]]`.
pub fn kkt_matrix(h: &DMatrix<f64>, a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = h.nrows();
    let m = a.nrows();
    let mut k = DMatrix::zeros(n + m, n + m);
    k.view_mut((0, 0), (n, n)).copy_from(h);
    k.view_mut((0, n), (n, m)).copy_from(&a.transpose());
    k.view_mut((n, 0), (m, n)).copy_from(a);
    k
}

/// Minimize `1/2 x^T H x - g^T x` subject to `A x = b`. Returns `(x, nu)`.
pub fn solve_eq_qp(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let n = h.nrows();
    let k = kkt_matrix(h, a);
    let mut rhs = DVector::zeros(k.nrows());
    rhs.rows_mut(0, n).copy_from(g);
    rhs.rows_mut(n, a.nrows()).copy_from(b);
    let sol = k.clone().lu().solve(&rhs).ok_or(Error::SingularKkt {
        size: k.nrows(),
        rank: rank(&k, 1e-12),
    })?;
    Ok((sol.rows(0, n).into_owned(), sol.rows(n, a.nrows()).into_owned()))
}

/// Least-squares slope, intercept and coefficient of determination.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 && sxx > 0.0 {
        (sxy * sxy) / (sxx * syy)
    } else {
        1.0
    };
    (slope, intercept, r2)
}
