//! Small dense linear algebra and column statistics used throughout the
//! pipeline. Systems solved here are tiny (pair models are 4x4, active sets
//! and theorem checks stay in the tens), so plain pivoted elimination is all
//! that is needed.

use crate::error::{Error, Result};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

/// Solves `a * x = b` by Gaussian elimination with partial pivoting.
///
/// Returns `Error::SingularDesign` when a pivot falls below `1e-12` times the
/// largest absolute entry of the matrix.
pub fn solve(a: &Array2<f64>, b: &Array1<f64>) -> Result<Array1<f64>> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::DimensionMismatch("linear system".into()));
    }
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let mut m = a.clone();
    let mut rhs = b.clone();
    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_val = m[(col, col)].abs();
        for row in col + 1..n {
            let v = m[(row, col)].abs();
            if v > pivot_val {
                pivot_val = v;
                pivot_row = row;
            }
        }
        if pivot_val < 1e-12 * scale {
            return Err(Error::SingularDesign);
        }
        if pivot_row != col {
            for k in 0..n {
                m.swap((col, k), (pivot_row, k));
            }
            rhs.swap(col, pivot_row);
        }
        let pivot = m[(col, col)];
        for row in col + 1..n {
            let factor = m[(row, col)] / pivot;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                m[(row, k)] -= factor * m[(col, k)];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = Array1::zeros(n);
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for k in row + 1..n {
            acc -= m[(row, k)] * x[k];
        }
        x[row] = acc / m[(row, row)];
    }
    Ok(x)
}

/// Inverts a small symmetric positive-definite-ish matrix by solving against
/// the identity column by column.
pub fn invert(a: &Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    let mut inv = Array2::zeros((n, n));
    for j in 0..n {
        let mut e = Array1::zeros(n);
        e[j] = 1.0;
        let col = solve(a, &e)?;
        inv.column_mut(j).assign(&col);
    }
    Ok(inv)
}

/// Ordinary least squares via the normal equations. Returns the coefficient
/// vector and the inverse Gram matrix (needed for standard errors).
pub fn ols(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let xtx = x.t().dot(&x);
    let xty = x.t().dot(&y);
    let gram_inv = invert(&xtx)?;
    let beta = gram_inv.dot(&xty);
    Ok((beta, gram_inv))
}

pub fn mean(v: ArrayView1<'_, f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sum() / v.len() as f64
}

/// Sample standard deviation (n-1 denominator). Zero for constant columns.
pub fn sample_sd(v: ArrayView1<'_, f64>) -> f64 {
    let n = v.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(v);
    let ss: f64 = v.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (n - 1) as f64).sqrt()
}

/// Pearson correlation; 0 when either side is constant.
pub fn pearson(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    let n = a.len();
    debug_assert_eq!(n, b.len());
    if n == 0 {
        return 0.0;
    }
    let ma = mean(a);
    let mb = mean(b);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for i in 0..n {
        let da = a[i] - ma;
        let db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    let denom = (saa * sbb).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        sab / denom
    }
}
