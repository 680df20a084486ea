//! Small dense kernels on contiguous slices.
//!
//! Matrices in this crate are column-major `ndarray` arrays so that atoms,
//! examples and codes are contiguous columns; the helpers here work on those
//! column slices directly.

use ndarray::{Array2, ShapeBuilder};

use crate::{Error, Result};

/// Inner product with four independent accumulators so the loop vectorizes.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[2]) + (acc[1] + acc[3]) + tail
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn norm1(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).sum()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Copy `a` into column-major (Fortran) layout unless it already is.
pub fn to_col_major(a: Array2<f64>) -> Array2<f64> {
    if a.t().is_standard_layout() {
        return a;
    }
    let mut out = Array2::zeros(a.raw_dim().f());
    out.assign(&a);
    out
}

pub fn zeros_col_major(rows: usize, cols: usize) -> Array2<f64> {
    Array2::zeros((rows, cols).f())
}

/// Contiguous view of column `j` of a column-major matrix.
#[inline]
pub fn col(a: &Array2<f64>, j: usize) -> &[f64] {
    let rows = a.nrows();
    &a.as_slice_memory_order().expect("column-major matrix")[j * rows..(j + 1) * rows]
}

#[inline]
pub fn col_mut(a: &mut Array2<f64>, j: usize) -> &mut [f64] {
    let rows = a.nrows();
    &mut a.as_slice_memory_order_mut().expect("column-major matrix")[j * rows..(j + 1) * rows]
}

/// In-place Cholesky factorization of a symmetric positive definite `n×n`
/// row-major matrix. Only the lower triangle is read and written.
pub fn cholesky_in_place(a: &mut [f64], n: usize) -> Result<()> {
    debug_assert_eq!(a.len(), n * n);
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::Singular(j));
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    Ok(())
}

/// Solve `L Lᵀ x = b` in place given the factor from [`cholesky_in_place`].
pub fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Median of `|v|` (upper median for even lengths). Empty input gives 0.
pub fn median_abs(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.into_iter().map(f64::abs).collect();
    if v.is_empty() {
        return 0.0;
    }
    let mid = v.len() / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    *m
}

/// Sum of absolute values of every entry.
pub fn entrywise_l1(a: &Array2<f64>) -> f64 {
    a.iter().map(|x| x.abs()).sum()
}

pub fn frobenius(a: &Array2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solves_spd_system() {
        // A = [[4, 2], [2, 3]], b = (2, 1) → x = (0.5, 0)
        let mut a = vec![4.0, 2.0, 2.0, 3.0];
        cholesky_in_place(&mut a, 2).unwrap();
        let mut b = vec![2.0, 1.0];
        cholesky_solve(&a, 2, &mut b);
        assert!((b[0] - 0.5).abs() < 1e-15);
        assert!(b[1].abs() < 1e-15);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut a = vec![1.0, 2.0, 2.0, 1.0];
        assert!(matches!(cholesky_in_place(&mut a, 2), Err(Error::Singular(1))));
    }

    #[test]
    fn median_of_abs() {
        assert_eq!(median_abs([-3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median_abs([]), 0.0);
    }

    #[test]
    fn col_major_columns_are_contiguous() {
        let a = to_col_major(ndarray::array![[1.0, 2.0], [3.0, 4.0]]);
        assert_eq!(col(&a, 0), &[1.0, 3.0]);
        assert_eq!(col(&a, 1), &[2.0, 4.0]);
    }
}
