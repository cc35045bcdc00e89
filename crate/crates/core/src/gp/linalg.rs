//! Dense Cholesky factorization and triangular solves (row-major, lower).

use crate::Scalar;

/// In-place lower Cholesky of the symmetric `n×n` matrix `a`. The strict
/// upper triangle is zeroed. Returns `false` if a pivot is not safely positive.
pub(crate) fn cholesky_in_place<T: Scalar>(a: &mut [T], n: usize) -> bool {
    let floor = T::epsilon() * T::lit(n.max(1) as f64);
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > floor * a[j * n + j].abs()) || !d.is_finite() {
            return false;
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
        for k in (j + 1)..n {
            a[j * n + k] = T::zero();
        }
    }
    true
}

/// Solves `L y = b`.
pub(crate) fn solve_lower<T: Scalar>(l: &[T], n: usize, b: &[T]) -> Vec<T> {
    let mut y = b.to_vec();
    for i in 0..n {
        let mut s = y[i];
        let row = &l[i * n..i * n + i];
        for (k, &lik) in row.iter().enumerate() {
            s -= lik * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    y
}

/// Solves `Lᵀ x = y`.
pub(crate) fn solve_upper_t<T: Scalar>(l: &[T], n: usize, y: &[T]) -> Vec<T> {
    let mut x = y.to_vec();
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    x
}
