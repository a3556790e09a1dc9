//! Dense symmetric positive definite solves for the convex oracle.

/// Solves `a x = b` in place for a symmetric positive definite `a` stored
/// row-major. `a` is overwritten by its Cholesky factor and `b` by `x`.
/// Returns false when `a` is not numerically positive definite.
pub(crate) fn cholesky_solve(a: &mut [f64], n: usize, b: &mut [f64]) -> bool {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    for j in 0..n {
        let mut d = a[j * n + j];
        for p in 0..j {
            d -= a[j * n + p] * a[j * n + p];
        }
        if !(d > 0.0) || !d.is_finite() {
            return false;
        }
        let d = libm::sqrt(d);
        a[j * n + j] = d;
        for i in (j + 1)..n {
            let mut v = a[i * n + j];
            for p in 0..j {
                v -= a[i * n + p] * a[j * n + p];
            }
            a[i * n + j] = v / d;
        }
    }
    for i in 0..n {
        let mut v = b[i];
        for p in 0..i {
            v -= a[i * n + p] * b[p];
        }
        b[i] = v / a[i * n + i];
    }
    for i in (0..n).rev() {
        let mut v = b[i];
        for p in (i + 1)..n {
            v -= a[p * n + i] * b[p];
        }
        b[i] = v / a[i * n + i];
    }
    true
}
