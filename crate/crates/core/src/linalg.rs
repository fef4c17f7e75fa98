//! Small dense linear-algebra helpers for the Newton solvers. Systems here
//! are tiny (subset sizes, design widths at desk scale), so a plain Cholesky
//! factorization is all that is needed.

use ndarray::{Array1, Array2};

/// Solve the symmetric positive-definite system A·x = b by Cholesky.
/// Returns `None` when the factorization hits a non-positive pivot.
pub(crate) fn cholesky_solve(a: &Array2<f64>, b: &Array1<f64>) -> Option<Array1<f64>> {
    let n = a.nrows();
    debug_assert_eq!(a.ncols(), n);
    debug_assert_eq!(b.len(), n);
    // Lower-triangular factor stored dense.
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return None;
                }
                l[[i, i]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    // Forward then backward substitution.
    let mut y = Array1::<f64>::zeros(n);
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[[i, k]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    let mut x = Array1::<f64>::zeros(n);
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[[k, i]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
    Some(x)
}

/// Cholesky solve with diagonal jitter escalation for nearly singular
/// matrices. Tries the raw system first, then adds 1e-12·mean(diag)·10^k
/// for k = 0, 2, 4.
pub(crate) fn solve_spd_jittered(a: &Array2<f64>, b: &Array1<f64>) -> Option<Array1<f64>> {
    if let Some(x) = cholesky_solve(a, b) {
        return Some(x);
    }
    let n = a.nrows();
    let base = a.diag().sum() / n as f64;
    for k in [0i32, 2, 4] {
        let eps = 1e-12 * base.abs().max(1e-300) * 10f64.powi(k);
        let mut aj = a.clone();
        for i in 0..n {
            aj[[i, i]] += eps;
        }
        if let Some(x) = cholesky_solve(&aj, b) {
            return Some(x);
        }
    }
    None
}
