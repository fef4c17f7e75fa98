//! Deterministic design-matrix generators.
//!
//! Every generator scales each column to Euclidean norm exactly √n, so the
//! per-column energy — and with it the spectral norm entering the rate — is
//! comparable across cells of different sizes.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// The design distributions the harness can draw from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DesignKind {
    /// Independent standard normal entries.
    GaussianIid,
    /// Rows with AR(1) cross-column correlation ρ^{|j−k|}.
    Correlated { rho: f64 },
    /// Orthogonalized Gaussian columns: XᵀX = n·I (requires p ≤ n).
    Orthogonal,
}

/// Scale every column of `x` to norm exactly √n.
fn scale_columns(x: &mut Array2<f64>) -> Result<()> {
    let n = x.nrows();
    let target = (n as f64).sqrt();
    for j in 0..x.ncols() {
        let norm = x.column(j).dot(&x.column(j)).sqrt();
        if !norm.is_finite() || norm < 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "design column {j} is numerically degenerate (norm {norm})"
            )));
        }
        let s = target / norm;
        x.column_mut(j).mapv_inplace(|v| v * s);
    }
    Ok(())
}

/// Draw an n×p design of the requested kind, columns scaled to norm √n.
pub fn generate_design<R: Rng + ?Sized>(
    n: usize,
    p: usize,
    kind: DesignKind,
    rng: &mut R,
) -> Result<Array2<f64>> {
    if n == 0 || p == 0 {
        return Err(Error::InvalidConfig(format!(
            "design needs n ≥ 1 and p ≥ 1, got n={n}, p={p}"
        )));
    }
    let mut x = match kind {
        DesignKind::GaussianIid => {
            Array2::from_shape_fn((n, p), |_| rng.sample::<f64, _>(StandardNormal))
        }
        DesignKind::Correlated { rho } => {
            if !rho.is_finite() || rho.abs() >= 1.0 {
                return Err(Error::InvalidConfig(format!(
                    "correlated design needs |rho| < 1, got {rho}"
                )));
            }
            // Row-wise AR(1): z₁ = e₁, z_j = ρ·z_{j−1} + √(1−ρ²)·e_j, which
            // gives Corr(z_j, z_k) = ρ^{|j−k|} exactly.
            let innov = (1.0 - rho * rho).sqrt();
            let mut m = Array2::<f64>::zeros((n, p));
            for i in 0..n {
                let mut prev = 0.0;
                for j in 0..p {
                    let e: f64 = rng.sample(StandardNormal);
                    let z = if j == 0 { e } else { rho * prev + innov * e };
                    m[[i, j]] = z;
                    prev = z;
                }
            }
            m
        }
        DesignKind::Orthogonal => {
            if p > n {
                return Err(Error::InvalidConfig(format!(
                    "orthogonal design needs p ≤ n, got n={n}, p={p}"
                )));
            }
            let mut m =
                Array2::from_shape_fn((n, p), |_| rng.sample::<f64, _>(StandardNormal));
            orthonormalize_columns(&mut m)?;
            m
        }
    };
    scale_columns(&mut x)?;
    Ok(x)
}

/// Modified Gram–Schmidt with a second orthogonalization pass per column,
/// which keeps off-diagonal inner products at the 1e-14 level.
fn orthonormalize_columns(x: &mut Array2<f64>) -> Result<()> {
    let p = x.ncols();
    for j in 0..p {
        let mut v: Array1<f64> = x.column(j).to_owned();
        for _pass in 0..2 {
            for k in 0..j {
                let q = x.column(k);
                let c = q.dot(&v);
                v.scaled_add(-c, &q);
            }
        }
        let norm = v.dot(&v).sqrt();
        if !norm.is_finite() || norm < 1e-10 {
            return Err(Error::InvalidConfig(format!(
                "orthogonalization failed: column {j} is numerically dependent on its predecessors"
            )));
        }
        v /= norm;
        x.column_mut(j).assign(&v);
    }
    Ok(())
}
