//! True-parameter generators: exactly sparse coefficient vectors (the
//! well-specified case) and a dense, nonlinear natural parameter that no
//! sparse linear model reproduces (the misspecified case).

use ndarray::Array1;
use rand::seq::index::sample;
use rand::Rng;

use crate::error::Result;
use crate::expfam::Family;
use crate::glm::{natural_params, NaturalParams};
use ndarray::Array2;

/// The truth distributions the harness can draw from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TruthKind {
    /// β⁰ has exactly `p0` nonzero coordinates, each ±`amplitude`.
    ExactSparse { amplitude: f64 },
    /// θ⁰ = X·β_dense + bump with β_dense,j ∝ (j+1)^{−decay}; dense and
    /// nonlinear, so every sparse linear fit leaves positive risk.
    Misspecified { amplitude: f64, decay: f64 },
}

/// A generated truth: the natural parameter always, the coefficient vector
/// and its support only when the truth actually is a sparse linear model.
#[derive(Debug, Clone)]
pub struct Truth {
    pub beta0: Option<Array1<f64>>,
    pub support: Option<Vec<usize>>,
    pub theta0: NaturalParams,
}

/// Generate a truth for design `x`, validated against the family's
/// admissible natural-parameter interval.
pub fn generate_truth<R: Rng + ?Sized>(
    x: &Array2<f64>,
    p0: usize,
    kind: TruthKind,
    family: &Family,
    rng: &mut R,
) -> Result<Truth> {
    let p = x.ncols();
    match kind {
        TruthKind::ExactSparse { amplitude } => {
            let mut support: Vec<usize> = sample(rng, p, p0.min(p)).into_iter().collect();
            support.sort_unstable();
            let mut beta0 = Array1::<f64>::zeros(p);
            for &j in &support {
                beta0[j] = if rng.gen::<bool>() { amplitude } else { -amplitude };
            }
            let theta0 = natural_params(x, &beta0, family)?;
            Ok(Truth {
                beta0: Some(beta0),
                support: Some(support),
                theta0,
            })
        }
        TruthKind::Misspecified { amplitude, decay } => {
            let beta_dense =
                Array1::from_shape_fn(p, |j| amplitude * ((j + 1) as f64).powf(-decay));
            let base = x.dot(&beta_dense);
            let theta = base.mapv(|t| t + 0.5 * amplitude * (2.0 * t / amplitude).sin());
            let theta0 = NaturalParams::new(theta, family)?;
            Ok(Truth {
                beta0: None,
                support: None,
                theta0,
            })
        }
    }
}
