//! Shared fixtures for the benchmark suite.

use ewaglm::{Dataset, Family, GibbsPosterior, PriorConfig};
use ndarray::{Array1, Array2};
use std::sync::Arc;

/// Deterministic Gaussian regression posterior of the given size.
pub fn gaussian_posterior(n: usize, p: usize) -> GibbsPosterior {
    let x = Array2::from_shape_fn((n, p), |(i, j)| {
        ((i * p + j) as f64 * 0.37).sin() * 0.8
    });
    let y = Array1::from_shape_fn(n, |i| ((i as f64) * 0.61).cos());
    let data = Arc::new(Dataset::new(x, y, Family::gaussian(1.0).unwrap()).unwrap());
    let prior = PriorConfig::new(0.1, 100.0, p).unwrap();
    GibbsPosterior::new(data, prior, n as f64).unwrap()
}
