//! The exponentially weighted aggregate, viewed as a Gibbs posterior.
//!
//! Given a dataset, a prior, and an inverse temperature λ ≥ 0, the target
//! density on coefficients is, up to normalization,
//!
//! ```text
//!     ρ̂(β) ∝ exp[ λ · avg_loglik(β) ] · π(β),
//! ```
//!
//! so larger λ trusts the data more and λ = 0 recovers the prior. Points
//! whose linear predictor leaves the family's admissible interval, or that
//! leave the prior's truncation ball, get log-density −∞ (zero mass) rather
//! than an error: the samplers simply never accept them.

use crate::error::{Error, Result};
use crate::glm::{spectral_norm, Dataset};
use crate::prior::PriorConfig;
use ndarray::Array1;
use std::sync::Arc;

/// A fully specified Gibbs posterior: data, prior, and temperature.
#[derive(Debug, Clone)]
pub struct GibbsPosterior {
    dataset: Arc<Dataset>,
    prior: PriorConfig,
    lambda: f64,
    norm_x: f64,
}

impl GibbsPosterior {
    /// Build the posterior, computing the design's spectral norm.
    pub fn new(dataset: Arc<Dataset>, prior: PriorConfig, lambda: f64) -> Result<Self> {
        let norm_x = spectral_norm(dataset.x())?;
        Self::with_spectral_norm(dataset, prior, lambda, norm_x)
    }

    /// Build the posterior with a precomputed spectral norm ‖X‖.
    pub fn with_spectral_norm(
        dataset: Arc<Dataset>,
        prior: PriorConfig,
        lambda: f64,
        norm_x: f64,
    ) -> Result<Self> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "temperature λ must be finite and ≥ 0, got {lambda}"
            )));
        }
        if prior.p() != dataset.p() {
            return Err(Error::DimensionMismatch {
                what: "prior dimension vs design columns",
                expected: dataset.p(),
                got: prior.p(),
            });
        }
        if !norm_x.is_finite() || norm_x < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "spectral norm must be finite and ≥ 0, got {norm_x}"
            )));
        }
        Ok(GibbsPosterior {
            dataset,
            prior,
            lambda,
            norm_x,
        })
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn prior(&self) -> &PriorConfig {
        &self.prior
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn norm_x(&self) -> f64 {
        self.norm_x
    }

    pub fn p(&self) -> usize {
        self.dataset.p()
    }

    /// Unnormalized log-density λ·avg_loglik(β) + log π(β); −∞ outside the
    /// support (prior ball or admissible interval violated, or non-finite β).
    pub fn log_posterior_unnormalized(&self, beta: &Array1<f64>) -> Result<f64> {
        self.check_len(beta)?;
        Ok(self.eval(beta, false).0)
    }

    /// Gradient of the log-density, defined on the interior of the support.
    pub fn log_posterior_gradient(&self, beta: &Array1<f64>) -> Result<Array1<f64>> {
        self.check_len(beta)?;
        let norm = beta.dot(beta).sqrt();
        let (lp, grad) = self.eval(beta, true);
        match grad {
            Some(g) if lp.is_finite() => Ok(g),
            _ => Err(Error::BoundaryGradient {
                norm,
                radius: self.prior.b1(),
            }),
        }
    }

    fn check_len(&self, beta: &Array1<f64>) -> Result<()> {
        if beta.len() != self.p() {
            return Err(Error::DimensionMismatch {
                what: "coefficient length vs posterior dimension",
                expected: self.p(),
                got: beta.len(),
            });
        }
        Ok(())
    }

    /// Hot-path evaluation: log-density, and the gradient when requested and
    /// defined. Returns (−∞, None) outside the support; (finite, None) on
    /// the prior boundary, where the density is positive but the gradient
    /// does not exist.
    pub(crate) fn eval(&self, beta: &Array1<f64>, want_grad: bool) -> (f64, Option<Array1<f64>>) {
        let prior_lp = self.prior.log_density_unchecked(beta);
        if prior_lp == f64::NEG_INFINITY {
            return (f64::NEG_INFINITY, None);
        }
        let fam = self.dataset.family();
        let iv = fam.theta_interval();
        let n = self.dataset.n();
        let na = n as f64 * fam.scale();

        let mut lik = 0.0;
        let mut resid: Option<Array1<f64>> = None;
        if self.lambda > 0.0 {
            let theta = self.dataset.x().dot(beta);
            let mut r = if want_grad {
                Some(Array1::<f64>::zeros(n))
            } else {
                None
            };
            for i in 0..n {
                let t = theta[i];
                if !t.is_finite() || !iv.contains(t) {
                    return (f64::NEG_INFINITY, None);
                }
                let y = self.dataset.y()[i];
                // In-domain by the check above, so these cannot fail.
                let b = fam.cumulant(t).expect("theta checked in-domain");
                lik += y * t - b;
                if let Some(r) = r.as_mut() {
                    r[i] = y - fam.mean(t).expect("theta checked in-domain");
                }
            }
            lik /= na;
            resid = r;
        }
        let lp = self.lambda * lik + prior_lp;
        if !want_grad {
            return (lp, None);
        }
        // Prior gradient exists only strictly inside the ball.
        let Ok(prior_grad) = self.prior.log_prior_gradient(beta) else {
            return (lp, None);
        };
        let grad = match resid {
            Some(r) => {
                let lik_grad = self.dataset.x().t().dot(&r) / na;
                prior_grad + &(lik_grad * self.lambda)
            }
            None => prior_grad,
        };
        (lp, Some(grad))
    }
}
