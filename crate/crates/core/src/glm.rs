//! Fixed-design generalized linear models: datasets, linear predictors,
//! average log-likelihood, and the Kullback–Leibler risk they induce.
//!
//! Throughout, X is an n×p design matrix, β a coefficient vector, and the
//! i-th response is modeled through the natural parameter θᵢ = (Xβ)ᵢ. The
//! empirical risk of β is the negative average log-likelihood (up to the
//! β-free carrier term)
//!
//! ```text
//!     avg_loglik(β) = (1/(n·a)) Σᵢ [ Yᵢ·θᵢ − b(θᵢ) ]
//! ```
//!
//! and distances between parameter vectors are measured by the per-model KL
//! divergence summed over rows:
//!
//! ```text
//!     KL(θ⁰, θ¹) = (1/a) Σᵢ [ b′(θ⁰ᵢ)(θ⁰ᵢ − θ¹ᵢ) − b(θ⁰ᵢ) + b(θ¹ᵢ) ]
//! ```
//!
//! For the Gaussian family this reduces to ‖θ⁰ − θ¹‖² / (2σ²).

use crate::error::{Error, Result};
use crate::expfam::{Family, FamilyKind};
use crate::linalg::solve_spd_jittered;
use ndarray::{Array1, Array2};

/// Budget for the spectral-norm power iteration.
const POWER_ITER_MAX: usize = 10_000;
/// Relative residual tolerance for the power iteration.
const POWER_ITER_RTOL: f64 = 1e-10;

/// An immutable regression problem: design, responses, and response family.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: Array2<f64>,
    y: Array1<f64>,
    family: Family,
}

impl Dataset {
    /// Validate and freeze a dataset.
    ///
    /// Checks shapes, finiteness of every entry, and family-specific response
    /// constraints (Bernoulli responses in {0,1}, Poisson responses in
    /// nonnegative integers). Errors carry the offending zero-based row.
    pub fn new(x: Array2<f64>, y: Array1<f64>, family: Family) -> Result<Self> {
        let (n, p) = (x.nrows(), x.ncols());
        if n == 0 || p == 0 {
            return Err(Error::InvalidConfig(format!(
                "design must be nonempty, got {n}×{p}"
            )));
        }
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                what: "response length vs design rows",
                expected: n,
                got: y.len(),
            });
        }
        for (i, row) in x.rows().into_iter().enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::DataValidation {
                    row: i,
                    message: "design entry is not finite".into(),
                });
            }
        }
        for (i, &v) in y.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::DataValidation {
                    row: i,
                    message: "response is not finite".into(),
                });
            }
            match family.kind() {
                FamilyKind::Bernoulli if v != 0.0 && v != 1.0 => {
                    return Err(Error::DataValidation {
                        row: i,
                        message: format!("Bernoulli response must be 0 or 1, got {v}"),
                    });
                }
                FamilyKind::Poisson if v < 0.0 || v.fract() != 0.0 => {
                    return Err(Error::DataValidation {
                        row: i,
                        message: format!("Poisson response must be a nonnegative integer, got {v}"),
                    });
                }
                _ => {}
            }
        }
        Ok(Dataset { x, y, family })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn y(&self) -> &Array1<f64> {
        &self.y
    }

    pub fn family(&self) -> &Family {
        &self.family
    }
}

/// A vector of natural parameters, validated against a family's admissible
/// interval at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalParams {
    theta: Array1<f64>,
}

impl NaturalParams {
    pub fn new(theta: Array1<f64>, family: &Family) -> Result<Self> {
        let iv = family.theta_interval();
        for (i, &t) in theta.iter().enumerate() {
            if !t.is_finite() || !iv.contains(t) {
                return Err(Error::ThetaOutOfDomainAtRow {
                    row: i,
                    value: t,
                    lo: iv.lo,
                    hi: iv.hi,
                });
            }
        }
        Ok(NaturalParams { theta })
    }

    pub fn theta(&self) -> &Array1<f64> {
        &self.theta
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }
}

/// Map coefficients to validated natural parameters θ = Xβ.
pub fn natural_params(x: &Array2<f64>, beta: &Array1<f64>, family: &Family) -> Result<NaturalParams> {
    if beta.len() != x.ncols() {
        return Err(Error::DimensionMismatch {
            what: "coefficient length vs design columns",
            expected: x.ncols(),
            got: beta.len(),
        });
    }
    NaturalParams::new(x.dot(beta), family)
}

/// Average log-likelihood (carrier term dropped):
/// (1/(n·a)) Σᵢ [Yᵢ·θᵢ − b(θᵢ)] with θ = Xβ.
pub fn avg_loglik(data: &Dataset, beta: &Array1<f64>) -> Result<f64> {
    let params = natural_params(data.x(), beta, data.family())?;
    let fam = data.family();
    let mut s = 0.0;
    for (&y, &t) in data.y().iter().zip(params.theta().iter()) {
        s += y * t - fam.cumulant(t)?;
    }
    Ok(s / (data.n() as f64 * fam.scale()))
}

/// Gradient of [`avg_loglik`] in β: (1/(n·a)) Xᵀ (Y − b′(Xβ)).
pub fn loglik_gradient(data: &Dataset, beta: &Array1<f64>) -> Result<Array1<f64>> {
    let params = natural_params(data.x(), beta, data.family())?;
    let fam = data.family();
    let mut resid = Array1::<f64>::zeros(data.n());
    for i in 0..data.n() {
        resid[i] = data.y()[i] - fam.mean(params.theta()[i])?;
    }
    let g = data.x().t().dot(&resid) / (data.n() as f64 * fam.scale());
    Ok(g)
}

/// KL divergence between two natural-parameter vectors under one family.
///
/// Nonnegative by convexity of the cumulant, and exactly zero for identical
/// inputs. For the Gaussian family it equals ‖θ⁰ − θ¹‖²/(2σ²).
pub fn kl_divergence(p0: &NaturalParams, p1: &NaturalParams, family: &Family) -> Result<f64> {
    if p0.len() != p1.len() {
        return Err(Error::DimensionMismatch {
            what: "natural-parameter lengths",
            expected: p0.len(),
            got: p1.len(),
        });
    }
    let mut s = 0.0;
    for (&t0, &t1) in p0.theta().iter().zip(p1.theta().iter()) {
        if t0 == t1 {
            continue; // exact zero contribution, no rounding residue
        }
        s += family.mean(t0)? * (t0 - t1) - family.cumulant(t0)? + family.cumulant(t1)?;
    }
    Ok(s / family.scale())
}

/// KL risk of a coefficient vector against a true parameter vector:
/// KL(θ⁰, Xβ).
pub fn kl_risk(
    theta0: &NaturalParams,
    x: &Array2<f64>,
    beta: &Array1<f64>,
    family: &Family,
) -> Result<f64> {
    let p1 = natural_params(x, beta, family)?;
    kl_divergence(theta0, &p1, family)
}

/// Spectral norm ‖X‖ (largest singular value) by power iteration on the
/// smaller Gram matrix, with a deterministic pseudo-random start vector.
///
/// Stops when the eigen-residual ‖Gv − λv‖ ≤ 1e-10·λ, which bounds the
/// eigenvalue error by the same amount for a symmetric G.
pub fn spectral_norm(x: &Array2<f64>) -> Result<f64> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "spectral_norm input",
        });
    }
    if x.nrows() == 0 || x.ncols() == 0 {
        return Ok(0.0);
    }
    // Work with the smaller of XᵀX and XXᵀ.
    let g = if x.ncols() <= x.nrows() {
        x.t().dot(x)
    } else {
        x.dot(&x.t())
    };
    let d = g.nrows();
    // Fixed-seed start vector: orthogonality to the top eigenspace has
    // probability zero, and the result is reproducible.
    let mut state = 0x9e37_79b9_97f4_a7c1u64;
    let mut v = Array1::<f64>::zeros(d);
    for i in 0..d {
        state = crate::rng::splitmix64(state ^ i as u64);
        v[i] = (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
    }
    let nv = v.dot(&v).sqrt();
    if nv == 0.0 {
        v[0] = 1.0;
    } else {
        v.mapv_inplace(|t| t / nv);
    }

    for _ in 0..POWER_ITER_MAX {
        let mut gv = g.dot(&v);
        let lambda = v.dot(&gv);
        if lambda <= 0.0 {
            // Gram matrix is PSD; a nonpositive Rayleigh quotient on a unit
            // vector means X is (numerically) zero.
            return Ok(0.0);
        }
        // residual ‖Gv − λv‖
        let mut res = 0.0;
        for i in 0..d {
            let r = gv[i] - lambda * v[i];
            res += r * r;
        }
        if res.sqrt() <= POWER_ITER_RTOL * lambda {
            return Ok(lambda.sqrt());
        }
        let norm = gv.dot(&gv).sqrt();
        if norm == 0.0 {
            return Ok(0.0);
        }
        gv.mapv_inplace(|t| t / norm);
        v = gv;
    }
    Err(Error::PowerIterationDiverged {
        iters: POWER_ITER_MAX,
    })
}

/// Maximum-likelihood fit by damped Newton iteration.
///
/// Starts at β = 0 (which must map into the admissible interval), solves the
/// Fisher system XᵀD X·d = Xᵀ(Y − b′(Xβ)) with D = diag(b″(θ)), and halves
/// steps that leave the domain or decrease the log-likelihood. Stops once
/// ‖gradient‖₂ ≤ `tol`.
pub fn mle_fit(data: &Dataset, tol: f64, max_iter: usize) -> Result<Array1<f64>> {
    let fam = data.family();
    let (n, p) = (data.n(), data.p());
    let na = n as f64 * fam.scale();
    let mut beta = Array1::<f64>::zeros(p);
    if natural_params(data.x(), &beta, fam).is_err() {
        return Err(Error::BadInit(
            "zero coefficients map outside the admissible interval".into(),
        ));
    }
    let mut ll = avg_loglik(data, &beta)?;
    for _ in 0..max_iter {
        let theta = data.x().dot(&beta);
        let mut resid = Array1::<f64>::zeros(n);
        let mut w = Array1::<f64>::zeros(n);
        for i in 0..n {
            resid[i] = data.y()[i] - fam.mean(theta[i])?;
            w[i] = fam.variance_rate(theta[i])?;
        }
        let grad = data.x().t().dot(&resid) / na;
        if grad.dot(&grad).sqrt() <= tol {
            return Ok(beta);
        }
        // Fisher information (scaled): XᵀDX / (n·a)
        let mut xw = data.x().clone();
        for i in 0..n {
            let wi = w[i];
            xw.row_mut(i).mapv_inplace(|v| v * wi);
        }
        let h = data.x().t().dot(&xw) / na;
        let d = solve_spd_jittered(&h, &grad).ok_or(Error::NewtonDiverged {
            what: "maximum likelihood",
            iters: max_iter,
        })?;
        let mut t = 1.0;
        let mut advanced = false;
        for _ in 0..60 {
            let cand = &beta + &(&d * t);
            match avg_loglik(data, &cand) {
                Ok(cll) if cll >= ll - 1e-12 * (1.0 + ll.abs()) => {
                    beta = cand;
                    ll = cll;
                    advanced = true;
                    break;
                }
                _ => t *= 0.5,
            }
        }
        if !advanced {
            break; // stalled at numerical precision
        }
    }
    let grad = loglik_gradient(data, &beta)?;
    if grad.dot(&grad).sqrt() <= tol.max(1e-6) {
        Ok(beta)
    } else {
        Err(Error::NewtonDiverged {
            what: "maximum likelihood",
            iters: max_iter,
        })
    }
}
