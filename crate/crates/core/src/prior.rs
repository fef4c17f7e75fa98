//! Scaled-Student sparsity prior with an ℓ₂ ball truncation.
//!
//! The prior density on coefficients β ∈ ℝᵖ is, up to normalization,
//!
//! ```text
//!     π(β) ∝ Π_j (ζ² + β_j²)^{-2}   restricted to ‖β‖₂ ≤ B₁,
//! ```
//!
//! i.e. independent Student-t components with 3 degrees of freedom and scale
//! ζ/√3, truncated to a ball. Small ζ concentrates mass near sparse vectors
//! while the polynomial tails keep large signals reachable.

use crate::error::{Error, Result};
use ndarray::Array1;
use rand::Rng;
use rand_distr::{Distribution, StudentT};

/// Attempt budget for rejection sampling from the truncated prior.
const MAX_PRIOR_ATTEMPTS: usize = 1_000_000;

/// Scale parameter ζ = 1/(n·p·‖X‖) used by the risk-bound analysis.
pub fn theorem_zeta(n: usize, p: usize, norm_x: f64) -> Result<f64> {
    if n == 0 || p == 0 {
        return Err(Error::InvalidConfig(format!(
            "theorem_zeta requires n ≥ 1 and p ≥ 1, got n={n}, p={p}"
        )));
    }
    if !norm_x.is_finite() || norm_x <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "theorem_zeta requires a positive finite design norm, got {norm_x}"
        )));
    }
    Ok(1.0 / (n as f64 * p as f64 * norm_x))
}

/// Scale parameter matched to the sampler's step-size heuristic, so that the
/// prior spikes stay wider than one Langevin step:
/// ζ = 0.5·p^{-1/3}·√(n·a) / (√(λ·U)·‖X‖).
pub fn mixing_zeta(
    n: usize,
    p: usize,
    scale_a: f64,
    lambda: f64,
    curvature_u: f64,
    norm_x: f64,
) -> Result<f64> {
    if n == 0 || p == 0 {
        return Err(Error::InvalidConfig(format!(
            "mixing_zeta requires n ≥ 1 and p ≥ 1, got n={n}, p={p}"
        )));
    }
    let denom = (lambda * curvature_u).sqrt() * norm_x;
    if !denom.is_finite() || denom <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "mixing_zeta requires positive finite λ·U·‖X‖², got λ={lambda}, U={curvature_u}, ‖X‖={norm_x}"
        )));
    }
    Ok(0.5 * (p as f64).powf(-1.0 / 3.0) * (n as f64 * scale_a).sqrt() / denom)
}

/// Validated prior hyperparameters for a fixed dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorConfig {
    zeta: f64,
    b1: f64,
    p: usize,
}

impl PriorConfig {
    /// Build a prior, rejecting non-finite, nonpositive, or underflowing
    /// scales (ζ² must be a normal float so densities stay representable).
    pub fn new(zeta: f64, b1: f64, p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidConfig("prior dimension must be ≥ 1".into()));
        }
        if !zeta.is_finite() || zeta <= 0.0 || !(zeta * zeta).is_normal() {
            return Err(Error::InvalidConfig(format!(
                "prior scale ζ must be positive, finite, and large enough that ζ² is a normal float; got {zeta}"
            )));
        }
        if !b1.is_finite() || b1 <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "truncation radius B₁ must be positive and finite, got {b1}"
            )));
        }
        Ok(PriorConfig { zeta, b1, p })
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn b1(&self) -> f64 {
        self.b1
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Slack B₁ − 2pζ in the mass-concentration argument; negative values
    /// are legal but worth a warning upstream.
    pub fn feasibility_margin(&self) -> f64 {
        self.b1 - 2.0 * self.p as f64 * self.zeta
    }

    /// Unnormalized log-density: −2 Σ_j ln(ζ² + β_j²), or −∞ outside the
    /// closed ball ‖β‖₂ ≤ B₁ (the boundary itself carries mass). Non-finite
    /// coordinates are treated as outside the support.
    pub fn log_prior_unnormalized(&self, beta: &Array1<f64>) -> Result<f64> {
        if beta.len() != self.p {
            return Err(Error::DimensionMismatch {
                what: "coefficient length vs prior dimension",
                expected: self.p,
                got: beta.len(),
            });
        }
        Ok(self.log_density_unchecked(beta))
    }

    /// Hot-path density evaluation with the length check already done.
    pub(crate) fn log_density_unchecked(&self, beta: &Array1<f64>) -> f64 {
        let z2 = self.zeta * self.zeta;
        let mut norm2 = 0.0;
        let mut s = 0.0;
        for &b in beta.iter() {
            if !b.is_finite() {
                return f64::NEG_INFINITY;
            }
            norm2 += b * b;
            s -= 2.0 * (z2 + b * b).ln();
        }
        if norm2.sqrt() > self.b1 {
            f64::NEG_INFINITY
        } else {
            s
        }
    }

    /// Gradient of the log-density, defined on the open ball only:
    /// ∂_j = −4β_j/(ζ² + β_j²). On or outside the boundary the log-density
    /// is not differentiable and an error is returned.
    pub fn log_prior_gradient(&self, beta: &Array1<f64>) -> Result<Array1<f64>> {
        if beta.len() != self.p {
            return Err(Error::DimensionMismatch {
                what: "coefficient length vs prior dimension",
                expected: self.p,
                got: beta.len(),
            });
        }
        let norm = beta.dot(beta).sqrt();
        if !norm.is_finite() || norm >= self.b1 {
            return Err(Error::BoundaryGradient {
                norm,
                radius: self.b1,
            });
        }
        let z2 = self.zeta * self.zeta;
        Ok(beta.mapv(|b| -4.0 * b / (z2 + b * b)))
    }

    /// Draw from the truncated prior by rejection: propose independent
    /// (ζ/√3)·t₃ components, accept once inside the ball.
    pub fn sample_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Array1<f64>> {
        let t3 = StudentT::new(3.0).expect("3 degrees of freedom is valid");
        let scale = self.zeta / 3.0f64.sqrt();
        for _ in 0..MAX_PRIOR_ATTEMPTS {
            let beta = Array1::from_shape_fn(self.p, |_| scale * t3.sample(rng));
            if beta.dot(&beta).sqrt() <= self.b1 {
                return Ok(beta);
            }
        }
        Err(Error::PriorSamplingExhausted {
            attempts: MAX_PRIOR_ATTEMPTS,
        })
    }

    /// CDF of one *untruncated* component:
    /// F(x) = 1/2 + (1/π)·[ ζx/(ζ² + x²) + atan(x/ζ) ].
    pub fn prior_component_cdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        if x == f64::INFINITY {
            return 1.0;
        }
        if x == f64::NEG_INFINITY {
            return 0.0;
        }
        let z = self.zeta;
        let f = 0.5
            + std::f64::consts::FRAC_1_PI * (z * x / (z * z + x * x) + (x / z).atan());
        f.clamp(0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::stats::{ks_critical, ks_statistic};
    use ndarray::array;

    #[test]
    fn theorem_zeta_known_value() {
        // n = 100, p = 20, ‖X‖ = 10 → 1/20000
        let z = theorem_zeta(100, 20, 10.0).unwrap();
        assert!((z - 5e-5).abs() < 1e-19);
        assert!(theorem_zeta(0, 20, 10.0).is_err());
        assert!(theorem_zeta(100, 20, 0.0).is_err());
        assert!(theorem_zeta(100, 20, f64::NAN).is_err());
    }

    #[test]
    fn mixing_zeta_scales_like_step_heuristic() {
        // Gaussian a = 1, λ = n: ζ = 0.5·p^{-1/3}·n/( √n·U^{1/2}·‖X‖ ).
        let z = mixing_zeta(400, 8, 1.0, 400.0, 1.0, 20.0).unwrap();
        let want = 0.5 * 8.0f64.powf(-1.0 / 3.0) * 20.0 / (20.0 * 20.0);
        assert!((z - want).abs() < 1e-15);
        assert!(mixing_zeta(400, 8, 1.0, 0.0, 1.0, 20.0).is_err());
    }

    #[test]
    fn config_rejects_degenerate_scales() {
        assert!(PriorConfig::new(0.0, 100.0, 3).is_err());
        assert!(PriorConfig::new(-1.0, 100.0, 3).is_err());
        assert!(PriorConfig::new(f64::NAN, 100.0, 3).is_err());
        // ζ² underflows to a subnormal
        assert!(PriorConfig::new(1e-200, 100.0, 3).is_err());
        assert!(PriorConfig::new(1.0, 0.0, 3).is_err());
        assert!(PriorConfig::new(1.0, f64::INFINITY, 3).is_err());
        assert!(PriorConfig::new(1.0, 100.0, 0).is_err());
        assert!(PriorConfig::new(1.0, 100.0, 3).is_ok());
    }

    #[test]
    fn feasibility_margin_value() {
        let cfg = PriorConfig::new(0.01, 100.0, 50).unwrap();
        assert!((cfg.feasibility_margin() - 99.0).abs() < 1e-12);
        let tight = PriorConfig::new(2.0, 1.0, 50).unwrap(); // legal, margin < 0
        assert!(tight.feasibility_margin() < 0.0);
    }

    #[test]
    fn log_prior_known_values() {
        let cfg = PriorConfig::new(1.0, 100.0, 2).unwrap();
        assert_eq!(cfg.log_prior_unnormalized(&array![0.0, 0.0]).unwrap(), 0.0);
        let v = cfg.log_prior_unnormalized(&array![1.0, 1.0]).unwrap();
        assert!((v - (-4.0 * 2.0f64.ln())).abs() < 1e-15);
        // (β=(1,0), ζ=1) → −2 ln 2 ≈ −1.3863
        let w = cfg.log_prior_unnormalized(&array![1.0, 0.0]).unwrap();
        assert!((w - (-2.0 * 2.0f64.ln())).abs() < 1e-15);
        assert!(cfg.log_prior_unnormalized(&array![1.0]).is_err());
    }

    #[test]
    fn support_boundary_is_included() {
        let cfg = PriorConfig::new(1.0, 5.0, 2).unwrap();
        let on = array![3.0, 4.0]; // ‖β‖ = 5 exactly
        assert!(cfg.log_prior_unnormalized(&on).unwrap().is_finite());
        let out = array![3.0, 4.0 + 1e-9];
        assert_eq!(
            cfg.log_prior_unnormalized(&out).unwrap(),
            f64::NEG_INFINITY
        );
        assert_eq!(
            cfg.log_prior_unnormalized(&array![f64::NAN, 0.0]).unwrap(),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let cfg = PriorConfig::new(0.3, 50.0, 4).unwrap();
        let beta = array![0.5, -1.2, 0.0, 2.0];
        let g = cfg.log_prior_gradient(&beta).unwrap();
        for j in 0..4 {
            let h = 1e-6;
            let mut bp = beta.clone();
            bp[j] += h;
            let mut bm = beta.clone();
            bm[j] -= h;
            let fd = (cfg.log_prior_unnormalized(&bp).unwrap()
                - cfg.log_prior_unnormalized(&bm).unwrap())
                / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-6 * g[j].abs().max(1.0), "coord {j}");
        }
    }

    #[test]
    fn gradient_undefined_on_and_beyond_boundary() {
        let cfg = PriorConfig::new(1.0, 5.0, 2).unwrap();
        let err = cfg.log_prior_gradient(&array![3.0, 4.0]).unwrap_err();
        assert!(matches!(err, Error::BoundaryGradient { .. }));
        assert!(cfg.log_prior_gradient(&array![30.0, 40.0]).is_err());
        assert!(cfg.log_prior_gradient(&array![0.1, -0.2]).is_ok());
    }

    #[test]
    fn samples_respect_the_truncation_ball() {
        let cfg = PriorConfig::new(1.0, 3.0, 5).unwrap();
        let mut rng = seeded(101);
        for _ in 0..2000 {
            let b = cfg.sample_prior(&mut rng).unwrap();
            assert_eq!(b.len(), 5);
            assert!(b.dot(&b).sqrt() <= 3.0 + 1e-12);
        }
    }

    #[test]
    fn sampling_exhausts_on_a_vanishing_ball() {
        // Acceptance probability ~ (B₁/ζ)³ per attempt is far below 1e-6·…
        let cfg = PriorConfig::new(1.0, 1e-6, 3).unwrap();
        let mut rng = seeded(103);
        assert!(matches!(
            cfg.sample_prior(&mut rng),
            Err(Error::PriorSamplingExhausted { .. })
        ));
    }

    #[test]
    fn component_cdf_matches_numeric_integration() {
        // Oracle: composite Simpson integration of the normalized density
        // (2ζ³/π)·(ζ² + t²)^{-2}.
        let cfg = PriorConfig::new(0.7, 100.0, 1).unwrap();
        let z = 0.7f64;
        let dens = |t: f64| 2.0 * z.powi(3) / std::f64::consts::PI * (z * z + t * t).powi(-2);
        for &x in &[-5.0, -1.0, -0.1, 0.0, 0.3, 2.0, 8.0] {
            // integrate from -60 (CDF there ≲ 1e-6 of tail mass, add it analytically)
            let lo = -60.0;
            let m = 200_000;
            let h = (x - lo) / m as f64;
            let mut s = dens(lo) + dens(x);
            for k in 1..m {
                let t = lo + k as f64 * h;
                s += if k % 2 == 1 { 4.0 } else { 2.0 } * dens(t);
            }
            let tail = cfg.prior_component_cdf(lo);
            let want = tail + s * h / 3.0;
            let got = cfg.prior_component_cdf(x);
            assert!((got - want).abs() < 1e-9, "x={x}: {got} vs {want}");
        }
        assert_eq!(cfg.prior_component_cdf(f64::NEG_INFINITY), 0.0);
        assert_eq!(cfg.prior_component_cdf(f64::INFINITY), 1.0);
        assert!((cfg.prior_component_cdf(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn component_draws_pass_a_ks_test() {
        // With B₁ = 100 and unit ζ the truncation distorts the marginal by
        // far less than the KS resolution, so the untruncated CDF applies.
        let cfg = PriorConfig::new(1.0, 100.0, 5).unwrap();
        let mut rng = seeded(107);
        let n = 10_000;
        let mut first = Vec::with_capacity(n);
        for _ in 0..n {
            first.push(cfg.sample_prior(&mut rng).unwrap()[0]);
        }
        let d = ks_statistic(&first, |x| cfg.prior_component_cdf(x)).unwrap();
        let crit = ks_critical(n, 0.01);
        assert!(d < crit, "KS statistic {d} ≥ critical {crit}");
    }

    #[test]
    fn log_density_is_exactly_sign_symmetric() {
        let cfg = PriorConfig::new(0.4, 10.0, 3).unwrap();
        let mut rng = seeded(109);
        for _ in 0..50 {
            let beta = Array1::from_shape_fn(3, |_| rng.gen_range(-2.0..2.0));
            let base = cfg.log_prior_unnormalized(&beta).unwrap();
            assert_eq!(base, cfg.log_prior_unnormalized(&beta.mapv(|b| -b)).unwrap());
            for j in 0..3 {
                let mut flip = beta.clone();
                flip[j] = -flip[j];
                assert_eq!(base, cfg.log_prior_unnormalized(&flip).unwrap());
            }
        }
    }

    #[test]
    fn log_density_is_nonincreasing_along_rays() {
        let cfg = PriorConfig::new(0.25, 8.0, 4).unwrap();
        let mut rng = seeded(113);
        for _ in 0..20 {
            let mut u: Array1<f64> = Array1::from_shape_fn(4, |_| rng.gen_range(-1.0..1.0));
            let norm = u.dot(&u).sqrt();
            u /= norm;
            let mut prev = f64::INFINITY;
            for k in 0..80 {
                let t = 0.1 * k as f64; // stays inside the ball (max ‖β‖ = 7.9)
                let g = cfg.log_prior_unnormalized(&u.mapv(|v| t * v)).unwrap();
                assert!(g <= prev + 1e-12, "t={t}: {g} > {prev}");
                prev = g;
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences_at_many_points() {
        let cfg = PriorConfig::new(0.6, 4.0, 3).unwrap();
        let mut rng = seeded(127);
        for _ in 0..100 {
            let beta = Array1::from_shape_fn(3, |_| rng.gen_range(-1.0..1.0));
            let g = cfg.log_prior_gradient(&beta).unwrap();
            for j in 0..3 {
                let h = 1e-5 * (1.0 + beta[j].abs());
                let mut bp = beta.clone();
                bp[j] += h;
                let mut bm = beta.clone();
                bm[j] -= h;
                let fd = (cfg.log_prior_unnormalized(&bp).unwrap()
                    - cfg.log_prior_unnormalized(&bm).unwrap())
                    / (2.0 * h);
                assert!(
                    (fd - g[j]).abs() <= 1e-6 * g[j].abs().max(1.0),
                    "coord {j}: fd {fd} vs {}",
                    g[j]
                );
            }
        }
    }

    #[test]
    fn gradient_known_value_at_beta_equal_zeta() {
        // −4ζ/(ζ² + ζ²) = −2/ζ.
        for zeta in [0.1, 1.0, 2.5] {
            let cfg = PriorConfig::new(zeta, 100.0, 1).unwrap();
            let g = cfg.log_prior_gradient(&array![zeta]).unwrap();
            assert!((g[0] + 2.0 / zeta).abs() < 1e-12 / zeta, "zeta {zeta}");
        }
        let cfg = PriorConfig::new(1.0, 100.0, 2).unwrap();
        assert_eq!(cfg.log_prior_gradient(&array![0.0, 0.0]).unwrap(), array![0.0, 0.0]);
    }

    #[test]
    fn component_median_is_near_zero() {
        let cfg = PriorConfig::new(1.0, 100.0, 2).unwrap();
        let mut rng = seeded(131);
        let n = 10_000;
        let mut first = Vec::with_capacity(n);
        for _ in 0..n {
            first.push(cfg.sample_prior(&mut rng).unwrap()[0]);
        }
        first.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let med = 0.5 * (first[n / 2 - 1] + first[n / 2]);
        // Median SE = 1/(2 f(0) √n) with f(0) = 2/(πζ) ≈ 0.64: about 0.008.
        assert!(med.abs() < 0.05, "median {med}");
    }

    #[test]
    fn tiny_zeta_concentrates_draws_near_the_origin() {
        // ζ = 1e-6, p = 50: all |β_j| < 1e-4 in ≳ 99% of draws (each
        // component needs |t₃| < 173, a ~7e-8 tail event per coordinate).
        let cfg = PriorConfig::new(1e-6, 100.0, 50).unwrap();
        let mut rng = seeded(137);
        let n = 10_000;
        let mut hits = 0usize;
        for _ in 0..n {
            let b = cfg.sample_prior(&mut rng).unwrap();
            if b.iter().all(|v| v.abs() < 1e-4) {
                hits += 1;
            }
        }
        assert!(
            hits as f64 / n as f64 > 0.99,
            "concentrated fraction {}",
            hits as f64 / n as f64
        );
    }
}
