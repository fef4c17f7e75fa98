//! One-parameter natural exponential families used as response models.
//!
//! A family is determined by its cumulant function b on an admissible
//! interval Θ of natural parameters, together with a known scale a > 0:
//!
//! ```text
//!     f_θ(y) = exp{ (y·θ − b(θ)) / a + c(y, a) }
//! ```
//!
//! The derivatives of the cumulant carry the moments: b′(θ) is the response
//! mean and a·b″(θ) the response variance. Three concrete families are
//! supported:
//!
//! | family    | b(θ)           | Θ default   | a        |
//! |-----------|----------------|-------------|----------|
//! | Gaussian  | θ²/2           | (−∞, ∞)     | σ² (free)|
//! | Bernoulli | log(1 + e^θ)   | (−∞, ∞)     | 1        |
//! | Poisson   | e^θ            | (−∞, +3]    | 1        |
//!
//! The Poisson cumulant grows doubly fast in θ, so its interval must be
//! bounded above; the default cap is +3. Every constructor precomputes the
//! curvature envelope L = inf b″ and U = sup b″ over Θ, which downstream
//! step-size heuristics rely on.

use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson as PoissonDist};
use serde::{Deserialize, Serialize};

/// Default upper cap for the Poisson natural parameter.
pub const POISSON_DEFAULT_THETA_HI: f64 = 3.0;

/// A closed interval of admissible natural parameters; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    /// The whole real line.
    pub const REAL: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::InvalidFamily(format!(
                "bad natural-parameter interval [{lo}, {hi}]"
            )));
        }
        Ok(Interval { lo, hi })
    }

    pub fn contains(&self, theta: f64) -> bool {
        theta >= self.lo && theta <= self.hi
    }
}

/// The supported response distributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    Gaussian,
    Bernoulli,
    Poisson,
}

/// A fully specified exponential family: kind, scale, admissible interval,
/// and the curvature envelope of the cumulant over that interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Family {
    kind: FamilyKind,
    scale_a: f64,
    theta_interval: Interval,
    curvature_u: f64,
    curvature_l: f64,
}

/// Numerically stable log(1 + e^t).
fn log1p_exp(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// Numerically stable logistic function e^t / (1 + e^t).
fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Bernoulli curvature b″(θ) = σ(θ)·σ(−θ), computed without cancellation.
fn bernoulli_curvature(t: f64) -> f64 {
    sigmoid(t) * sigmoid(-t)
}

impl Family {
    /// Gaussian family with variance `scale_a` = σ² on the whole real line.
    pub fn gaussian(scale_a: f64) -> Result<Self> {
        Self::gaussian_on(scale_a, Interval::REAL)
    }

    /// Gaussian family on a restricted interval.
    pub fn gaussian_on(scale_a: f64, theta_interval: Interval) -> Result<Self> {
        if !(scale_a.is_finite() && scale_a > 0.0) {
            return Err(Error::InvalidFamily(format!(
                "Gaussian scale must be a positive finite variance, got {scale_a}"
            )));
        }
        Ok(Family {
            kind: FamilyKind::Gaussian,
            scale_a,
            theta_interval,
            curvature_u: 1.0,
            curvature_l: 1.0,
        })
    }

    /// Bernoulli family (a = 1) on the whole real line.
    pub fn bernoulli() -> Self {
        Self::bernoulli_on(Interval::REAL).expect("unrestricted interval is valid")
    }

    /// Bernoulli family on a restricted interval.
    pub fn bernoulli_on(theta_interval: Interval) -> Result<Self> {
        // b″ peaks at 1/4 in θ = 0 and decays monotonically on either side.
        let iv = theta_interval;
        let at_lo = if iv.lo.is_finite() { bernoulli_curvature(iv.lo) } else { 0.0 };
        let at_hi = if iv.hi.is_finite() { bernoulli_curvature(iv.hi) } else { 0.0 };
        let curvature_u = if iv.contains(0.0) { 0.25 } else { at_lo.max(at_hi) };
        let curvature_l = at_lo.min(at_hi);
        Ok(Family {
            kind: FamilyKind::Bernoulli,
            scale_a: 1.0,
            theta_interval: iv,
            curvature_u,
            curvature_l,
        })
    }

    /// Poisson family (a = 1) capped above by `theta_hi`, unbounded below.
    pub fn poisson(theta_hi: f64) -> Result<Self> {
        Self::poisson_on(Interval::new(f64::NEG_INFINITY, theta_hi)?)
    }

    /// Poisson family on a restricted interval. The upper end must be finite,
    /// otherwise the cumulant (and the curvature envelope) is unbounded.
    pub fn poisson_on(theta_interval: Interval) -> Result<Self> {
        if !theta_interval.hi.is_finite() {
            return Err(Error::InvalidFamily(
                "Poisson requires a finite upper natural-parameter cap".into(),
            ));
        }
        let curvature_l = if theta_interval.lo.is_finite() {
            theta_interval.lo.exp()
        } else {
            0.0
        };
        Ok(Family {
            kind: FamilyKind::Poisson,
            scale_a: 1.0,
            theta_interval,
            curvature_u: theta_interval.hi.exp(),
            curvature_l,
        })
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    /// The dispersion scale a (σ² for the Gaussian, 1 otherwise).
    pub fn scale(&self) -> f64 {
        self.scale_a
    }

    pub fn theta_interval(&self) -> Interval {
        self.theta_interval
    }

    /// U = sup over Θ of b″.
    pub fn curvature_u(&self) -> f64 {
        self.curvature_u
    }

    /// L = inf over Θ of b″.
    pub fn curvature_l(&self) -> f64 {
        self.curvature_l
    }

    /// Window of natural parameters on which central finite differences of
    /// b and b′ stay well conditioned, for derivative self-checks. Past
    /// |θ| ≈ 12 the Bernoulli mean saturates at machine precision and its
    /// curvature (≈ e^{−|θ|}) sinks below what central differences can
    /// resolve; the other families are merely clipped to a generous finite
    /// box inside their admissible interval.
    pub fn fd_probe_window(&self) -> (f64, f64) {
        let (lo, hi): (f64, f64) = match self.kind {
            FamilyKind::Gaussian => (-30.0, 30.0),
            FamilyKind::Bernoulli => (-12.0, 12.0),
            FamilyKind::Poisson => (-10.0, 30.0),
        };
        (lo.max(self.theta_interval.lo), hi.min(self.theta_interval.hi))
    }

    /// Error unless θ lies in the admissible interval.
    pub fn check_theta(&self, theta: f64) -> Result<()> {
        if !theta.is_finite() || !self.theta_interval.contains(theta) {
            return Err(Error::ThetaOutOfDomain {
                value: theta,
                lo: self.theta_interval.lo,
                hi: self.theta_interval.hi,
            });
        }
        Ok(())
    }

    /// Cumulant b(θ).
    pub fn cumulant(&self, theta: f64) -> Result<f64> {
        self.check_theta(theta)?;
        Ok(match self.kind {
            FamilyKind::Gaussian => 0.5 * theta * theta,
            FamilyKind::Bernoulli => log1p_exp(theta),
            FamilyKind::Poisson => theta.exp(),
        })
    }

    /// Mean b′(θ).
    pub fn mean(&self, theta: f64) -> Result<f64> {
        self.check_theta(theta)?;
        Ok(match self.kind {
            FamilyKind::Gaussian => theta,
            FamilyKind::Bernoulli => sigmoid(theta),
            FamilyKind::Poisson => theta.exp(),
        })
    }

    /// Variance rate b″(θ); the response variance is a·b″(θ).
    pub fn variance_rate(&self, theta: f64) -> Result<f64> {
        self.check_theta(theta)?;
        Ok(match self.kind {
            FamilyKind::Gaussian => 1.0,
            FamilyKind::Bernoulli => bernoulli_curvature(theta),
            FamilyKind::Poisson => theta.exp(),
        })
    }

    /// Draw one response Y ~ f_θ. Bernoulli draws are returned as 0/1 and
    /// Poisson counts as nonnegative integers, both in f64.
    pub fn sample_response<R: Rng + ?Sized>(&self, theta: f64, rng: &mut R) -> Result<f64> {
        self.check_theta(theta)?;
        Ok(match self.kind {
            FamilyKind::Gaussian => {
                let n = Normal::new(theta, self.scale_a.sqrt())
                    .map_err(|e| Error::InvalidFamily(format!("Gaussian sampling: {e}")))?;
                n.sample(rng)
            }
            FamilyKind::Bernoulli => {
                let pr = sigmoid(theta);
                if rng.gen::<f64>() < pr {
                    1.0
                } else {
                    0.0
                }
            }
            FamilyKind::Poisson => {
                let lambda = theta.exp();
                if lambda == 0.0 {
                    // exp underflow deep in the left tail: the count is 0 a.s.
                    0.0
                } else {
                    let d = PoissonDist::new(lambda)
                        .map_err(|e| Error::InvalidFamily(format!("Poisson sampling: {e}")))?;
                    d.sample(rng)
                }
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    /// Golden-ratio sequence of k points filling [lo, hi].
    fn quasi_points(lo: f64, hi: f64, k: usize) -> Vec<f64> {
        const PHI: f64 = 0.618_033_988_749_894_9;
        (1..=k)
            .map(|i| lo + (i as f64 * PHI).fract() * (hi - lo))
            .collect()
    }

    fn central_diff<F: Fn(f64) -> f64>(f: F, t: f64) -> f64 {
        let h = 6e-6 * t.abs().max(1.0);
        (f(t + h) - f(t - h)) / (2.0 * h)
    }

    /// The three reference families with their frozen FD probe windows
    /// (see [`Family::fd_probe_window`] for why Bernoulli stops at 12).
    fn families_with_probe_windows() -> Vec<(Family, f64, f64)> {
        vec![
            (Family::gaussian(1.0).unwrap(), -30.0, 30.0),
            (Family::bernoulli(), -12.0, 12.0),
            (Family::poisson(3.0).unwrap(), -10.0, 3.0),
        ]
    }

    #[test]
    fn fd_probe_windows_match_the_frozen_choices() {
        for (fam, lo, hi) in families_with_probe_windows() {
            assert_eq!(fam.fd_probe_window(), (lo, hi), "{:?}", fam.kind());
        }
        // The window never leaves the admissible interval.
        let capped = Family::poisson(1.5).unwrap();
        assert_eq!(capped.fd_probe_window(), (-10.0, 1.5));
    }

    #[test]
    fn cumulant_known_values() {
        let g = Family::gaussian(1.0).unwrap();
        assert_eq!(g.cumulant(2.0).unwrap(), 2.0);
        let b = Family::bernoulli();
        // stable branch: no overflow, and log(1+e^700) ≈ 700
        let v = b.cumulant(700.0).unwrap();
        assert!(v.is_finite());
        assert!((v - 700.0).abs() < 1e-12);
        assert!((b.cumulant(0.0).unwrap() - 2.0f64.ln()).abs() < 1e-15);
        let p = Family::poisson(3.0).unwrap();
        assert!((p.cumulant(0.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn poisson_cap_is_enforced() {
        let p = Family::poisson(3.0).unwrap();
        let err = p.cumulant(3.5).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("3.5") && msg.contains("[-inf, 3]"), "got: {msg}");
        assert!(p.cumulant(3.0).is_ok(), "cap is inclusive");
        assert!(Family::poisson(f64::INFINITY).is_err());
    }

    #[test]
    fn mean_known_values() {
        assert_eq!(Family::bernoulli().mean(0.0).unwrap(), 0.5);
        assert_eq!(Family::gaussian(2.0).unwrap().mean(-3.0).unwrap(), -3.0);
        let p = Family::poisson(3.0).unwrap();
        assert!((p.mean(2.0f64.ln()).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn variance_rate_known_values() {
        assert_eq!(Family::bernoulli().variance_rate(0.0).unwrap(), 0.25);
        // b″(1) = e for Poisson, frozen to the f64 constant
        let p = Family::poisson(3.0).unwrap();
        assert!((p.variance_rate(1.0).unwrap() - std::f64::consts::E).abs() < 1e-15);
        assert_eq!(Family::gaussian(0.5).unwrap().variance_rate(9.0).unwrap(), 1.0);
    }

    #[test]
    fn curvature_envelope_brackets_variance_rate() {
        for (fam, lo, hi) in families_with_probe_windows() {
            for t in quasi_points(lo, hi, 500) {
                let v = fam.variance_rate(t).unwrap();
                assert!(
                    v >= fam.curvature_l() - 1e-15 && v <= fam.curvature_u() + 1e-15,
                    "{:?}: b″({t}) = {v} outside [{}, {}]",
                    fam.kind(),
                    fam.curvature_l(),
                    fam.curvature_u()
                );
            }
            assert!(fam.curvature_l() <= fam.curvature_u());
        }
    }

    #[test]
    fn bernoulli_curvature_on_shifted_interval() {
        // Θ = [1, 5] excludes the peak at 0, so U = b″(1) < 1/4.
        let f = Family::bernoulli_on(Interval::new(1.0, 5.0).unwrap()).unwrap();
        let expect = {
            let s = 1.0 / (1.0 + (-1.0f64).exp());
            s * (1.0 - s)
        };
        assert!((f.curvature_u() - expect).abs() < 1e-15);
        assert!(f.curvature_u() < 0.25);
        assert!(f.curvature_l() > 0.0);
    }

    #[test]
    fn cumulant_derivative_matches_mean() {
        for (fam, lo, hi) in families_with_probe_windows() {
            for t in quasi_points(lo, hi, 1000) {
                let fd = central_diff(|u| fam.cumulant(u).unwrap(), t);
                let exact = fam.mean(t).unwrap();
                let rel = (fd - exact).abs() / exact.abs().max(1e-300);
                assert!(rel <= 1e-6, "{:?} at θ={t}: fd={fd}, b′={exact}", fam.kind());
            }
        }
    }

    #[test]
    fn mean_derivative_matches_variance_rate() {
        for (fam, lo, hi) in families_with_probe_windows() {
            for t in quasi_points(lo, hi, 1000) {
                let fd = central_diff(|u| fam.mean(u).unwrap(), t);
                let exact = fam.variance_rate(t).unwrap();
                let rel = (fd - exact).abs() / exact.abs().max(1e-300);
                assert!(rel <= 1e-5, "{:?} at θ={t}: fd={fd}, b″={exact}", fam.kind());
            }
        }
    }

    #[test]
    fn cumulant_is_convex() {
        let mut rng = seeded(11);
        use rand::Rng;
        for (fam, lo, hi) in families_with_probe_windows() {
            for _ in 0..500 {
                let t1 = rng.gen_range(lo..hi);
                let t2 = rng.gen_range(lo..hi);
                let w: f64 = rng.gen();
                let mid = w * t1 + (1.0 - w) * t2;
                let lhs = fam.cumulant(mid).unwrap();
                let rhs = w * fam.cumulant(t1).unwrap() + (1.0 - w) * fam.cumulant(t2).unwrap();
                assert!(lhs <= rhs + 1e-12, "{:?}: convexity violated", fam.kind());
            }
        }
    }

    #[test]
    fn degenerate_gaussian_variance_rejected() {
        assert!(Family::gaussian(0.0).is_err());
        assert!(Family::gaussian(-1.0).is_err());
        assert!(Family::gaussian(f64::NAN).is_err());
    }

    #[test]
    fn saturated_bernoulli_draws_one() {
        let f = Family::bernoulli_on(Interval::new(-50.0, 50.0).unwrap()).unwrap();
        let mut rng = seeded(5);
        for _ in 0..100 {
            assert_eq!(f.sample_response(50.0, &mut rng).unwrap(), 1.0);
        }
        assert!(f.sample_response(60.0, &mut rng).is_err(), "outside the cap");
    }

    #[test]
    fn sample_means_match_theory() {
        // Empirical mean of 1e5 draws within 4 standard errors of b′(θ).
        let cases: Vec<(Family, f64)> = vec![
            (Family::gaussian(2.0).unwrap(), 0.7),
            (Family::bernoulli(), -0.4),
            (Family::poisson(3.0).unwrap(), 1.1),
        ];
        let n = 100_000;
        for (fam, theta) in cases {
            let mut rng = seeded(17);
            let mut s = 0.0;
            for _ in 0..n {
                s += fam.sample_response(theta, &mut rng).unwrap();
            }
            let emp = s / n as f64;
            let se = (fam.scale() * fam.variance_rate(theta).unwrap() / n as f64).sqrt();
            let dev = (emp - fam.mean(theta).unwrap()).abs();
            assert!(
                dev <= 4.0 * se,
                "{:?}: |{emp} − {}| = {dev} > 4·{se}",
                fam.kind(),
                fam.mean(theta).unwrap()
            );
        }
    }

    #[test]
    fn poisson_draws_are_counts() {
        let p = Family::poisson(3.0).unwrap();
        let mut rng = seeded(23);
        for _ in 0..1000 {
            let y = p.sample_response(1.5, &mut rng).unwrap();
            assert!(y >= 0.0 && y.fract() == 0.0);
        }
        // underflowing rate draws zero
        assert_eq!(p.sample_response(-800.0, &mut rng).unwrap(), 0.0);
    }
}
