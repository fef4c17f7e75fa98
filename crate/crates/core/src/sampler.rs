//! Metropolis–Hastings samplers for the Gibbs posterior: a Metropolis-
//! adjusted Langevin algorithm (MALA) and a random-walk fallback (RWM).
//!
//! Proposals that leave the posterior's support are rejected by the accept
//! step (the log-density there is −∞), never reflected or clamped. Step
//! sizes default to a curvature-based heuristic and are halved during
//! burn-in whenever a block's acceptance rate collapses; after burn-in the
//! step is frozen so the chain targets the exact posterior.

use crate::error::{Error, Result};
use crate::expfam::Family;
use crate::gibbs::GibbsPosterior;
use crate::glm::{kl_risk, NaturalParams};
use crate::rng::{seeded, SeedRng};
use crate::stats::{ess_initial_positive, mean, variance};
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// Cap on 1/ζ² in the step-size heuristic, so tiny prior scales cannot
/// drive the step to zero.
const STEP_CURVATURE_CAP: f64 = 1e6;
/// Acceptance rate below which a burn-in block triggers a step halving.
const ADAPT_MIN_ACCEPT: f64 = 0.1;
/// Maximum number of burn-in step halvings.
const ADAPT_MAX_HALVINGS: u32 = 10;
/// Retry budget for drawing a feasible initial state from the prior.
const INIT_MAX_ATTEMPTS: usize = 1000;

/// Which Metropolis–Hastings proposal to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum McmcAlgorithm {
    Mala,
    Rwm,
}

/// How to initialize each chain.
#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// Draw from the prior until the posterior density is positive.
    PriorDraw,
    /// Start at the origin.
    Zero,
    /// Start at a caller-supplied point (e.g. a maximum-likelihood fit).
    Vector(Array1<f64>),
}

/// Sampler settings; `step_size: None` selects the heuristic.
///
/// `n_iters` counts total Markov steps per chain; the first `burn_in` of
/// them (default `n_iters / 5`) are discarded and the rest are kept at
/// stride `thin`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub algorithm: McmcAlgorithm,
    pub step_size: Option<f64>,
    pub n_iters: usize,
    /// Burn-in iterations, strictly less than `n_iters`; `None` means
    /// `n_iters / 5`.
    pub burn_in: Option<usize>,
    pub thin: usize,
    pub n_chains: usize,
    pub seed: u64,
    pub init: Init,
}

impl SamplerConfig {
    /// MALA with heuristic step, four chains, a fifth of the run as burn-in.
    pub fn basic(n_iters: usize, seed: u64) -> Self {
        SamplerConfig {
            algorithm: McmcAlgorithm::Mala,
            step_size: None,
            n_iters,
            burn_in: None,
            thin: 1,
            n_chains: 4,
            seed,
            init: Init::PriorDraw,
        }
    }

    /// Resolved burn-in length.
    pub fn burn_in_len(&self) -> usize {
        self.burn_in.unwrap_or(self.n_iters / 5)
    }

    /// Number of draws each chain will retain.
    pub fn kept_per_chain(&self) -> usize {
        let post = self.n_iters.saturating_sub(self.burn_in_len());
        (post + self.thin - 1) / self.thin.max(1)
    }

    fn validate(&self, p: usize) -> Result<()> {
        if self.n_iters == 0 {
            return Err(Error::InvalidConfig("n_iters must be ≥ 1".into()));
        }
        if self.burn_in_len() >= self.n_iters {
            return Err(Error::InvalidConfig(format!(
                "burn_in ({}) must be < n_iters ({})",
                self.burn_in_len(),
                self.n_iters
            )));
        }
        if self.thin == 0 {
            return Err(Error::InvalidConfig("thin must be ≥ 1".into()));
        }
        if self.n_chains == 0 {
            return Err(Error::InvalidConfig("n_chains must be ≥ 1".into()));
        }
        if let Some(h) = self.step_size {
            if !h.is_finite() || h <= 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "step size must be positive and finite, got {h}"
                )));
            }
        }
        if let Init::Vector(v) = &self.init {
            if v.len() != p {
                return Err(Error::DimensionMismatch {
                    what: "initial vector length vs posterior dimension",
                    expected: p,
                    got: v.len(),
                });
            }
        }
        Ok(())
    }
}

/// One chain's kept draws and diagnostics.
#[derive(Debug, Clone)]
pub struct Chain {
    /// Kept draws, one row per retained post-burn-in state.
    pub draws: Array2<f64>,
    /// Unnormalized log-posterior at each kept draw.
    pub log_post_trace: Array1<f64>,
    /// Acceptance rate over post-burn-in iterations.
    pub accept_rate: f64,
    /// Step size in force after burn-in adaptation.
    pub step_size: f64,
    /// Number of burn-in step halvings.
    pub n_halvings: u32,
    /// Seed this chain ran with.
    pub seed_used: u64,
    /// The settings the chain actually ran with.
    pub config_echo: SamplerConfig,
}

/// Monte-Carlo estimate of an integrated risk, with uncertainty.
#[derive(Debug, Clone)]
pub struct KlRiskEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub ess: f64,
}

/// Curvature-matched step size:
/// h = 0.5·p^{-1/3} / √( λ·U·‖X‖²/(n·a) + min(ζ⁻², 10⁶) ).
pub fn heuristic_step_size(post: &GibbsPosterior) -> f64 {
    let data = post.dataset();
    let fam = data.family();
    let lik_curv = post.lambda() * fam.curvature_u() * post.norm_x() * post.norm_x()
        / (data.n() as f64 * fam.scale());
    let prior_curv = (1.0 / (post.prior().zeta() * post.prior().zeta())).min(STEP_CURVATURE_CAP);
    0.5 * (post.p() as f64).powf(-1.0 / 3.0) / (lik_curv + prior_curv).sqrt()
}

/// The Metropolis accept/reject coin: accept with probability
/// min(1, exp(log_ratio)); NaN ratios reject.
pub fn metropolis_accept<R: Rng + ?Sized>(rng: &mut R, log_ratio: f64) -> bool {
    if log_ratio.is_nan() {
        return false;
    }
    log_ratio >= 0.0 || rng.gen::<f64>() < log_ratio.exp()
}

fn initial_state(
    post: &GibbsPosterior,
    cfg: &SamplerConfig,
    rng: &mut SeedRng,
    need_grad: bool,
) -> Result<(Array1<f64>, f64, Option<Array1<f64>>)> {
    let try_point = |beta: Array1<f64>| -> Result<(Array1<f64>, f64, Option<Array1<f64>>)> {
        let (lp, grad) = post.eval(&beta, need_grad);
        if !lp.is_finite() {
            return Err(Error::BadInit(
                "initial state has zero posterior mass".into(),
            ));
        }
        if need_grad && grad.is_none() {
            return Err(Error::BadInit(
                "gradient undefined at the initial state (support boundary)".into(),
            ));
        }
        Ok((beta, lp, grad))
    };
    match &cfg.init {
        Init::Zero => try_point(Array1::zeros(post.p())),
        Init::Vector(v) => try_point(v.clone()),
        Init::PriorDraw => {
            for _ in 0..INIT_MAX_ATTEMPTS {
                let beta = post.prior().sample_prior(rng)?;
                let (lp, grad) = post.eval(&beta, need_grad);
                if lp.is_finite() && (!need_grad || grad.is_some()) {
                    return Ok((beta, lp, grad));
                }
            }
            Err(Error::BadInit(format!(
                "no prior draw with positive posterior mass in {INIT_MAX_ATTEMPTS} attempts"
            )))
        }
    }
}

/// Log-density of the MALA proposal β′ ~ N(β + (h²/2)∇, h² I), up to the
/// Gaussian constant (which cancels in the Metropolis ratio).
fn mala_logq(to: &Array1<f64>, from: &Array1<f64>, grad_from: &Array1<f64>, h: f64) -> f64 {
    let h2 = h * h;
    let mut s = 0.0;
    for i in 0..to.len() {
        let d = to[i] - from[i] - 0.5 * h2 * grad_from[i];
        s += d * d;
    }
    -s / (2.0 * h2)
}

fn run_chain(post: &GibbsPosterior, cfg: &SamplerConfig, chain_idx: usize) -> Result<Chain> {
    let p = post.p();
    let seed_used = cfg.seed.wrapping_add(chain_idx as u64);
    let mut rng = seeded(seed_used);
    let use_grad = cfg.algorithm == McmcAlgorithm::Mala;
    let (mut beta, mut lp, mut grad) = initial_state(post, cfg, &mut rng, use_grad)?;

    let mut h = cfg.step_size.unwrap_or_else(|| heuristic_step_size(post));
    let burn = cfg.burn_in_len();
    let post_iters = cfg.n_iters - burn;
    let block = (burn / 10).max(50);
    let kept = cfg.kept_per_chain();
    let mut draws = Array2::<f64>::zeros((kept, p));
    let mut log_post_trace = Array1::<f64>::zeros(kept);
    let mut row = 0usize;

    let mut n_halvings = 0u32;
    let mut block_accepts = 0usize;
    let mut block_len = 0usize;
    let mut post_accepts = 0usize;

    let mut noise = Array1::<f64>::zeros(p);
    for t in 0..cfg.n_iters {
        for z in noise.iter_mut() {
            *z = rng.sample(StandardNormal);
        }
        let accepted = match cfg.algorithm {
            McmcAlgorithm::Rwm => {
                let prop = &beta + &(&noise * h);
                let (lp_new, _) = post.eval(&prop, false);
                if lp_new > f64::NEG_INFINITY && metropolis_accept(&mut rng, lp_new - lp) {
                    beta = prop;
                    lp = lp_new;
                    true
                } else {
                    false
                }
            }
            McmcAlgorithm::Mala => {
                let g = grad.as_ref().ok_or(Error::BoundaryGradient {
                    norm: beta.dot(&beta).sqrt(),
                    radius: post.prior().b1(),
                })?;
                let mut prop = beta.clone();
                let h2 = 0.5 * h * h;
                for i in 0..p {
                    prop[i] += h2 * g[i] + h * noise[i];
                }
                let (lp_new, grad_new) = post.eval(&prop, true);
                // A finite-density point without a gradient (exactly on the
                // ball boundary) has no reverse proposal density; rejecting
                // this measure-zero event leaves the target invariant.
                match grad_new {
                    Some(g_new) if lp_new.is_finite() => {
                        let log_ratio = lp_new - lp + mala_logq(&beta, &prop, &g_new, h)
                            - mala_logq(&prop, &beta, g, h);
                        if metropolis_accept(&mut rng, log_ratio) {
                            beta = prop;
                            lp = lp_new;
                            grad = Some(g_new);
                            true
                        } else {
                            false
                        }
                    }
                    _ => false,
                }
            }
        };

        if t < burn {
            block_accepts += accepted as usize;
            block_len += 1;
            if block_len == block {
                if (block_accepts as f64) < ADAPT_MIN_ACCEPT * block as f64
                    && n_halvings < ADAPT_MAX_HALVINGS
                {
                    h *= 0.5;
                    n_halvings += 1;
                }
                block_accepts = 0;
                block_len = 0;
            }
        } else {
            post_accepts += accepted as usize;
            let k = t - burn;
            if k % cfg.thin == 0 {
                draws.row_mut(row).assign(&beta);
                log_post_trace[row] = lp;
                row += 1;
            }
        }
    }
    debug_assert_eq!(row, kept);
    if post_accepts == 0 {
        return Err(Error::AllRejected { step_size: h });
    }
    Ok(Chain {
        draws,
        log_post_trace,
        accept_rate: post_accepts as f64 / post_iters as f64,
        step_size: h,
        n_halvings,
        seed_used,
        config_echo: cfg.clone(),
    })
}

/// Run `cfg.n_chains` independent chains with seeds `seed`, `seed+1`, …
/// Chains run in parallel; results are deterministic given the config.
pub fn run_chains(post: &GibbsPosterior, cfg: &SamplerConfig) -> Result<Vec<Chain>> {
    cfg.validate(post.p())?;
    if cfg.n_chains == 1 {
        return Ok(vec![run_chain(post, cfg, 0)?]);
    }
    (0..cfg.n_chains)
        .into_par_iter()
        .map(|k| run_chain(post, cfg, k))
        .collect()
}

/// Posterior-mean coefficient estimate pooled over chains (the aggregate's
/// point estimate β̂_M).
pub fn posterior_mean(chains: &[Chain]) -> Result<Array1<f64>> {
    let total: usize = chains.iter().map(|c| c.draws.nrows()).sum();
    if total == 0 {
        return Err(Error::EmptyChain);
    }
    let p = chains[0].draws.ncols();
    let mut m = Array1::<f64>::zeros(p);
    for c in chains {
        for row in c.draws.rows() {
            m += &row;
        }
    }
    Ok(m / total as f64)
}

/// Monte-Carlo estimate of the integrated KL risk ∫ KL(θ⁰, Xβ) ρ̂(dβ),
/// with a standard error discounted by the chains' effective sample size
/// (initial-positive-sequence estimator on the KL series).
pub fn integrated_kl_risk(
    chains: &[Chain],
    theta0: &NaturalParams,
    x: &Array2<f64>,
    family: &Family,
) -> Result<KlRiskEstimate> {
    let total: usize = chains.iter().map(|c| c.draws.nrows()).sum();
    if total == 0 {
        return Err(Error::EmptyChain);
    }
    let mut pooled = Vec::with_capacity(total);
    let mut ess = 0.0;
    for c in chains {
        let mut series = Vec::with_capacity(c.draws.nrows());
        for row in c.draws.rows() {
            let beta = row.to_owned();
            series.push(kl_risk(theta0, x, &beta, family)?);
        }
        ess += ess_initial_positive(&series);
        pooled.extend(series);
    }
    let m = mean(&pooled);
    let sd = variance(&pooled).sqrt();
    Ok(KlRiskEstimate {
        mean: m,
        std_err: sd / ess.sqrt(),
        ess,
    })
}

/// Write chains to CSV with header `chain,draw,beta_0,…,beta_{p−1},log_post`.
/// Floats use Rust's shortest round-trip formatting.
pub fn write_chains_csv<P: AsRef<Path>>(path: P, chains: &[Chain]) -> Result<()> {
    if chains.is_empty() {
        return Err(Error::EmptyChain);
    }
    let p = chains[0].draws.ncols();
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(out, "chain,draw")?;
    for j in 0..p {
        write!(out, ",beta_{j}")?;
    }
    writeln!(out, ",log_post")?;
    for (ci, c) in chains.iter().enumerate() {
        for (di, row) in c.draws.rows().into_iter().enumerate() {
            write!(out, "{ci},{di}")?;
            for v in row.iter() {
                write!(out, ",{v}")?;
            }
            writeln!(out, ",{}", c.log_post_trace[di])?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expfam::Family;
    use crate::glm::{natural_params, Dataset};
    use crate::prior::PriorConfig;
    use ndarray::array;
    use std::sync::Arc;

    fn line_posterior(lambda_over_n: bool) -> GibbsPosterior {
        // 1-d Gaussian regression: 40 unit covariates, y near 0.8.
        let n = 40;
        let x = Array2::from_elem((n, 1), 1.0);
        let mut rng = seeded(211);
        let y = Array1::from_shape_fn(n, |_| 0.8 + 0.3 * rng.sample::<f64, _>(StandardNormal));
        let data = Arc::new(Dataset::new(x, y, Family::gaussian(1.0).unwrap()).unwrap());
        let prior = PriorConfig::new(1.0, 100.0, 1).unwrap();
        let lambda = if lambda_over_n { n as f64 } else { 0.0 };
        GibbsPosterior::new(data, prior, lambda).unwrap()
    }

    /// Quadrature oracle for 1-d posterior means.
    fn quadrature_mean(post: &GibbsPosterior, lo: f64, hi: f64, m: usize) -> f64 {
        let h = (hi - lo) / m as f64;
        let mut logs = Vec::with_capacity(m + 1);
        for k in 0..=m {
            let b = array![lo + k as f64 * h];
            logs.push(post.log_posterior_unnormalized(&b).unwrap());
        }
        let mx = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let (mut num, mut den) = (0.0, 0.0);
        for (k, l) in logs.iter().enumerate() {
            let w = (l - mx).exp();
            num += w * (lo + k as f64 * h);
            den += w;
        }
        num / den
    }

    #[test]
    fn metropolis_accept_edge_cases_and_rate() {
        let mut rng = seeded(301);
        assert!(metropolis_accept(&mut rng, 0.0));
        assert!(metropolis_accept(&mut rng, 3.0));
        assert!(!metropolis_accept(&mut rng, -900.0));
        assert!(!metropolis_accept(&mut rng, f64::NAN));
        let target = 0.3f64;
        let hits = (0..10_000)
            .filter(|_| metropolis_accept(&mut rng, target.ln()))
            .count() as f64;
        let se = (target * (1.0 - target) / 10_000.0).sqrt();
        assert!((hits / 10_000.0 - target).abs() < 4.0 * se);
    }

    #[test]
    fn three_state_kernel_satisfies_detailed_balance() {
        // Discrete MH on {0,1,2} with symmetric proposals: empirical flow
        // i→j must match j→i within Monte-Carlo error, and occupancy must
        // match the target.
        let pi = [0.5f64, 0.3, 0.2];
        let mut rng = seeded(977);
        let steps = 200_000usize;
        let mut state = 0usize;
        let mut flows = [[0usize; 3]; 3];
        let mut occupancy = [0usize; 3];
        for _ in 0..steps {
            let other = if rng.gen::<bool>() { 1 } else { 2 };
            let prop = (state + other) % 3;
            let next = if metropolis_accept(&mut rng, (pi[prop] / pi[state]).ln()) {
                prop
            } else {
                state
            };
            flows[state][next] += 1;
            occupancy[next] += 1;
            state = next;
        }
        for i in 0..3 {
            let f = occupancy[i] as f64 / steps as f64;
            // Autocorrelation inflates the binomial error; 6σ of the iid
            // bound stays a strict test at this sample size.
            let se = (pi[i] * (1.0 - pi[i]) / steps as f64).sqrt();
            assert!((f - pi[i]).abs() < 6.0 * se, "state {i}: {f} vs {}", pi[i]);
            for j in (i + 1)..3 {
                let fij = flows[i][j] as f64 / steps as f64;
                let fji = flows[j][i] as f64 / steps as f64;
                let se_flow = ((fij + fji) / steps as f64).sqrt();
                assert!(
                    (fij - fji).abs() <= 3.0 * se_flow,
                    "flow {i}↔{j}: {fij} vs {fji}"
                );
            }
        }
    }

    #[test]
    fn same_seed_reproduces_chains_exactly() {
        let post = line_posterior(true);
        let cfg = SamplerConfig {
            n_iters: 300,
            n_chains: 2,
            seed: 5,
            ..SamplerConfig::basic(300, 5)
        };
        let a = run_chains(&post, &cfg).unwrap();
        let b = run_chains(&post, &cfg).unwrap();
        for (ca, cb) in a.iter().zip(b.iter()) {
            assert_eq!(ca.draws, cb.draws);
            assert_eq!(ca.accept_rate, cb.accept_rate);
        }
        assert_ne!(a[0].draws, a[1].draws, "chains must differ across seeds");
        assert_eq!(a[1].seed_used, 6);
        assert_eq!(a[0].config_echo, cfg);
    }

    #[test]
    fn thinning_burn_in_and_draw_counts() {
        let post = line_posterior(true);
        let mut cfg = SamplerConfig::basic(10, 1);
        cfg.thin = 3;
        cfg.n_chains = 1;
        assert_eq!(cfg.burn_in_len(), 2); // default: n_iters / 5
        assert_eq!(cfg.kept_per_chain(), 3); // ceil((10 − 2)/3)
        let chains = run_chains(&post, &cfg).unwrap();
        assert_eq!(chains[0].draws.nrows(), 3);
        assert_eq!(chains[0].log_post_trace.len(), 3);
        assert!(chains[0].accept_rate >= 0.0 && chains[0].accept_rate <= 1.0);
    }

    #[test]
    fn mala_matches_a_quadrature_oracle() {
        let post = line_posterior(true);
        let cfg = SamplerConfig {
            n_iters: 7500,
            burn_in: Some(1500),
            n_chains: 2,
            seed: 17,
            ..SamplerConfig::basic(7500, 17)
        };
        let chains = run_chains(&post, &cfg).unwrap();
        let m = posterior_mean(&chains).unwrap()[0];
        let want = quadrature_mean(&post, -1.0, 3.0, 8000);
        // Posterior sd ≈ 0.16; twelve thousand kept draws give plenty of
        // slack at this tolerance.
        assert!((m - want).abs() < 0.02, "{m} vs {want}");
        for c in &chains {
            assert!(c.accept_rate > 0.2, "acceptance {}", c.accept_rate);
        }
    }

    #[test]
    fn rwm_matches_a_quadrature_oracle() {
        let post = line_posterior(true);
        let cfg = SamplerConfig {
            algorithm: McmcAlgorithm::Rwm,
            n_iters: 10_000,
            burn_in: Some(2000),
            n_chains: 2,
            seed: 19,
            ..SamplerConfig::basic(10_000, 19)
        };
        let chains = run_chains(&post, &cfg).unwrap();
        let m = posterior_mean(&chains).unwrap()[0];
        let want = quadrature_mean(&post, -1.0, 3.0, 8000);
        assert!((m - want).abs() < 0.03, "{m} vs {want}");
    }

    #[test]
    fn every_kept_draw_respects_the_support() {
        // Tight ball plus a Poisson cap: kept draws must satisfy both.
        let fam = Family::poisson(0.5).unwrap();
        let x = array![[1.0], [0.5]];
        let data = Arc::new(Dataset::new(x.clone(), array![1.0, 0.0], fam).unwrap());
        let prior = PriorConfig::new(0.5, 0.4, 1).unwrap();
        let post = GibbsPosterior::new(data, prior, 2.0).unwrap();
        let cfg = SamplerConfig {
            algorithm: McmcAlgorithm::Rwm,
            n_iters: 3000,
            burn_in: Some(300),
            n_chains: 1,
            seed: 43,
            ..SamplerConfig::basic(3000, 43)
        };
        let chains = run_chains(&post, &cfg).unwrap();
        for row in chains[0].draws.rows() {
            let b = row[0];
            assert!(b.abs() <= 0.4 + 1e-12, "ball violated: {b}");
            assert!(b <= 0.5 + 1e-12, "theta cap violated: {b}");
        }
    }

    #[test]
    fn absurd_step_is_halved_during_burn_in() {
        let post = line_posterior(true);
        let cfg = SamplerConfig {
            step_size: Some(30.0), // heuristic is ≈ 0.08 here
            n_iters: 2000,
            burn_in: Some(1500),
            n_chains: 1,
            seed: 23,
            ..SamplerConfig::basic(2000, 23)
        };
        let chains = run_chains(&post, &cfg).unwrap();
        assert!(chains[0].n_halvings >= 5, "halvings {}", chains[0].n_halvings);
        assert!(chains[0].step_size < 1.0);
        assert!(chains[0].accept_rate > 0.05);
    }

    #[test]
    fn hopeless_step_without_burn_in_reports_all_rejected() {
        let post = line_posterior(true);
        let cfg = SamplerConfig {
            algorithm: McmcAlgorithm::Rwm,
            step_size: Some(1e12),
            n_iters: 200,
            burn_in: Some(0),
            n_chains: 1,
            seed: 29,
            ..SamplerConfig::basic(200, 29)
        };
        match run_chains(&post, &cfg) {
            Err(Error::AllRejected { step_size }) => assert_eq!(step_size, 1e12),
            other => panic!("expected AllRejected, got {other:?}"),
        }
    }

    #[test]
    fn bad_initial_states_are_rejected() {
        let post = line_posterior(true);
        // Wrong length
        let cfg = SamplerConfig {
            init: Init::Vector(array![0.0, 0.0]),
            n_chains: 1,
            ..SamplerConfig::basic(100, 1)
        };
        assert!(run_chains(&post, &cfg).is_err());
        // Outside the prior ball
        let cfg = SamplerConfig {
            init: Init::Vector(array![500.0]),
            n_chains: 1,
            ..SamplerConfig::basic(100, 1)
        };
        assert!(matches!(run_chains(&post, &cfg), Err(Error::BadInit(_))));
        // Zero start outside the admissible interval
        let fam = Family::poisson_on(crate::expfam::Interval::new(1.0, 3.0).unwrap()).unwrap();
        let data = Arc::new(Dataset::new(array![[1.0]], array![2.0], fam).unwrap());
        let prior = PriorConfig::new(1.0, 100.0, 1).unwrap();
        let gp = GibbsPosterior::new(data, prior, 1.0).unwrap();
        let cfg = SamplerConfig {
            init: Init::Zero,
            n_chains: 1,
            ..SamplerConfig::basic(100, 1)
        };
        assert!(matches!(run_chains(&gp, &cfg), Err(Error::BadInit(_))));
    }

    #[test]
    fn config_validation_rejects_degenerate_settings() {
        let post = line_posterior(true);
        for cfg in [
            SamplerConfig { n_iters: 0, ..SamplerConfig::basic(100, 1) },
            SamplerConfig { burn_in: Some(100), ..SamplerConfig::basic(100, 1) },
            SamplerConfig { burn_in: Some(150), ..SamplerConfig::basic(100, 1) },
            SamplerConfig { thin: 0, ..SamplerConfig::basic(100, 1) },
            SamplerConfig { n_chains: 0, ..SamplerConfig::basic(100, 1) },
            SamplerConfig { step_size: Some(0.0), ..SamplerConfig::basic(100, 1) },
            SamplerConfig { step_size: Some(f64::NAN), ..SamplerConfig::basic(100, 1) },
        ] {
            assert!(run_chains(&post, &cfg).is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn prior_only_sampling_works_at_lambda_zero() {
        let post = line_posterior(false);
        let cfg = SamplerConfig {
            n_iters: 5000,
            burn_in: Some(1000),
            n_chains: 2,
            seed: 31,
            ..SamplerConfig::basic(5000, 31)
        };
        let chains = run_chains(&post, &cfg).unwrap();
        let m = posterior_mean(&chains).unwrap()[0];
        // The prior is symmetric about zero.
        assert!(m.abs() < 0.15, "prior mean estimate {m}");
    }

    #[test]
    fn integrated_risk_reports_positive_mean_and_sane_ess() {
        let post = line_posterior(true);
        let cfg = SamplerConfig {
            n_iters: 1600,
            burn_in: Some(400),
            n_chains: 2,
            seed: 37,
            ..SamplerConfig::basic(1600, 37)
        };
        let chains = run_chains(&post, &cfg).unwrap();
        let fam = post.dataset().family().clone();
        let theta0 = natural_params(post.dataset().x(), &array![0.8], &fam).unwrap();
        let est = integrated_kl_risk(&chains, &theta0, post.dataset().x(), &fam).unwrap();
        let total: usize = chains.iter().map(|c| c.draws.nrows()).sum();
        assert!(est.mean > 0.0);
        assert!(est.std_err > 0.0);
        assert!(est.ess >= 2.0 && est.ess <= total as f64);
    }

    #[test]
    fn single_draw_risk_equals_that_draws_kl() {
        let post = line_posterior(true);
        let cfg = SamplerConfig {
            n_iters: 200,
            burn_in: Some(199),
            n_chains: 1,
            seed: 53,
            ..SamplerConfig::basic(200, 53)
        };
        let chains = run_chains(&post, &cfg).unwrap();
        assert_eq!(chains[0].draws.nrows(), 1);
        let fam = post.dataset().family().clone();
        let theta0 = natural_params(post.dataset().x(), &array![0.8], &fam).unwrap();
        let est = integrated_kl_risk(&chains, &theta0, post.dataset().x(), &fam).unwrap();
        let only = chains[0].draws.row(0).to_owned();
        let want = kl_risk(&theta0, post.dataset().x(), &only, &fam).unwrap();
        assert_eq!(est.mean, want);
    }

    #[test]
    fn chains_csv_round_trips_a_value() {
        let post = line_posterior(true);
        let cfg = SamplerConfig {
            n_iters: 60,
            burn_in: Some(10),
            n_chains: 2,
            seed: 41,
            ..SamplerConfig::basic(60, 41)
        };
        let chains = run_chains(&post, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("chains.csv");
        write_chains_csv(&path, &chains).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), "chain,draw,beta_0,log_post");
        assert_eq!(text.lines().count(), 1 + 2 * 50);
        let first: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
        let b: f64 = first[2].parse().unwrap();
        assert_eq!(b, chains[0].draws[[0, 0]], "shortest round-trip format");
    }
}
