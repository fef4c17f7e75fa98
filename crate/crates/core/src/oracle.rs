//! Reference quantities the aggregate is judged against: the best-subset
//! KL oracle, an exhaustive grid posterior for low dimension, and a
//! Donsker–Varadhan consistency check on finite spaces.
//!
//! All three are deliberately brute-force — they trade speed for being
//! independently verifiable — and all are deterministic given their inputs.

use crate::error::{Error, Result};
use crate::expfam::Family;
use crate::gibbs::GibbsPosterior;
use crate::glm::NaturalParams;
use crate::linalg::solve_spd_jittered;
use crate::rng::seeded;
use crate::stats::log_sum_exp;
use itertools::Itertools;
use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rayon::prelude::*;

/// Default cap on the number of subsets the oracle will enumerate.
pub const ORACLE_DEFAULT_BUDGET: u64 = 1_000_000;
/// Newton iteration cap per subset.
const NEWTON_MAX_ITERS: usize = 200;
/// Gradient norm declaring a subset fit converged.
const NEWTON_GRAD_TOL: f64 = 1e-9;
/// Grid posteriors refuse more than this many nodes.
pub const GRID_NODE_BUDGET: usize = 2_000_000;
/// Grid posteriors are exhaustive and only feasible in low dimension.
pub const GRID_MAX_DIM: usize = 3;

/// One subset's fit: achieved KL, subset-length coefficients, and how the
/// Newton iteration ended.
///
/// `converged` means the iteration terminated on its own — gradient below
/// tolerance, or a step-halving stall at a constrained optimum — rather
/// than exhausting its iteration budget.
#[derive(Debug, Clone)]
pub struct SubsetFit {
    pub kl: f64,
    pub beta: Array1<f64>,
    pub converged: bool,
    pub newton_iters: usize,
}

/// Outcome of one subset's KL minimization, as recorded by the oracle.
#[derive(Debug, Clone)]
pub struct SubsetRecord {
    pub subset: Vec<usize>,
    pub converged: bool,
    /// Minimized KL; +∞ marks a failed fit.
    pub kl: f64,
    pub newton_iters: usize,
}

/// The best-subset oracle: risk, minimizer, and the full enumeration.
#[derive(Debug, Clone)]
pub struct OracleResult {
    /// The minimizer, embedded in ℝᵖ with zeros off the chosen subset.
    pub beta_star: Array1<f64>,
    /// min over |S| = p₀ and β supported on S of KL(θ⁰, Xβ), taken over
    /// converged fits.
    pub kl_star: f64,
    /// Chosen subset (ties resolved to the lexicographically first).
    pub subset_chosen: Vec<usize>,
    /// Every enumerated subset in lexicographic order.
    pub per_subset_records: Vec<SubsetRecord>,
}

impl OracleResult {
    /// Whether β* leaves the prior enough room: ‖β*‖₂ ≤ B₁ − 2pζ.
    pub fn within_prior_ball(&self, b1: f64, zeta: f64) -> bool {
        let p = self.beta_star.len() as f64;
        self.beta_star.dot(&self.beta_star).sqrt() <= b1 - 2.0 * p * zeta
    }
}

/// C(n, k), saturating at `cap`.
fn binomial_capped(n: usize, k: usize, cap: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c.saturating_mul((n - i) as u128) / (i as u128 + 1);
        if c >= cap {
            return cap;
        }
    }
    c
}

/// Minimize KL(θ⁰, X_S β) over β for one column subset by damped Newton.
///
/// Steps that push the linear predictor outside the admissible interval see
/// an infinite objective and are halved away; if the constrained minimum
/// sits on the interval boundary the iteration stalls there and the best
/// value found is returned with `converged = true`. An empty subset yields
/// the null model's KL.
pub fn fit_subset_kl(
    x: &Array2<f64>,
    theta0: &NaturalParams,
    family: &Family,
    subset: &[usize],
) -> Result<SubsetFit> {
    let n = x.nrows();
    if theta0.len() != n {
        return Err(Error::DimensionMismatch {
            what: "true parameter length vs design rows",
            expected: n,
            got: theta0.len(),
        });
    }
    for &j in subset {
        if j >= x.ncols() {
            return Err(Error::InvalidConfig(format!(
                "subset column {j} out of range for p={}",
                x.ncols()
            )));
        }
    }
    let mut mu0 = Array1::<f64>::zeros(n);
    let mut b0 = Array1::<f64>::zeros(n);
    for i in 0..n {
        mu0[i] = family.mean(theta0.theta()[i])?;
        b0[i] = family.cumulant(theta0.theta()[i])?;
    }
    fit_subset_inner(x, theta0.theta(), &mu0, &b0, family, subset)
        .ok_or(Error::AllSubsetsFailed)
}

/// Core per-subset solver with the truth's mean/cumulant precomputed.
fn fit_subset_inner(
    x: &Array2<f64>,
    theta0: &Array1<f64>,
    mu0: &Array1<f64>,
    b0: &Array1<f64>,
    family: &Family,
    subset: &[usize],
) -> Option<SubsetFit> {
    let n = x.nrows();
    let k = subset.len();
    let a = family.scale();
    let iv = family.theta_interval();
    let xs = if k > 0 {
        x.select(Axis(1), subset)
    } else {
        Array2::zeros((n, 0))
    };

    let kl_at = |beta: &Array1<f64>| -> f64 {
        let theta1 = if k > 0 { xs.dot(beta) } else { Array1::zeros(n) };
        let mut s = 0.0;
        for i in 0..n {
            let t1 = theta1[i];
            if !t1.is_finite() || !iv.contains(t1) {
                return f64::INFINITY;
            }
            let b1 = family.cumulant(t1).expect("theta checked in-domain");
            s += mu0[i] * (theta0[i] - t1) - b0[i] + b1;
        }
        s / a
    };

    let mut beta = Array1::<f64>::zeros(k);
    let mut kl = kl_at(&beta);
    if !kl.is_finite() {
        return None; // the zero fit is already outside the domain
    }
    let mut converged = true;
    let mut newton_iters = 0usize;
    if k > 0 {
        converged = false;
        for _ in 0..NEWTON_MAX_ITERS {
            let theta1 = xs.dot(&beta);
            let mut diff = Array1::<f64>::zeros(n);
            let mut w = Array1::<f64>::zeros(n);
            for i in 0..n {
                diff[i] = family.mean(theta1[i]).ok()? - mu0[i];
                w[i] = family.variance_rate(theta1[i]).ok()?;
            }
            let grad = xs.t().dot(&diff) / a;
            if grad.dot(&grad).sqrt() <= NEWTON_GRAD_TOL {
                converged = true;
                break;
            }
            let mut xw = xs.clone();
            for i in 0..n {
                let wi = w[i];
                xw.row_mut(i).mapv_inplace(|v| v * wi);
            }
            let h = xs.t().dot(&xw) / a;
            let dir = solve_spd_jittered(&h, &grad)?;
            let mut t = 1.0;
            let mut advanced = false;
            for _ in 0..60 {
                let cand = &beta - &(&dir * t);
                let cand_kl = kl_at(&cand);
                if cand_kl <= kl + 1e-12 * (1.0 + kl.abs()) && cand_kl < f64::INFINITY {
                    // Accept non-increase up to roundoff so large objectives
                    // can still terminate near machine precision.
                    let improved = cand_kl < kl;
                    beta = cand;
                    kl = cand_kl;
                    advanced = improved;
                    break;
                }
                t *= 0.5;
            }
            newton_iters += 1;
            if !advanced {
                // No descent step exists: a constrained or machine-precision
                // optimum, which counts as a terminated fit.
                converged = true;
                break;
            }
        }
    }
    kl.is_finite().then_some(SubsetFit {
        kl: kl.max(0.0),
        beta,
        converged,
        newton_iters,
    })
}

/// Exhaustive best-subset oracle: minimize KL(θ⁰, Xβ) over all supports of
/// size `p0` (1 ≤ p0 ≤ p), refusing enumerations larger than `budget`.
///
/// Subsets are enumerated in lexicographic order and ties are broken toward
/// the earliest, so results are deterministic. Non-converged subsets are
/// recorded but do not compete for the minimum; only if every subset fails
/// is the call an error.
pub fn best_subset_kl(
    x: &Array2<f64>,
    theta0: &NaturalParams,
    family: &Family,
    p0: usize,
    budget: u64,
) -> Result<OracleResult> {
    let (n, p) = (x.nrows(), x.ncols());
    if theta0.len() != n {
        return Err(Error::DimensionMismatch {
            what: "true parameter length vs design rows",
            expected: n,
            got: theta0.len(),
        });
    }
    if p0 == 0 || p0 > p {
        return Err(Error::InvalidConfig(format!(
            "subset size must satisfy 1 ≤ p0 ≤ p, got p0={p0} with p={p}"
        )));
    }
    let count = binomial_capped(p, p0, budget as u128 + 1);
    if count > budget as u128 {
        return Err(Error::EnumerationBudget {
            subsets: count,
            budget,
        });
    }
    let mut mu0 = Array1::<f64>::zeros(n);
    let mut b0 = Array1::<f64>::zeros(n);
    for i in 0..n {
        mu0[i] = family.mean(theta0.theta()[i])?;
        b0[i] = family.cumulant(theta0.theta()[i])?;
    }
    let combos: Vec<Vec<usize>> = (0..p).combinations(p0).collect();
    let fits: Vec<Option<SubsetFit>> = combos
        .par_iter()
        .map(|s| fit_subset_inner(x, theta0.theta(), &mu0, &b0, family, s))
        .collect();

    let mut best: Option<(f64, usize)> = None;
    let mut per_subset_records = Vec::with_capacity(combos.len());
    for (idx, fit) in fits.iter().enumerate() {
        let (kl, converged, newton_iters) = match fit {
            Some(f) => (f.kl, f.converged, f.newton_iters),
            None => (f64::INFINITY, false, 0),
        };
        per_subset_records.push(SubsetRecord {
            subset: combos[idx].clone(),
            converged,
            kl,
            newton_iters,
        });
        if converged && kl.is_finite() && best.map_or(true, |(bk, _)| kl < bk) {
            best = Some((kl, idx));
        }
    }
    let (kl_star, idx) = best.ok_or(Error::AllSubsetsFailed)?;
    let fit = fits[idx].as_ref().expect("best index points at a fit");
    let mut beta_star = Array1::<f64>::zeros(p);
    for (slot, &j) in combos[idx].iter().enumerate() {
        beta_star[j] = fit.beta[slot];
    }
    Ok(OracleResult {
        beta_star,
        kl_star,
        subset_chosen: combos[idx].clone(),
        per_subset_records,
    })
}

/// One axis of an evaluation grid: `count` equally spaced nodes on [lo, hi].
#[derive(Debug, Clone, PartialEq)]
pub struct GridAxis {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Tensor-product grid specification, at most [`GRID_MAX_DIM`] axes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub axes: Vec<GridAxis>,
}

impl GridSpec {
    /// Symmetric cube [-half, half]ᵈ with `count` nodes per axis.
    pub fn cube(dim: usize, half: f64, count: usize) -> Self {
        GridSpec {
            axes: (0..dim)
                .map(|_| GridAxis {
                    lo: -half,
                    hi: half,
                    count,
                })
                .collect(),
        }
    }

    fn validate(&self) -> Result<usize> {
        let d = self.axes.len();
        if d == 0 || d > GRID_MAX_DIM {
            return Err(Error::GridDimension {
                got: d,
                max: GRID_MAX_DIM,
            });
        }
        let mut nodes: usize = 1;
        for ax in &self.axes {
            if !(ax.lo.is_finite() && ax.hi.is_finite() && ax.lo < ax.hi) || ax.count < 2 {
                return Err(Error::InvalidConfig(format!(
                    "grid axis needs finite lo < hi and ≥ 2 nodes, got [{}, {}] × {}",
                    ax.lo, ax.hi, ax.count
                )));
            }
            nodes = nodes.saturating_mul(ax.count);
        }
        if nodes > GRID_NODE_BUDGET {
            return Err(Error::GridTooLarge {
                nodes: nodes as u128,
                budget: GRID_NODE_BUDGET as u64,
            });
        }
        Ok(nodes)
    }
}

/// A normalized posterior over grid nodes, with its mean.
#[derive(Debug, Clone)]
pub struct GridPosterior {
    axes: Vec<GridAxis>,
    masses: Vec<f64>,
    mean: Array1<f64>,
}

impl GridPosterior {
    pub fn n_nodes(&self) -> usize {
        self.masses.len()
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn mean(&self) -> &Array1<f64> {
        &self.mean
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    /// Coordinates of the node at a flattened (row-major) index.
    pub fn node(&self, mut idx: usize) -> Array1<f64> {
        let d = self.axes.len();
        let mut out = Array1::<f64>::zeros(d);
        for j in (0..d).rev() {
            let ax = &self.axes[j];
            let k = idx % ax.count;
            idx /= ax.count;
            out[j] = ax.lo + k as f64 * (ax.hi - ax.lo) / (ax.count - 1) as f64;
        }
        out
    }

    /// Flattened index of the grid node nearest to `point` (coordinates
    /// clamped into the grid's bounding box).
    pub fn nearest_node_index(&self, point: &Array1<f64>) -> usize {
        let mut idx = 0usize;
        for (j, ax) in self.axes.iter().enumerate() {
            let step = (ax.hi - ax.lo) / (ax.count - 1) as f64;
            let k = ((point[j] - ax.lo) / step).round();
            let k = k.clamp(0.0, (ax.count - 1) as f64) as usize;
            idx = idx * ax.count + k;
        }
        idx
    }

    /// Node carrying the largest mass (first such index on ties).
    pub fn max_mass_node(&self) -> (usize, Array1<f64>) {
        let mut best = 0usize;
        for (i, &m) in self.masses.iter().enumerate() {
            if m > self.masses[best] {
                best = i;
            }
        }
        (best, self.node(best))
    }

    /// Grid expectation of the KL risk: Σ_node mass · KL(θ⁰, X·node).
    pub fn weighted_kl_risk(
        &self,
        theta0: &NaturalParams,
        x: &Array2<f64>,
        family: &Family,
    ) -> Result<f64> {
        let mut s = 0.0;
        for i in 0..self.n_nodes() {
            let m = self.masses[i];
            if m == 0.0 {
                continue;
            }
            s += m * crate::glm::kl_risk(theta0, x, &self.node(i), family)?;
        }
        Ok(s)
    }
}

/// Evaluate the Gibbs posterior exhaustively on a grid and normalize.
///
/// The grid dimension must match the posterior's; nodes with zero mass
/// (support violations) are kept with mass 0 so indices stay aligned.
pub fn grid_posterior(post: &GibbsPosterior, spec: &GridSpec) -> Result<GridPosterior> {
    let nodes = spec.validate()?;
    if spec.axes.len() != post.p() {
        return Err(Error::DimensionMismatch {
            what: "grid dimension vs posterior dimension",
            expected: post.p(),
            got: spec.axes.len(),
        });
    }
    let d = spec.axes.len();
    let mut idx = vec![0usize; d];
    let mut point = Array1::<f64>::zeros(d);
    let mut logs = Vec::with_capacity(nodes);
    loop {
        for j in 0..d {
            let ax = &spec.axes[j];
            point[j] = ax.lo + idx[j] as f64 * (ax.hi - ax.lo) / (ax.count - 1) as f64;
        }
        logs.push(post.eval(&point, false).0);
        // odometer increment
        let mut j = d;
        loop {
            if j == 0 {
                break;
            }
            j -= 1;
            idx[j] += 1;
            if idx[j] < spec.axes[j].count {
                break;
            }
            idx[j] = 0;
            if j == 0 {
                j = usize::MAX; // signal done
                break;
            }
        }
        if j == usize::MAX {
            break;
        }
    }
    debug_assert_eq!(logs.len(), nodes);
    let lse = log_sum_exp(&logs);
    if !lse.is_finite() {
        return Err(Error::DegenerateSupport);
    }
    let masses: Vec<f64> = logs.iter().map(|l| (l - lse).exp()).collect();
    let mut grid = GridPosterior {
        axes: spec.axes.clone(),
        masses,
        mean: Array1::zeros(d),
    };
    let mut mean = Array1::<f64>::zeros(d);
    for i in 0..nodes {
        if grid.masses[i] > 0.0 {
            mean.scaled_add(grid.masses[i], &grid.node(i));
        }
    }
    grid.mean = mean;
    Ok(grid)
}

/// Result of the Donsker–Varadhan consistency check.
#[derive(Debug, Clone)]
pub struct DvCheck {
    /// log E_π[e^{λh}], the variational value.
    pub lhs: f64,
    /// |lhs − (λ·E_g[h] − KL(g‖π))| at the attaining Gibbs tilt g.
    pub analytic_residual: f64,
    /// max over random ρ of (λ·E_ρ[h] − KL(ρ‖π)) − lhs; ≤ 0 up to roundoff.
    pub worst_violation: f64,
}

/// Verify the variational identity
/// log E_π[e^{λh}] = sup_ρ { λ·E_ρ[h] − KL(ρ‖π) }
/// on a finite space of at least two points: the Gibbs tilt g ∝ π·e^{λh}
/// must attain the supremum and no perturbation may exceed it.
///
/// `log_base` holds unnormalized log-weights of π. Half the perturbations
/// are Dirichlet(1) draws (uniform on the simplex), half are softmax
/// perturbations of the Gibbs tilt itself, probing near the optimum.
pub fn dv_gibbs_check(
    log_base: &[f64],
    h: &[f64],
    lambda: f64,
    n_perturbations: usize,
    seed: u64,
) -> Result<DvCheck> {
    let m = log_base.len();
    if m < 2 {
        return Err(Error::InvalidConfig(format!(
            "Donsker–Varadhan check needs a support of size ≥ 2, got {m}"
        )));
    }
    if h.len() != m {
        return Err(Error::DimensionMismatch {
            what: "function values vs support size",
            expected: m,
            got: h.len(),
        });
    }
    if log_base.iter().chain(h.iter()).any(|v| !v.is_finite()) || !lambda.is_finite() {
        return Err(Error::NonFinite {
            what: "Donsker–Varadhan inputs",
        });
    }
    let log_z0 = log_sum_exp(log_base);
    let tilted: Vec<f64> = (0..m).map(|i| log_base[i] + lambda * h[i]).collect();
    let log_z1 = log_sum_exp(&tilted);
    let lhs = log_z1 - log_z0;

    let log_pi: Vec<f64> = log_base.iter().map(|l| l - log_z0).collect();
    let log_g: Vec<f64> = tilted.iter().map(|l| l - log_z1).collect();

    let rhs_at = |rho: &[f64]| -> f64 {
        let mut e_h = 0.0;
        let mut kl = 0.0;
        for i in 0..m {
            if rho[i] > 0.0 {
                e_h += rho[i] * h[i];
                kl += rho[i] * (rho[i].ln() - log_pi[i]);
            }
        }
        lambda * e_h - kl
    };

    let g: Vec<f64> = log_g.iter().map(|l| l.exp()).collect();
    let analytic_residual = (lhs - rhs_at(&g)).abs();

    let mut rng = seeded(seed);
    let mut worst = f64::NEG_INFINITY;
    let mut rho = vec![0.0f64; m];
    for k in 0..n_perturbations {
        if k % 2 == 0 {
            // Dirichlet(1, …, 1): normalized unit exponentials.
            let mut s = 0.0;
            for r in rho.iter_mut() {
                *r = -rng.gen::<f64>().ln();
                s += *r;
            }
            for r in rho.iter_mut() {
                *r /= s;
            }
        } else {
            // softmax(log g + z/2): stays near the attaining tilt.
            let mut logs = vec![0.0f64; m];
            for i in 0..m {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                logs[i] = log_g[i] + 0.5 * z;
            }
            let lse = log_sum_exp(&logs);
            for i in 0..m {
                rho[i] = (logs[i] - lse).exp();
            }
        }
        worst = worst.max(rhs_at(&rho) - lhs);
    }
    Ok(DvCheck {
        lhs,
        analytic_residual,
        worst_violation: worst,
    })
}
