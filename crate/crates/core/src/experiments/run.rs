//! Cell preparation, replication runs, and the two study-level analyses
//! (rate fit and tail quantiles).
//!
//! Seeding discipline: with master seed `s`, the design for a given (n, p)
//! comes from `derive_seed(s, "design", [n, p])`, the truth for a cell from
//! `derive_seed(s, "truth", [n, p, p0])`, and replication `r`'s responses
//! and chains from `derive_seed(s, "rep", [n, p, p0, r])`. Every derived
//! stream is independent of execution order, so replications parallelize
//! freely without touching the outputs.

use std::sync::Arc;
use std::time::Instant;

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gibbs::GibbsPosterior;
use crate::glm::{kl_risk, mle_fit, spectral_norm, Dataset};
use crate::oracle::{best_subset_kl, ORACLE_DEFAULT_BUDGET};
use crate::prior::{mixing_zeta, theorem_zeta, PriorConfig};
use crate::rng::{derive_seed, seeded};
use crate::sampler::{
    integrated_kl_risk, posterior_mean, run_chains, Init, SamplerConfig,
};
use crate::stats::{isotonic_nonincreasing, mean, ols_line, quantile, standard_error};

use super::config::{ExperimentConfig, InitChoice, ZetaMode};
use super::design::generate_design;
use super::truth::{generate_truth, Truth, TruthKind};

/// A rate study needs at least this many cells to fit a line worth reading.
const RATE_MIN_CELLS: usize = 4;
/// A tail study needs at least this many replications per cell.
const TAIL_MIN_REPS: usize = 50;
/// A cell is flagged when its mean excess drops below −3 pooled standard
/// errors — excess risk is nonnegative up to Monte-Carlo noise.
const EXCESS_FLAG_SIGMAS: f64 = 3.0;
/// Tail growth counts as at-most-linear in log(1/ε) when the nonincreasing
/// fit to the successive slopes leaves at most this share of their variance.
pub const TAIL_LINEARITY_MAX_RESIDUAL: f64 = 0.35;

/// Identity of one experimental cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellSpec {
    pub cell_id: String,
    pub n: usize,
    pub p: usize,
    pub p0: usize,
}

impl CellSpec {
    pub fn new(n: usize, p: usize, p0: usize) -> Self {
        CellSpec {
            cell_id: format!("n{n}_p{p}_p0{p0}"),
            n,
            p,
            p0,
        }
    }
}

/// Everything about a cell that is fixed across its replications: the
/// frozen design and truth, the oracle value, and the prior/posterior
/// hyperparameters.
#[derive(Debug, Clone)]
pub struct PreparedCell {
    pub spec: CellSpec,
    pub x: Array2<f64>,
    pub norm_x: f64,
    pub truth: Truth,
    /// Best p0-sparse KL risk. Analytic zero for exactly sparse truths
    /// (the truth itself is a feasible subset fit); enumerated otherwise.
    pub oracle_kl: f64,
    pub oracle_beta: Array1<f64>,
    pub theory_rate: f64,
    pub lambda: f64,
    pub zeta: f64,
    pub warnings: Vec<String>,
}

/// One replication's estimates and diagnostics.
#[derive(Debug, Clone)]
pub struct RepRecord {
    pub rep: usize,
    pub seed: u64,
    pub ewa_int_kl: f64,
    /// Monte-Carlo standard error of `ewa_int_kl`.
    pub ewa_int_se: f64,
    pub ewa_mean_kl: f64,
    pub oracle_kl: f64,
    pub excess_int: f64,
    pub excess_mean: f64,
    pub accept_rate: f64,
    pub ess: f64,
    pub wall_ms: u64,
}

/// Per-cell aggregation of the replication records.
#[derive(Debug, Clone)]
pub struct CellSummary {
    pub cell_id: String,
    pub n: usize,
    pub p: usize,
    pub p0: usize,
    pub norm_x: f64,
    /// The rate regressor p₀·log(n·p·‖X‖/p₀).
    pub theory_rate: f64,
    pub oracle_kl: f64,
    pub mean_excess_int: f64,
    pub se_excess_int: f64,
    pub mean_excess_mean: f64,
    pub se_excess_mean: f64,
    pub mean_accept: f64,
    pub mean_ess: f64,
    pub n_reps: usize,
    /// True when the mean excess is below −3 pooled standard errors.
    pub flagged: bool,
}

/// A fully run cell.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub cell: PreparedCell,
    pub records: Vec<RepRecord>,
    pub summary: CellSummary,
}

/// All cells of an experiment, in configuration order.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub cells: Vec<CellResult>,
}

impl ExperimentResult {
    pub fn summaries(&self) -> Vec<CellSummary> {
        self.cells.iter().map(|c| c.summary.clone()).collect()
    }
}

/// Least-squares fit of per-cell mean excess risk on the theoretical rate.
#[derive(Debug, Clone, Copy)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_cells: usize,
}

/// One tail-quantile row: the (1−ε)-quantile of a cell's excess risks,
/// normalized by that cell's mean excess.
#[derive(Debug, Clone)]
pub struct TailRow {
    pub cell_id: String,
    pub epsilon: f64,
    pub log_inv_eps: f64,
    pub quantile: f64,
}

/// Tail-quantile study: per-cell and pooled normalized quantiles against
/// log(1/ε), with an isotonic check that their growth is at most linear.
#[derive(Debug, Clone)]
pub struct TailStudy {
    pub rows: Vec<TailRow>,
    pub pooled: Vec<TailRow>,
    /// Successive slopes of the pooled curve.
    pub slopes: Vec<f64>,
    /// Share of slope variance the best nonincreasing fit cannot explain.
    pub residual_ratio: f64,
    pub at_most_linear: bool,
}

/// Resolve the prior scale for one cell.
fn resolve_zeta(cfg: &ExperimentConfig, n: usize, p: usize, lambda: f64, norm_x: f64) -> Result<f64> {
    match cfg.zeta_mode {
        ZetaMode::Theorem => theorem_zeta(n, p, norm_x),
        ZetaMode::Mixing => mixing_zeta(
            n,
            p,
            cfg.family.scale(),
            lambda,
            cfg.family.curvature_u(),
            norm_x,
        ),
        ZetaMode::Explicit => Ok(cfg.zeta.expect("validated: explicit mode carries a value")),
    }
}

/// Freeze one cell: design, truth, oracle, and hyperparameters.
pub fn prepare_cell(cfg: &ExperimentConfig, n: usize, p: usize, p0: usize) -> Result<PreparedCell> {
    let spec = CellSpec::new(n, p, p0);
    let mut design_rng = seeded(derive_seed(cfg.seed, "design", &[n as u64, p as u64]));
    let x = generate_design(n, p, cfg.design, &mut design_rng)?;
    let norm_x = spectral_norm(&x)?;

    let mut truth_rng = seeded(derive_seed(
        cfg.seed,
        "truth",
        &[n as u64, p as u64, p0 as u64],
    ));
    let truth = generate_truth(&x, p0, cfg.truth, &cfg.family, &mut truth_rng)?;

    let lambda = cfg.lambda.unwrap_or(n as f64);
    let zeta = resolve_zeta(cfg, n, p, lambda, norm_x)?;

    let mut warnings = Vec::new();
    let (oracle_kl, oracle_beta) = match (&cfg.truth, &truth.beta0) {
        (TruthKind::ExactSparse { .. }, Some(beta0)) => {
            // The truth is itself a feasible p0-sparse fit, so the oracle
            // risk is exactly zero; no enumeration needed.
            (0.0, beta0.clone())
        }
        _ => {
            let oracle = best_subset_kl(&x, &truth.theta0, &cfg.family, p0, ORACLE_DEFAULT_BUDGET)?;
            if !oracle.within_prior_ball(cfg.b1, zeta) {
                warnings.push(format!(
                    "cell {}: oracle minimizer has norm {:.3}, outside the prior comfort radius B1 − 2pζ = {:.3}",
                    spec.cell_id,
                    oracle.beta_star.dot(&oracle.beta_star).sqrt(),
                    cfg.b1 - 2.0 * p as f64 * zeta
                ));
            }
            (oracle.kl_star, oracle.beta_star)
        }
    };
    if let (TruthKind::ExactSparse { .. }, Some(beta0)) = (&cfg.truth, &truth.beta0) {
        let norm0 = beta0.dot(beta0).sqrt();
        if norm0 > cfg.b1 - 2.0 * p as f64 * zeta {
            warnings.push(format!(
                "cell {}: true coefficient norm {:.3} leaves no prior slack below B1 = {:.3}",
                spec.cell_id, norm0, cfg.b1
            ));
        }
    }

    let theory_rate = p0 as f64 * (n as f64 * p as f64 * norm_x / p0 as f64).ln();

    Ok(PreparedCell {
        spec,
        x,
        norm_x,
        truth,
        oracle_kl,
        oracle_beta,
        theory_rate,
        lambda,
        zeta,
        warnings,
    })
}

/// Pick the chain initializer, degrading gracefully from the likelihood fit
/// to the origin to a prior draw as feasibility allows.
fn resolve_init(cfg: &ExperimentConfig, post: &GibbsPosterior, data: &Dataset) -> Init {
    match cfg.sampler.init {
        InitChoice::Zero => Init::Zero,
        InitChoice::PriorDraw => Init::PriorDraw,
        InitChoice::Mle => {
            if let Ok(b) = mle_fit(data, 1e-8, 100) {
                if post.eval(&b, false).0.is_finite() {
                    return Init::Vector(b);
                }
            }
            let zero = Array1::zeros(data.p());
            if post.eval(&zero, false).0.is_finite() {
                Init::Zero
            } else {
                Init::PriorDraw
            }
        }
    }
}

/// Run one replication of one prepared cell.
pub fn run_replication(
    cfg: &ExperimentConfig,
    cell: &PreparedCell,
    rep: usize,
) -> Result<RepRecord> {
    let spec = &cell.spec;
    let seed = derive_seed(
        cfg.seed,
        "rep",
        &[spec.n as u64, spec.p as u64, spec.p0 as u64, rep as u64],
    );
    let mut rng = seeded(seed);

    let theta0 = &cell.truth.theta0;
    let mut y = Array1::<f64>::zeros(spec.n);
    for i in 0..spec.n {
        y[i] = cfg.family.sample_response(theta0.theta()[i], &mut rng)?;
    }
    let data = Arc::new(Dataset::new(cell.x.clone(), y, cfg.family)?);

    let prior = PriorConfig::new(cell.zeta, cfg.b1, spec.p)?;
    let post = GibbsPosterior::with_spectral_norm(data.clone(), prior, cell.lambda, cell.norm_x)?;

    let sampler = SamplerConfig {
        algorithm: cfg.sampler.algorithm,
        step_size: cfg.sampler.step_size,
        n_iters: cfg.sampler.n_iters,
        burn_in: cfg.sampler.burn_in,
        thin: cfg.sampler.thin,
        n_chains: cfg.sampler.n_chains,
        seed,
        init: resolve_init(cfg, &post, &data),
    };

    let start = Instant::now();
    let chains = run_chains(&post, &sampler)?;
    let wall_ms = start.elapsed().as_millis() as u64;

    let est = integrated_kl_risk(&chains, theta0, &cell.x, &cfg.family)?;
    let beta_hat = posterior_mean(&chains)?;
    let ewa_mean_kl = kl_risk(theta0, &cell.x, &beta_hat, &cfg.family)?;
    let accept_rate = mean(&chains.iter().map(|c| c.accept_rate).collect::<Vec<_>>());

    Ok(RepRecord {
        rep,
        seed,
        ewa_int_kl: est.mean,
        ewa_int_se: est.std_err,
        ewa_mean_kl,
        oracle_kl: cell.oracle_kl,
        excess_int: est.mean - cell.oracle_kl,
        excess_mean: ewa_mean_kl - cell.oracle_kl,
        accept_rate,
        ess: est.ess,
        wall_ms,
    })
}

/// Run every replication of a cell (in parallel) and return the records
/// ordered by replication index.
pub fn run_cell(cfg: &ExperimentConfig, cell: &PreparedCell) -> Result<Vec<RepRecord>> {
    let mut records: Vec<RepRecord> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| run_replication(cfg, cell, rep))
        .collect::<Result<_>>()?;
    records.sort_by_key(|r| r.rep);
    Ok(records)
}

/// Aggregate a cell's records.
pub fn summarize_cell(cell: &PreparedCell, records: &[RepRecord]) -> CellSummary {
    let excess_int: Vec<f64> = records.iter().map(|r| r.excess_int).collect();
    let excess_mean: Vec<f64> = records.iter().map(|r| r.excess_mean).collect();
    let accepts: Vec<f64> = records.iter().map(|r| r.accept_rate).collect();
    let esses: Vec<f64> = records.iter().map(|r| r.ess).collect();
    let mean_excess_int = mean(&excess_int);
    let se_excess_int = standard_error(&excess_int);
    CellSummary {
        cell_id: cell.spec.cell_id.clone(),
        n: cell.spec.n,
        p: cell.spec.p,
        p0: cell.spec.p0,
        norm_x: cell.norm_x,
        theory_rate: cell.theory_rate,
        oracle_kl: cell.oracle_kl,
        mean_excess_int,
        se_excess_int,
        mean_excess_mean: mean(&excess_mean),
        se_excess_mean: standard_error(&excess_mean),
        mean_accept: mean(&accepts),
        mean_ess: mean(&esses),
        n_reps: records.len(),
        flagged: mean_excess_int < -EXCESS_FLAG_SIGMAS * se_excess_int,
    }
}

/// Run the full experiment: every (n, p, p0) cell in configuration order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let mut cells = Vec::with_capacity(cfg.n_cells());
    for &n in &cfg.n_list {
        for &p in &cfg.p_list {
            for &p0 in &cfg.p0_list {
                let cell = prepare_cell(cfg, n, p, p0)?;
                let records = run_cell(cfg, &cell)?;
                let summary = summarize_cell(&cell, &records);
                cells.push(CellResult {
                    cell,
                    records,
                    summary,
                });
            }
        }
    }
    Ok(ExperimentResult { cells })
}

/// Fit per-cell mean excess risk against the theoretical rate regressor.
pub fn rate_fit(cells: &[CellSummary]) -> Result<RateFit> {
    if cells.len() < RATE_MIN_CELLS {
        return Err(Error::InsufficientCells {
            got: cells.len(),
            need: RATE_MIN_CELLS,
        });
    }
    let xs: Vec<f64> = cells.iter().map(|c| c.theory_rate).collect();
    let ys: Vec<f64> = cells.iter().map(|c| c.mean_excess_int).collect();
    let fit = ols_line(&xs, &ys)?;
    Ok(RateFit {
        slope: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        n_cells: cells.len(),
    })
}

/// Convenience wrapper: run the experiment, then fit the rate law.
pub fn rate_study(cfg: &ExperimentConfig) -> Result<(ExperimentResult, RateFit)> {
    let result = run_experiment(cfg)?;
    let fit = rate_fit(&result.summaries())?;
    Ok((result, fit))
}

/// Tail study over explicit per-cell excess samples. Each cell needs at
/// least 50 replications and a positive mean excess (quantiles are reported
/// relative to it).
pub fn tail_from_excesses(
    cells: &[(String, Vec<f64>)],
    epsilons: &[f64],
) -> Result<TailStudy> {
    if cells.is_empty() {
        return Err(Error::InsufficientCells { got: 0, need: 1 });
    }
    if epsilons.is_empty() {
        return Err(Error::InvalidConfig(
            "tail study needs at least one ε level".into(),
        ));
    }
    for (id, xs) in cells {
        if xs.len() < TAIL_MIN_REPS {
            return Err(Error::InsufficientReplications {
                got: xs.len(),
                need: TAIL_MIN_REPS,
            });
        }
        if !(mean(xs) > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "cell {id} has nonpositive mean excess; normalized tail quantiles are undefined"
            )));
        }
    }

    // Sort ε descending so log(1/ε) is increasing along the curve.
    let mut eps = epsilons.to_vec();
    eps.sort_by(|a, b| b.total_cmp(a));
    eps.dedup();

    let mut rows = Vec::new();
    let mut pooled = Vec::with_capacity(eps.len());
    for &e in &eps {
        let x = (1.0 / e).ln();
        let mut acc = 0.0;
        for (id, xs) in cells {
            let q = quantile(xs, 1.0 - e)? / mean(xs);
            acc += q;
            rows.push(TailRow {
                cell_id: id.clone(),
                epsilon: e,
                log_inv_eps: x,
                quantile: q,
            });
        }
        pooled.push(TailRow {
            cell_id: "pooled".into(),
            epsilon: e,
            log_inv_eps: x,
            quantile: acc / cells.len() as f64,
        });
    }

    // At-most-linear growth in log(1/ε) ⇔ the successive slopes of the
    // pooled curve do not trend upward; measure the departure as the
    // variance share left by the best nonincreasing fit.
    let mut slopes = Vec::new();
    for w in pooled.windows(2) {
        let dx = w[1].log_inv_eps - w[0].log_inv_eps;
        slopes.push((w[1].quantile - w[0].quantile) / dx);
    }
    let (residual_ratio, at_most_linear) = if slopes.len() < 2 {
        (0.0, true)
    } else {
        let fit = isotonic_nonincreasing(&slopes);
        let ms = mean(&slopes);
        let ss_tot: f64 = slopes.iter().map(|s| (s - ms) * (s - ms)).sum();
        let ss_res: f64 = slopes
            .iter()
            .zip(&fit)
            .map(|(s, f)| (s - f) * (s - f))
            .sum();
        let ratio = if ss_tot == 0.0 { 0.0 } else { ss_res / ss_tot };
        (ratio, ratio <= TAIL_LINEARITY_MAX_RESIDUAL)
    };

    Ok(TailStudy {
        rows,
        pooled,
        slopes,
        residual_ratio,
        at_most_linear,
    })
}

/// Tail study over an experiment's recorded excess risks.
pub fn tail_check(result: &ExperimentResult, epsilons: &[f64]) -> Result<TailStudy> {
    let cells: Vec<(String, Vec<f64>)> = result
        .cells
        .iter()
        .map(|c| {
            (
                c.summary.cell_id.clone(),
                c.records.iter().map(|r| r.excess_int).collect(),
            )
        })
        .collect();
    tail_from_excesses(&cells, epsilons)
}

/// Convenience wrapper: run the experiment, then run the tail study.
pub fn tail_study(cfg: &ExperimentConfig) -> Result<(ExperimentResult, TailStudy)> {
    let result = run_experiment(cfg)?;
    let study = tail_check(&result, &cfg.epsilons)?;
    Ok((result, study))
}
