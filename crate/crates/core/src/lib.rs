//! Sparse exponentially weighted aggregation for generalized linear models.
//!
//! The estimator is a Gibbs posterior: a λ-tempered GLM likelihood combined
//! with a scaled-Student sparsity prior truncated to an ℓ₂ ball, sampled by
//! MALA or random-walk Metropolis. Against it stand brute-force references —
//! an exhaustive best-subset KL oracle, a dense grid posterior, and a
//! Donsker–Varadhan identity check — plus a simulation harness measuring how
//! the aggregate's excess KL risk scales with the sparsity-adjusted rate
//! p₀·log(n·p·‖X‖/p₀).
//!
//! Modules build on each other in dependency order: [`expfam`] (natural
//! exponential families) → [`glm`] (designs, likelihoods, KL) → [`prior`] /
//! [`gibbs`] (the target density) → [`sampler`] (MCMC) → [`oracle`]
//! (references) → [`experiments`] (the simulation harness) → [`validate`]
//! (the self-check suite).

pub mod error;
pub mod expfam;
pub mod experiments;
pub mod gibbs;
pub mod glm;
mod linalg;
pub mod oracle;
pub mod prior;
pub mod rng;
pub mod sampler;
pub mod stats;
pub mod validate;

pub use error::{Error, Result};
pub use expfam::{Family, FamilyKind, Interval};
pub use experiments::{
    emit_report, generate_design, generate_truth, prepare_cell, rate_study, run_experiment,
    run_replication, tail_study, CellSummary, DesignKind, ExperimentConfig, ExperimentResult,
    RateFit, TailStudy, TruthKind,
};
pub use gibbs::GibbsPosterior;
pub use glm::{
    avg_loglik, kl_divergence, kl_risk, loglik_gradient, mle_fit, natural_params, spectral_norm,
    Dataset, NaturalParams,
};
pub use oracle::{
    best_subset_kl, dv_gibbs_check, fit_subset_kl, grid_posterior, DvCheck, GridAxis,
    GridPosterior, GridSpec, OracleResult, SubsetFit, SubsetRecord,
};
pub use prior::{mixing_zeta, theorem_zeta, PriorConfig};
pub use sampler::{
    heuristic_step_size, integrated_kl_risk, posterior_mean, run_chains, write_chains_csv, Chain,
    Init, KlRiskEstimate, McmcAlgorithm, SamplerConfig,
};
pub use validate::{all_passed, run_property_suite, PropertyReport, SuiteOptions};
