//! Simulation harness: generate designs and truths, run replications of the
//! aggregate against the subset oracle, fit the excess-risk rate law, study
//! tail quantiles, and persist everything.
//!
//! The pipeline is a pure function of its configuration (seed included):
//! designs are frozen per (n, p), truths per (n, p, p0), and replication
//! seeds are derived per (n, p, p0, rep), so cells and replications can run
//! in any order — or in parallel — without changing a single output byte.

mod config;
mod design;
mod report;
mod run;
mod svg;
mod truth;

pub use config::{
    DesignChoice, ExperimentConfig, FileConfig, InitChoice, SamplerTemplate, TruthChoice,
    ZetaMode,
};
pub use design::{generate_design, DesignKind};
pub use report::{emit_report, read_replications_csv, RepRow};
pub use run::{
    prepare_cell, rate_fit, rate_study, run_cell, run_experiment, run_replication, tail_check,
    tail_study, CellResult, CellSpec, CellSummary, ExperimentResult, PreparedCell, RateFit,
    RepRecord, TailRow, TailStudy, TAIL_LINEARITY_MAX_RESIDUAL,
};
pub use svg::{render_plot, Series, SvgPlot};
pub use truth::{generate_truth, Truth, TruthKind};
