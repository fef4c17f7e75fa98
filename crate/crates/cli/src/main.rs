//! `ewaglm` — command-line front end for sparse exponentially weighted
//! aggregation in generalized linear models.
//!
//! Subcommands: `fit` (aggregate one dataset), `validate` (run the analytic
//! self-check suite), `simulate` / `rate-study` / `tail-study` (the
//! simulation harness and its two analyses). All randomness flows from one
//! 64-bit seed; identical invocations write identical outputs, except for
//! recorded wall times.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use ndarray::{Array1, Array2};

use ewaglm::error::{Error, Result};
use ewaglm::experiments::{
    emit_report, prepare_cell, rate_fit, run_cell, summarize_cell, tail_check, CellResult,
    ExperimentConfig, ExperimentResult, InitChoice, RateFit, TailStudy,
};
use ewaglm::gibbs::GibbsPosterior;
use ewaglm::glm::{mle_fit, spectral_norm, Dataset};
use ewaglm::prior::{mixing_zeta, theorem_zeta, PriorConfig};
use ewaglm::sampler::{posterior_mean, run_chains, write_chains_csv, Chain, Init, SamplerConfig};
use ewaglm::stats::quantile;
use ewaglm::validate::{all_passed, run_property_suite, SuiteOptions};
use ewaglm::ZetaMode;

#[derive(Parser)]
#[command(
    name = "ewaglm",
    version,
    about = "Sparse exponentially weighted aggregation for GLMs"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// TOML configuration file; omitted means built-in defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true, value_name = "DIR", default_value = "ewaglm-out")]
    out: PathBuf,
    /// Master seed, overriding the configuration file.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Suppress progress output.
    #[arg(long, global = true, conflicts_with = "verbose")]
    quiet: bool,
    /// Print extra detail.
    #[arg(long, global = true)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample the Gibbs posterior on a dataset and report the aggregate.
    Fit {
        /// Design matrix: headerless CSV, one row per observation.
        #[arg(long, value_name = "PATH")]
        x: PathBuf,
        /// Responses: headerless single-column CSV, same row count as X.
        #[arg(long, value_name = "PATH")]
        y: PathBuf,
    },
    /// Run the analytic self-check suite; exit 0 only if every check passes.
    Validate {
        /// Force this sampler step size (fault injection for testing the
        /// suite's failure reporting; 1e6 breaks the sampler checks).
        #[arg(long, value_name = "H")]
        inject_step: Option<f64>,
    },
    /// Run every configured cell and write replication-level reports.
    Simulate,
    /// Simulate, then fit mean excess risk against p0*log(np|X|/p0).
    RateStudy,
    /// Simulate, then study tail quantiles of the excess risk.
    TailStudy,
}

struct Progress {
    quiet: bool,
    verbose: bool,
}

impl Progress {
    fn note(&self, msg: &str) {
        if !self.quiet {
            println!("{msg}");
        }
    }

    fn detail(&self, msg: &str) {
        if self.verbose {
            println!("{msg}");
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let progress = Progress {
        quiet: cli.quiet,
        verbose: cli.verbose,
    };
    let cfg = load_config(cli.config.as_deref(), cli.seed)?;
    match cli.cmd {
        Cmd::Fit { x, y } => cmd_fit(&cfg, &x, &y, &cli.out, &progress),
        Cmd::Validate { inject_step } => cmd_validate(&cfg, inject_step, &cli.out, &progress),
        Cmd::Simulate => cmd_simulate(&cfg, &cli.out, &progress),
        Cmd::RateStudy => cmd_rate_study(&cfg, &cli.out, &progress),
        Cmd::TailStudy => cmd_tail_study(&cfg, &cli.out, &progress),
    }
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<ExperimentConfig> {
    let cfg = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::ConfigParse {
                path: p.display().to_string(),
                message: e.to_string(),
            })?;
            ExperimentConfig::from_toml_str(&text).map_err(|e| match e {
                Error::ConfigParse { message, .. } => Error::ConfigParse {
                    path: p.display().to_string(),
                    message,
                },
                other => other,
            })?
        }
        None => ExperimentConfig::default(),
    };
    Ok(match seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    })
}

/// Parse a headerless numeric CSV into a dense matrix, reporting the
/// offending line on any malformed field or ragged row.
fn read_matrix_csv(path: &Path) -> Result<Array2<f64>> {
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = 0usize;
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let mut row = Vec::new();
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|e| Error::CsvParse {
                path: path.display().to_string(),
                line: lineno,
                message: format!("bad numeric field {field:?}: {e}"),
            })?;
            row.push(v);
        }
        if rows.is_empty() {
            width = row.len();
        } else if row.len() != width {
            return Err(Error::CsvParse {
                path: path.display().to_string(),
                line: lineno,
                message: format!("row has {} fields, expected {width}", row.len()),
            });
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::CsvParse {
            path: path.display().to_string(),
            line: 1,
            message: "no data rows".into(),
        });
    }
    let n = rows.len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((n, width), flat).map_err(|e| Error::CsvParse {
        path: path.display().to_string(),
        line: 1,
        message: e.to_string(),
    })
}

/// Parse a headerless single-column CSV into a vector.
fn read_vector_csv(path: &Path) -> Result<Array1<f64>> {
    let m = read_matrix_csv(path)?;
    if m.ncols() != 1 {
        return Err(Error::CsvParse {
            path: path.display().to_string(),
            line: 1,
            message: format!("expected a single column, got {}", m.ncols()),
        });
    }
    Ok(m.column(0).to_owned())
}

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
        ZetaMode::Explicit => Ok(cfg.zeta.expect("validated config")),
    }
}

fn resolve_init(choice: InitChoice, post: &GibbsPosterior, data: &Dataset) -> Init {
    match choice {
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

fn write_fit_outputs(
    out: &Path,
    cfg: &ExperimentConfig,
    chains: &[Chain],
    beta_hat: &Array1<f64>,
) -> Result<()> {
    fs::create_dir_all(out)?;
    fs::write(out.join("config_echo.toml"), cfg.raw.to_toml_string())?;
    write_chains_csv(out.join("chains.csv"), chains)?;

    let p = beta_hat.len();
    let levels = [0.05, 0.25, 0.5, 0.75, 0.95];
    let mut table = String::from("coordinate,mean,q05,q25,q50,q75,q95\n");
    for j in 0..p {
        let series: Vec<f64> = chains
            .iter()
            .flat_map(|c| c.draws.column(j).to_vec())
            .collect();
        table.push_str(&format!("{},{}", j, beta_hat[j]));
        for lvl in levels {
            table.push_str(&format!(",{}", quantile(&series, lvl)?));
        }
        table.push('\n');
    }
    fs::write(out.join("beta_hat.csv"), table)?;

    let mut diag = String::from("chain,seed,accept_rate,step_size,n_halvings,kept_draws\n");
    for (k, c) in chains.iter().enumerate() {
        diag.push_str(&format!(
            "{},{},{},{},{},{}\n",
            k,
            c.seed_used,
            c.accept_rate,
            c.step_size,
            c.n_halvings,
            c.draws.nrows()
        ));
    }
    fs::write(out.join("diagnostics.csv"), diag)?;
    Ok(())
}

fn cmd_fit(
    cfg: &ExperimentConfig,
    x_path: &Path,
    y_path: &Path,
    out: &Path,
    progress: &Progress,
) -> Result<ExitCode> {
    let x = read_matrix_csv(x_path)?;
    let y = read_vector_csv(y_path)?;
    let (n, p) = (x.nrows(), x.ncols());
    progress.note(&format!(
        "fit: n={n}, p={p}, family {:?}",
        cfg.family.kind()
    ));

    let data = Arc::new(Dataset::new(x, y, cfg.family)?);
    let norm_x = spectral_norm(data.x())?;
    let lambda = cfg.lambda.unwrap_or(n as f64);
    let zeta = resolve_zeta(cfg, n, p, lambda, norm_x)?;
    let prior = PriorConfig::new(zeta, cfg.b1, p)?;
    let post = GibbsPosterior::with_spectral_norm(data.clone(), prior, lambda, norm_x)?;
    progress.detail(&format!(
        "lambda={lambda}, zeta={zeta:.6e}, B1={}, |X|={norm_x:.4}",
        cfg.b1
    ));

    let sampler = SamplerConfig {
        algorithm: cfg.sampler.algorithm,
        step_size: cfg.sampler.step_size,
        n_iters: cfg.sampler.n_iters,
        burn_in: cfg.sampler.burn_in,
        thin: cfg.sampler.thin,
        n_chains: cfg.sampler.n_chains,
        seed: cfg.seed,
        init: resolve_init(cfg.sampler.init, &post, &data),
    };
    let chains = run_chains(&post, &sampler)?;
    let beta_hat = posterior_mean(&chains)?;
    write_fit_outputs(out, cfg, &chains, &beta_hat)?;

    let accept = chains.iter().map(|c| c.accept_rate).sum::<f64>() / chains.len() as f64;
    progress.note(&format!(
        "aggregate mean |beta| range [{:.4}, {:.4}], acceptance {accept:.3}",
        beta_hat.iter().fold(f64::INFINITY, |m, b| m.min(b.abs())),
        beta_hat.iter().fold(0.0f64, |m, b| m.max(b.abs())),
    ));
    progress.note(&format!("wrote {}", out.display()));
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(
    cfg: &ExperimentConfig,
    inject_step: Option<f64>,
    out: &Path,
    progress: &Progress,
) -> Result<ExitCode> {
    let opts = SuiteOptions {
        seed: cfg.seed,
        step_override: inject_step,
        ..SuiteOptions::default()
    };
    let reports = run_property_suite(&opts);
    let mut table = String::from("name,passed,statistic,threshold\n");
    for r in &reports {
        println!(
            "{} {:<26} statistic {:<12.6e} threshold {:<12.6e}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.statistic,
            r.threshold
        );
        progress.detail(&format!("     {}", r.detail));
        table.push_str(&format!(
            "{},{},{},{}\n",
            r.name, r.passed, r.statistic, r.threshold
        ));
    }
    fs::create_dir_all(out)?;
    fs::write(out.join("properties.csv"), table)?;
    if all_passed(&reports) {
        progress.note("all properties passed");
        Ok(ExitCode::SUCCESS)
    } else {
        let failed: Vec<&str> = reports
            .iter()
            .filter(|r| !r.passed)
            .map(|r| r.name)
            .collect();
        eprintln!("failed properties: {}", failed.join(", "));
        Ok(ExitCode::FAILURE)
    }
}

/// Run every configured cell with per-cell progress lines.
fn run_all_cells(cfg: &ExperimentConfig, progress: &Progress) -> Result<ExperimentResult> {
    let total = cfg.n_cells();
    let mut cells = Vec::with_capacity(total);
    let mut done = 0usize;
    for &n in &cfg.n_list {
        for &p in &cfg.p_list {
            for &p0 in &cfg.p0_list {
                let cell = prepare_cell(cfg, n, p, p0)?;
                for w in &cell.warnings {
                    progress.note(&format!("warning: {w}"));
                }
                let records = run_cell(cfg, &cell)?;
                let summary = summarize_cell(&cell, &records);
                done += 1;
                progress.note(&format!(
                    "[{done}/{total}] {}: oracle {:.6e}, mean excess {:.6e} (se {:.1e}), acceptance {:.2}",
                    summary.cell_id,
                    summary.oracle_kl,
                    summary.mean_excess_int,
                    summary.se_excess_int,
                    summary.mean_accept
                ));
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

fn emit_and_list(
    cfg: &ExperimentConfig,
    result: &ExperimentResult,
    rate: Option<&RateFit>,
    tails: Option<&TailStudy>,
    out: &Path,
    progress: &Progress,
) -> Result<()> {
    let written = emit_report(cfg, result, rate, tails, out)?;
    for path in &written {
        progress.detail(&format!("wrote {}", path.display()));
    }
    progress.note(&format!(
        "wrote {} files under {}",
        written.len(),
        out.display()
    ));
    Ok(())
}

fn cmd_simulate(cfg: &ExperimentConfig, out: &Path, progress: &Progress) -> Result<ExitCode> {
    let result = run_all_cells(cfg, progress)?;
    // Attach the studies opportunistically: simulate alone does not demand
    // enough cells or replications for them.
    let rate = rate_fit(&result.summaries()).ok();
    let tails = tail_check(&result, &cfg.epsilons).ok();
    emit_and_list(cfg, &result, rate.as_ref(), tails.as_ref(), out, progress)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_rate_study(cfg: &ExperimentConfig, out: &Path, progress: &Progress) -> Result<ExitCode> {
    let result = run_all_cells(cfg, progress)?;
    let fit = rate_fit(&result.summaries())?;
    let tails = tail_check(&result, &cfg.epsilons).ok();
    emit_and_list(cfg, &result, Some(&fit), tails.as_ref(), out, progress)?;
    println!(
        "rate fit over {} cells: slope {:.6}, intercept {:.6}, R^2 {:.4}",
        fit.n_cells, fit.slope, fit.intercept, fit.r_squared
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_tail_study(cfg: &ExperimentConfig, out: &Path, progress: &Progress) -> Result<ExitCode> {
    let result = run_all_cells(cfg, progress)?;
    let tails = tail_check(&result, &cfg.epsilons)?;
    let rate = rate_fit(&result.summaries()).ok();
    emit_and_list(cfg, &result, rate.as_ref(), Some(&tails), out, progress)?;
    for row in &tails.pooled {
        println!(
            "epsilon {:<6} log(1/eps) {:<8.4} pooled quantile {:.4}",
            row.epsilon, row.log_inv_eps, row.quantile
        );
    }
    println!(
        "tail growth {} (slope residual ratio {:.4})",
        if tails.at_most_linear {
            "at most linear in log(1/eps)"
        } else {
            "SUPERLINEAR in log(1/eps)"
        },
        tails.residual_ratio
    );
    Ok(ExitCode::SUCCESS)
}
