//! Report emission: CSV files and SVG plots under an output directory.
//!
//! Every file is a pure function of the experiment result, so re-running
//! the same configuration reproduces the same bytes — except the `wall_ms`
//! column of `replications.csv`, which records real elapsed time and must
//! be masked before any byte comparison (see [`mask_wall_ms`]).
//!
//! Floats are written with Rust's shortest round-trip formatting, so the
//! loader recovers them bit-for-bit.

use std::fs;
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::config::ExperimentConfig;
use super::run::{ExperimentResult, RateFit, TailStudy};
use super::svg::{render_plot, Series, SvgPlot};

/// Header of `replications.csv`; the loader rejects anything else.
pub const REPLICATIONS_HEADER: &str =
    "cell_id,rep,seed,ewa_int_kl,ewa_mean_kl,oracle_kl,excess_int,excess_mean,accept_rate,ess,wall_ms";

/// Header of `cells.csv`.
pub const CELLS_HEADER: &str = "cell_id,n,p,p0,norm_x,theory_rate,oracle_kl,mean_excess_int,\
     se_excess_int,mean_excess_mean,se_excess_mean,mean_accept,mean_ess,n_reps,flagged";

/// One parsed row of `replications.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct RepRow {
    pub cell_id: String,
    pub rep: usize,
    pub seed: u64,
    pub ewa_int_kl: f64,
    pub ewa_mean_kl: f64,
    pub oracle_kl: f64,
    pub excess_int: f64,
    pub excess_mean: f64,
    pub accept_rate: f64,
    pub ess: f64,
    pub wall_ms: u64,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn replications_csv(result: &ExperimentResult) -> String {
    let mut out = String::from(REPLICATIONS_HEADER);
    out.push('\n');
    for cell in &result.cells {
        for r in &cell.records {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                cell.summary.cell_id,
                r.rep,
                r.seed,
                r.ewa_int_kl,
                r.ewa_mean_kl,
                r.oracle_kl,
                r.excess_int,
                r.excess_mean,
                r.accept_rate,
                r.ess,
                r.wall_ms
            ));
        }
    }
    out
}

fn cells_csv(result: &ExperimentResult) -> String {
    let mut out = String::from(CELLS_HEADER);
    out.push('\n');
    for cell in &result.cells {
        let s = &cell.summary;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            s.cell_id,
            s.n,
            s.p,
            s.p0,
            s.norm_x,
            s.theory_rate,
            s.oracle_kl,
            s.mean_excess_int,
            s.se_excess_int,
            s.mean_excess_mean,
            s.se_excess_mean,
            s.mean_accept,
            s.mean_ess,
            s.n_reps,
            s.flagged
        ));
    }
    out
}

fn ratefit_csv(fit: &RateFit) -> String {
    format!(
        "slope,intercept,r_squared,n_cells\n{},{},{},{}\n",
        fit.slope, fit.intercept, fit.r_squared, fit.n_cells
    )
}

fn tails_csv(study: &TailStudy) -> String {
    let mut out = String::from("cell_id,epsilon,log_inv_eps,normalized_quantile\n");
    for row in study.rows.iter().chain(study.pooled.iter()) {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.cell_id, row.epsilon, row.log_inv_eps, row.quantile
        ));
    }
    out
}

fn rate_plot(result: &ExperimentResult, fit: &RateFit) -> String {
    let points: Vec<(f64, f64)> = result
        .cells
        .iter()
        .map(|c| (c.summary.theory_rate, c.summary.mean_excess_int))
        .collect();
    let (lo, hi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(x, _)| {
            (lo.min(x), hi.max(x))
        });
    let line = vec![
        (lo, fit.intercept + fit.slope * lo),
        (hi, fit.intercept + fit.slope * hi),
    ];
    render_plot(&SvgPlot {
        title: format!(
            "Mean excess KL risk vs p0·log(np‖X‖/p0) — slope {:.4}, R² {:.3}",
            fit.slope, fit.r_squared
        ),
        x_label: "p0·log(np‖X‖/p0)".into(),
        y_label: "mean excess KL risk".into(),
        series: vec![
            Series {
                name: "cells".into(),
                points,
                line: false,
                markers: true,
            },
            Series {
                name: "least-squares fit".into(),
                points: line,
                line: true,
                markers: false,
            },
        ],
    })
}

fn tail_plot(study: &TailStudy) -> String {
    let mut series = Vec::new();
    let mut cell_ids: Vec<&str> = study.rows.iter().map(|r| r.cell_id.as_str()).collect();
    cell_ids.dedup();
    cell_ids.sort_unstable();
    cell_ids.dedup();
    for id in cell_ids {
        series.push(Series {
            name: id.to_string(),
            points: study
                .rows
                .iter()
                .filter(|r| r.cell_id == id)
                .map(|r| (r.log_inv_eps, r.quantile))
                .collect(),
            line: true,
            markers: false,
        });
    }
    series.push(Series {
        name: "pooled".into(),
        points: study
            .pooled
            .iter()
            .map(|r| (r.log_inv_eps, r.quantile))
            .collect(),
        line: true,
        markers: true,
    });
    render_plot(&SvgPlot {
        title: format!(
            "Normalized excess-risk tail quantiles — slope residual {:.3} ({})",
            study.residual_ratio,
            if study.at_most_linear {
                "at most linear"
            } else {
                "superlinear"
            }
        ),
        x_label: "log(1/ε)".into(),
        y_label: "(1−ε)-quantile / mean excess".into(),
        series,
    })
}

/// Write every report file for `result` under `out_dir`, returning the
/// paths written. `rate` and `tails` add their CSVs and plots when present.
pub fn emit_report(
    cfg: &ExperimentConfig,
    result: &ExperimentResult,
    rate: Option<&RateFit>,
    tails: Option<&TailStudy>,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir.join("plots"))?;
    let mut written = Vec::new();
    let mut emit = |name: &str, text: String| -> Result<()> {
        let path = out_dir.join(name);
        write_text(&path, &text)?;
        written.push(path);
        Ok(())
    };
    emit("config_echo.toml", cfg.raw.to_toml_string())?;
    emit("replications.csv", replications_csv(result))?;
    emit("cells.csv", cells_csv(result))?;
    if let Some(fit) = rate {
        emit("ratefit.csv", ratefit_csv(fit))?;
        emit("plots/rate_fit.svg", rate_plot(result, fit))?;
    }
    if let Some(study) = tails {
        emit("tails.csv", tails_csv(study))?;
        emit("plots/tail_quantiles.svg", tail_plot(study))?;
    }
    Ok(written)
}

fn parse_field<T: std::str::FromStr>(
    path: &Path,
    line: usize,
    field: &str,
    raw: &str,
) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.parse().map_err(|e| Error::CsvParse {
        path: path.display().to_string(),
        line,
        message: format!("bad {field} value {raw:?}: {e}"),
    })
}

/// Load `replications.csv`, validating the header and every field. Floats
/// round-trip exactly against [`emit_report`]'s output.
pub fn read_replications_csv(path: &Path) -> Result<Vec<RepRow>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == REPLICATIONS_HEADER => {}
        Some((_, header)) => {
            return Err(Error::CsvParse {
                path: path.display().to_string(),
                line: 1,
                message: format!("unexpected header {header:?}"),
            })
        }
        None => {
            return Err(Error::CsvParse {
                path: path.display().to_string(),
                line: 1,
                message: "empty file".into(),
            })
        }
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 11 {
            return Err(Error::CsvParse {
                path: path.display().to_string(),
                line: lineno,
                message: format!("expected 11 fields, got {}", fields.len()),
            });
        }
        rows.push(RepRow {
            cell_id: fields[0].to_string(),
            rep: parse_field(path, lineno, "rep", fields[1])?,
            seed: parse_field(path, lineno, "seed", fields[2])?,
            ewa_int_kl: parse_field(path, lineno, "ewa_int_kl", fields[3])?,
            ewa_mean_kl: parse_field(path, lineno, "ewa_mean_kl", fields[4])?,
            oracle_kl: parse_field(path, lineno, "oracle_kl", fields[5])?,
            excess_int: parse_field(path, lineno, "excess_int", fields[6])?,
            excess_mean: parse_field(path, lineno, "excess_mean", fields[7])?,
            accept_rate: parse_field(path, lineno, "accept_rate", fields[8])?,
            ess: parse_field(path, lineno, "ess", fields[9])?,
            wall_ms: parse_field(path, lineno, "wall_ms", fields[10])?,
        });
    }
    Ok(rows)
}

/// Replace the `wall_ms` field of every data row with `0`, for byte
/// comparisons between runs (elapsed time is the one nondeterministic
/// column).
pub fn mask_wall_ms(csv_text: &str) -> String {
    let mut out = String::with_capacity(csv_text.len());
    for (i, line) in csv_text.lines().enumerate() {
        if i == 0 || line.is_empty() {
            out.push_str(line);
        } else {
            match line.rfind(',') {
                Some(pos) => {
                    out.push_str(&line[..=pos]);
                    out.push('0');
                }
                None => out.push_str(line),
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::run::{rate_fit, run_experiment, tail_check};

    fn mini_config() -> ExperimentConfig {
        ExperimentConfig::from_toml_str(
            r#"
            [data]
            n = [30]
            p = [5]
            p0 = [1, 2]

            [run]
            replications = 2
            seed = 7
            epsilons = [0.5, 0.25]

            [sampler]
            n_iters = 200
            n_chains = 1
            "#,
        )
        .unwrap()
    }

    #[test]
    fn report_files_land_where_promised_and_round_trip() {
        let cfg = mini_config();
        let result = run_experiment(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let written = emit_report(&cfg, &result, None, None, dir.path()).unwrap();
        let names: Vec<String> = written
            .iter()
            .map(|p| {
                p.strip_prefix(dir.path())
                    .unwrap()
                    .to_string_lossy()
                    .into_owned()
            })
            .collect();
        assert_eq!(
            names,
            vec!["config_echo.toml", "replications.csv", "cells.csv"]
        );

        let rows = read_replications_csv(&dir.path().join("replications.csv")).unwrap();
        assert_eq!(rows.len(), 4);
        let mut i = 0;
        for cell in &result.cells {
            for r in &cell.records {
                assert_eq!(rows[i].cell_id, cell.summary.cell_id);
                assert_eq!(rows[i].rep, r.rep);
                assert_eq!(rows[i].seed, r.seed);
                // Shortest round-trip formatting restores the exact bits.
                assert_eq!(rows[i].ewa_int_kl, r.ewa_int_kl);
                assert_eq!(rows[i].ewa_mean_kl, r.ewa_mean_kl);
                assert_eq!(rows[i].excess_int, r.excess_int);
                assert_eq!(rows[i].ess, r.ess);
                i += 1;
            }
        }

        // The echo parses back to the configuration that ran.
        let echo = fs::read_to_string(dir.path().join("config_echo.toml")).unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&echo).unwrap(), cfg);
    }

    #[test]
    fn reruns_are_byte_identical_after_masking_wall_time() {
        let cfg = mini_config();
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        for dir in [&dir_a, &dir_b] {
            let result = run_experiment(&cfg).unwrap();
            let rate = rate_fit(&result.summaries()).ok();
            let tails = tail_check(&result, &cfg.epsilons).ok();
            emit_report(&cfg, &result, rate.as_ref(), tails.as_ref(), dir.path()).unwrap();
        }
        for name in ["config_echo.toml", "cells.csv"] {
            let a = fs::read_to_string(dir_a.path().join(name)).unwrap();
            let b = fs::read_to_string(dir_b.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between reruns");
        }
        let a = fs::read_to_string(dir_a.path().join("replications.csv")).unwrap();
        let b = fs::read_to_string(dir_b.path().join("replications.csv")).unwrap();
        assert_eq!(mask_wall_ms(&a), mask_wall_ms(&b));
    }

    #[test]
    fn rate_and_tail_files_appear_when_the_studies_ran() {
        let cfg = mini_config();
        let result = run_experiment(&cfg).unwrap();
        // Two cells is too few for the rate fit, so synthesize one.
        let fit = RateFit {
            slope: 0.5,
            intercept: 0.1,
            r_squared: 0.99,
            n_cells: 2,
        };
        // Tail study needs ≥ 50 reps; build it from synthetic excesses.
        let excesses: Vec<f64> = (1..=60).map(|i| i as f64 / 10.0).collect();
        let cells = vec![
            ("n30_p5_p01".to_string(), excesses.clone()),
            ("n30_p5_p02".to_string(), excesses),
        ];
        let study =
            crate::experiments::run::tail_from_excesses(&cells, &cfg.epsilons).unwrap();
        let dir = tempfile::tempdir().unwrap();
        emit_report(&cfg, &result, Some(&fit), Some(&study), dir.path()).unwrap();

        let ratefit = fs::read_to_string(dir.path().join("ratefit.csv")).unwrap();
        assert_eq!(
            ratefit,
            "slope,intercept,r_squared,n_cells\n0.5,0.1,0.99,2\n"
        );
        let tails = fs::read_to_string(dir.path().join("tails.csv")).unwrap();
        assert!(tails.starts_with("cell_id,epsilon,log_inv_eps,normalized_quantile\n"));
        assert!(tails.contains("\npooled,"));
        for name in ["plots/rate_fit.svg", "plots/tail_quantiles.svg"] {
            let svg = fs::read_to_string(dir.path().join(name)).unwrap();
            assert!(svg.starts_with("<svg"), "{name} is not an SVG");
            assert!(svg.ends_with("</svg>\n"), "{name} is truncated");
        }
    }

    #[test]
    fn loader_reports_the_offending_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("replications.csv");
        fs::write(
            &path,
            format!("{REPLICATIONS_HEADER}\ncell,0,1,0.5,0.5,0,0.5,0.5,0.6,bad,3\n"),
        )
        .unwrap();
        let err = read_replications_csv(&path).unwrap_err();
        match err {
            Error::CsvParse { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("ess"), "{message}");
            }
            other => panic!("unexpected error {other}"),
        }

        fs::write(&path, "wrong,header\n").unwrap();
        assert!(matches!(
            read_replications_csv(&path).unwrap_err(),
            Error::CsvParse { line: 1, .. }
        ));
    }

    #[test]
    fn wall_time_masking_touches_only_the_last_field() {
        let text = format!("{REPLICATIONS_HEADER}\na,0,9,1.5,1.25,0,1.5,1.25,0.5,12.5,987\n");
        let masked = mask_wall_ms(&text);
        assert_eq!(
            masked,
            format!("{REPLICATIONS_HEADER}\na,0,9,1.5,1.25,0,1.5,1.25,0.5,12.5,0\n")
        );
    }
}
