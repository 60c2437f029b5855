//! Command-line front end: `gen`, `fit`, `mc`, `check-design`.
//!
//! Exit status is 0 on success, 1 on a usage error, 2 on a data or
//! configuration error and 3 when a check declared in an `mc` config fails.
//! Diagnostics are one line on standard error.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde_json::json;

use crate::alignment::align;
use crate::dgp::{classify_units, design_diagnostics, generate_panel, sigma_threshold, DgpConfig};
use crate::error::{Error, Result};
use crate::estimator::{estimate, FitOptions, GroupAssignment, InitStrategy};
use crate::inference::infer;
use crate::montecarlo::{evaluate_checks, run_mc_with_threads, summarize, write_qq, write_rows, write_summary, McConfig};
use crate::panel_csv::{read_panel_file, write_panel_file};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_CHECK: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "panel-kmeans", version, about = "Kmeans estimation of grouped panel data models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Random,
    Spread,
    Mixed,
}

impl From<InitArg> for InitStrategy {
    fn from(a: InitArg) -> Self {
        match a {
            InitArg::Random => InitStrategy::RandomAssignment,
            InitArg::Spread => InitStrategy::SpreadSeeding,
            InitArg::Mixed => InitStrategy::Mixed,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a panel from a design JSON and write it as long CSV with truth columns.
    Gen {
        /// Design JSON (`DgpConfig`); must set `n` and `t`.
        #[arg(long)]
        config: PathBuf,
        /// Output panel CSV.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
    },
    /// Fit G groups to a long CSV panel.
    Fit {
        /// Input panel CSV with header `unit,time,y[,g0,sigma]`.
        #[arg(long)]
        panel: PathBuf,
        /// Number of groups G (>= 1).
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        groups: u64,
        /// Number of Lloyd restarts (>= 1).
        #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
        restarts: u64,
        #[arg(long)]
        seed: u64,
        /// Initialisation of each restart.
        #[arg(long, value_enum, default_value_t = InitArg::Mixed)]
        init: InitArg,
        /// Iteration cap per restart (>= 1).
        #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
        max_iter: u64,
        /// Directory for `means.csv`, `assignment.csv` and `inference.csv`.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Design JSON whose `mu0` and true assignment are used to report
        /// alignment errors; `g0` columns in the panel take precedence.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Level of the confidence intervals written to `inference.csv`, in (0, 1).
        #[arg(long)]
        ci: Option<f64>,
    },
    /// Run a Monte Carlo study.
    Mc {
        /// Study JSON (`McConfig`).
        #[arg(long)]
        config: PathBuf,
        /// Replication rows CSV.
        #[arg(long)]
        out: PathBuf,
        /// Per-grid-point summary CSV.
        #[arg(long)]
        summary: PathBuf,
        /// Worker threads (>= 1); output does not depend on it.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        threads: u64,
        /// Optional quantile-quantile CSV of scaled errors.
        #[arg(long)]
        qq: Option<PathBuf>,
    },
    /// Print design diagnostics as JSON.
    CheckDesign {
        /// Design JSON (`DgpConfig`); must set `n` and `t`.
        #[arg(long)]
        config: PathBuf,
        /// Group separation used by the threshold; defaults to the smallest gap in `mu0`.
        #[arg(long)]
        mg: Option<f64>,
    },
}

/// Parses `argv` (including the program name), runs the command and returns the exit status.
pub fn dispatch<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    EXIT_OK
                }
                _ => {
                    let msg = e.to_string();
                    eprintln!("error: {}", msg.lines().next().unwrap_or("").trim_start_matches("error: "));
                    EXIT_USAGE
                }
            };
        }
    };
    let mut stdout = std::io::stdout().lock();
    match run(cli.command, &mut stdout) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            EXIT_DATA
        }
    }
}

/// Runs one parsed command, writing any report to `stdout`.
pub fn run(command: Command, stdout: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Gen { config, out, seed } => {
            let cfg: DgpConfig = read_json(&config)?;
            let panel = generate_panel(&cfg, seed)?;
            write_panel_file(&out, &panel)?;
            Ok(EXIT_OK)
        }
        Command::Fit { panel, groups, restarts, seed, init, max_iter, out_dir, truth, ci } => {
            if let Some(a) = ci {
                if !(a > 0.0 && a < 1.0) {
                    return Err(Error::Config(format!("--ci must lie in (0, 1), got {a}")));
                }
            }
            let input = read_panel_file(&panel)?;
            let data = &input.panel;
            let opts = FitOptions {
                restarts: restarts as usize,
                max_iterations_per_restart: max_iter as usize,
                parameter_box_halfwidth: None,
                init_strategy: init.into(),
            };
            let est = estimate(data, groups as usize, &opts, seed)?;
            std::fs::create_dir_all(&out_dir)?;

            let mut w = create(&out_dir.join("means.csv"))?;
            writeln!(w, "group,mu_hat")?;
            for (g, m) in est.mu_hat.as_slice().iter().enumerate() {
                writeln!(w, "{},{m}", g + 1)?;
            }
            w.flush()?;
            let mut w = create(&out_dir.join("assignment.csv"))?;
            writeln!(w, "unit,g_hat")?;
            for (i, g) in est.g_hat.labels().iter().enumerate() {
                writeln!(w, "{},{}", i + 1, g + 1)?;
            }
            w.flush()?;

            let mut report = json!({
                "n": data.n(),
                "t": data.t(),
                "groups": groups,
                "mu_hat": est.mu_hat.as_slice(),
                "group_sizes": est.g_hat.counts(groups as usize),
                "objective": est.objective,
                "restarts_run": est.restarts_run,
                "iterations_total": est.iterations_total,
                "best_restart_index": est.best_restart_index,
                "converged": est.converged,
                "box_active": est.box_active,
            });
            if let Some(alpha) = ci {
                let inf = infer(data, &est, alpha)?;
                let mut w = create(&out_dir.join("inference.csv"))?;
                writeln!(w, "group,mu_hat,q_hat,delta_hat,std_error,ci_lower,ci_upper")?;
                for gi in &inf.groups {
                    writeln!(
                        w,
                        "{},{},{},{},{},{},{}",
                        gi.group + 1,
                        gi.mu_hat,
                        gi.q_hat,
                        gi.delta_hat,
                        gi.std_error,
                        gi.ci_lower,
                        gi.ci_upper
                    )?;
                }
                w.flush()?;
                report["alpha"] = json!(alpha);
            }
            if let Some(path) = truth {
                let design: DgpConfig = read_json(&path)?;
                let design = design.with_size(data.n(), data.t());
                design.validate()?;
                if design.num_groups != groups as usize {
                    return Err(Error::Config(format!(
                        "truth has {} groups but --groups is {groups}",
                        design.num_groups
                    )));
                }
                let g0 = match &input.g0 {
                    Some(labels) => GroupAssignment::new(labels.clone(), design.num_groups)?,
                    None => design.true_assignment(),
                };
                let sigma = input.sigma.clone().unwrap_or_else(|| design.sigmas());
                let (i_set, _) = match sigma_threshold(design.min_gap(), data.n(), data.t()) {
                    Ok(thr) => classify_units(&sigma, thr),
                    Err(_) => (Vec::new(), Vec::new()),
                };
                let rep = align(est.mu_hat.as_slice(), &est.g_hat, &design.mu0, &g0, &i_set)?;
                report["alignment"] = json!({
                    "permutation": rep.perm.0.iter().map(|h| h + 1).collect::<Vec<_>>(),
                    "max_mu_error": rep.max_mu_error,
                    "per_group_mu_error": rep.per_group_mu_error,
                    "misclassified_total": rep.misclassified_total,
                    "misclassified_in_i": rep.misclassified_in_i,
                    "misclassified_in_ic": rep.misclassified_in_ic,
                });
            }
            writeln!(stdout, "{}", serde_json::to_string_pretty(&report)?)?;
            Ok(EXIT_OK)
        }
        Command::Mc { config, out, summary, threads, qq } => {
            let cfg: McConfig = read_json(&config)?;
            let rows = run_mc_with_threads(&cfg, threads as usize)?;
            let g = cfg.design.num_groups;
            write_rows(create(&out)?, &rows, g)?;
            let stats = summarize(&rows, &cfg.design);
            write_summary(create(&summary)?, &stats, g)?;
            if let Some(path) = qq {
                write_qq(create(&path)?, &rows, g)?;
            }
            let checks = evaluate_checks(&cfg.checks, &stats, &rows);
            let mut failed = false;
            for c in &checks {
                failed |= !c.passed;
                writeln!(stdout, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
            }
            Ok(if failed { EXIT_CHECK } else { EXIT_OK })
        }
        Command::CheckDesign { config, mg } => {
            let cfg: DgpConfig = read_json(&config)?;
            cfg.validate()?;
            let d = design_diagnostics(&cfg, mg.unwrap_or_else(|| cfg.min_gap()))?;
            writeln!(stdout, "{}", serde_json::to_string_pretty(&d)?)?;
            Ok(EXIT_OK)
        }
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}
