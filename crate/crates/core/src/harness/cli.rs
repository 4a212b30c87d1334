//! Command-line front end. Exit codes: 0 success, 1 configuration or usage
//! error, 2 run failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::diagnostics::{check_mse_bound, frozen_battery};
use crate::error::Error;
use crate::estimators::{vr_constants, EstimatorConfig, EstimatorKind, SagaMode};
use crate::harness::config::{batch_size, ExperimentConfig};
use crate::harness::io::{load_matrix, load_pgm, save_matrix, MatrixFormat};
use crate::harness::report::{emit_report, summarize};
use crate::harness::runner::{run_experiment, stepsize_check};
use crate::harness::synthetic::planted_snmf;

#[derive(Debug, Parser)]
#[command(name = "stibpalm", version, about = "Stochastic inertial alternating minimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every algorithm and seed of a config and write the report.
    Run {
        config: PathBuf,
        #[arg(long)]
        strict: bool,
        /// Overrides the config's output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Check a config and print the step-size margin of each algorithm.
    Validate {
        config: PathBuf,
        #[arg(long)]
        strict: bool,
    },
    /// Frozen-iterate checks of the SAGA, SARAH and SGD estimators on the
    /// config's problem.
    CheckEstimators {
        config: PathBuf,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        #[arg(long, default_value_t = 30)]
        seeds: u64,
    },
    /// Write a planted sparse factorization `A ≈ X Y` with Gaussian noise.
    GenSynthetic {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        #[arg(long)]
        rank: usize,
        /// Fraction of nonzeros per column of `X`.
        #[arg(long, default_value_t = 0.25)]
        sparsity: f64,
        #[arg(long, default_value_t = 0.01)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for `a`, `x_true` and `y_true`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "csv")]
        format: MatrixFormat,
    },
    /// Convert between csv and MTXB matrices, or a PGM image to a matrix.
    Convert {
        input: PathBuf,
        output: PathBuf,
        #[arg(long)]
        from: Option<String>,
        #[arg(long)]
        to: Option<MatrixFormat>,
    },
}

enum Failure {
    Config(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Parse { .. } | Error::Io { .. } | Error::UnknownPreset(_) => {
                Failure::Config(e.to_string())
            }
            e => Failure::Run(e.to_string()),
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

fn load(path: &Path, strict: bool) -> Result<ExperimentConfig, Failure> {
    ExperimentConfig::load(path, strict).map_err(|e| Failure::Config(e.to_string()))
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run { config, strict, output_dir } => {
            let mut cfg = load(&config, strict)?;
            if let Some(d) = output_dir {
                cfg.output_dir = d;
            }
            let runs = run_experiment(&cfg)?;
            let files = emit_report(&runs, &cfg.output_dir, cfg.log_y).map_err(|e| Failure::Run(e.to_string()))?;
            for a in summarize(&runs).algorithms {
                println!(
                    "{:<20} mean {:.6e}  std {:.3e}  runs {}  failed {}",
                    a.algorithm, a.mean_final_objective, a.std_final_objective, a.runs, a.failed
                );
            }
            println!("report written to {}", files.metrics.parent().unwrap_or(Path::new(".")).display());
            let failed: Vec<&str> = runs.iter().filter(|r| r.failed()).map(|r| r.run_id.as_str()).collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Failure::Run(format!("{} run(s) failed: {}", failed.len(), failed.join(", "))))
            }
        }
        Command::Validate { config, strict } => {
            let cfg = load(&config, strict)?;
            let problem = cfg.build_problem()?;
            let seed = cfg.seeds[0];
            let mut violated = false;
            for alg in &cfg.algorithms {
                let (_, check) = stepsize_check(&cfg, problem.as_ref(), alg, seed)?;
                match check {
                    Ok(c) => {
                        let word = if c.verdict.is_satisfied() { "Satisfied" } else { "Violated" };
                        violated |= !c.verdict.is_satisfied();
                        println!(
                            "{}: {word}, margin {:.6} (theta {:.6}/{:.6}, L {:.6}, bound {:.6})",
                            alg.label(),
                            c.verdict.margin(),
                            c.theta.0,
                            c.theta.1,
                            c.l,
                            c.bound
                        );
                    }
                    Err(e) => println!("{}: not checked, {e}", alg.label()),
                }
            }
            if violated && cfg.strict {
                return Err(Failure::Config("step-size condition violated".into()));
            }
            Ok(())
        }
        Command::CheckEstimators { config, steps, seeds } => {
            let cfg = load(&config, false)?;
            let problem = cfg.build_problem()?;
            let n = problem.n_components();
            let b = batch_size(cfg.batch_fraction, n);
            let s0 = cfg.seeds[0];
            let (anchor, point) = (problem.initial_point(s0), problem.initial_point(s0.wrapping_add(1)));
            let lip = problem.lipschitz_hint(&point, true)?.n;
            let seed_list: Vec<u64> = (0..seeds).collect();
            println!("n = {n}, b = {b}, {seeds} seeds, {steps} frozen steps");
            for est in [
                EstimatorConfig::saga(b, SagaMode::Literal),
                EstimatorConfig::sarah(b, cfg.refresh_prob),
                EstimatorConfig::sgd(b),
            ] {
                let bat = frozen_battery(problem.as_ref(), est, &anchor, &point, &seed_list, steps)?;
                let vr = match vr_constants(est.kind, lip, 0.0, 0.0, b, n, est.sarah_p()) {
                    Ok(v) => v,
                    Err(_) => crate::estimators::VRConstants::EXACT,
                };
                let mse = check_mse_bound(est.kind, &bat.records(), &vr)?;
                let below = bat.steps_below(1e-10).map_or("never".to_string(), |k| k.to_string());
                let mut line = format!(
                    "{:<6} rho_hat {:.4} (theory {:.4})  below 1e-10 at step {below}  mse violations {:.1}%  {}",
                    est.kind.name(),
                    bat.rho_hat,
                    vr.rho,
                    100.0 * mse.violation_rate,
                    if mse.conforming { "conforming" } else { "non-conforming" }
                );
                if est.kind == EstimatorKind::Sarah {
                    let zero = bat
                        .runs
                        .iter()
                        .filter(|r| r.first_refresh.map_or(false, |k| r.upsilon[k] == 0.0))
                        .count();
                    line += &format!("  zero at first refresh {zero}/{}", bat.runs.len());
                }
                println!("{line}");
            }
            Ok(())
        }
        Command::GenSynthetic { rows, cols, rank, sparsity, noise, seed, out, format } => {
            let planted =
                planted_snmf(rows, cols, rank, sparsity, noise, seed).map_err(|e| Failure::Config(e.to_string()))?;
            std::fs::create_dir_all(&out).map_err(|e| Failure::Run(format!("{}: {e}", out.display())))?;
            let ext = format.extension();
            for (name, m) in [("a", &planted.a), ("x_true", &planted.x), ("y_true", &planted.y)] {
                let p = out.join(format!("{name}.{ext}"));
                save_matrix(&p, m, format).map_err(|e| Failure::Run(e.to_string()))?;
                println!("wrote {}", p.display());
            }
            Ok(())
        }
        Command::Convert { input, output, from, to } => {
            let src = match from.as_deref() {
                Some("pgm") => None,
                Some(f) => Some(f.parse::<MatrixFormat>()?),
                None if input.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")) => None,
                None => Some(MatrixFormat::from_path(&input).ok_or_else(|| {
                    Failure::Config(format!("{}: cannot infer the input format", input.display()))
                })?),
            };
            let dst = match to {
                Some(f) => f,
                None => MatrixFormat::from_path(&output).ok_or_else(|| {
                    Failure::Config(format!("{}: cannot infer the output format", output.display()))
                })?,
            };
            let m = match src {
                Some(f) => load_matrix(&input, f)?,
                None => load_pgm(&input)?,
            };
            save_matrix(&output, &m, dst).map_err(|e| Failure::Run(e.to_string()))?;
            println!("wrote {} ({}x{})", output.display(), m.nrows(), m.ncols());
            Ok(())
        }
    }
}
