//! Command-line front end.
//!
//! ```text
//! minimax-bench run --config <file> [--out <dir>] [--seed <int>] [--jobs <int>]
//! minimax-bench plot --mode <gap_vs_time|gnorm_vs_iter> --out <file> <trace...>
//! minimax-bench certify --problem <file> --x <vector-file> --epsilon <real>
//! minimax-bench validate --problem <file>
//! ```
//!
//! Exit codes: 0 success, 2 configuration/input error, 3 runtime error.

mod experiment;
mod plot;
mod trace;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use nalgebra::DVector;

pub use experiment::{ExperimentConfig, RunOptions, RunSummary, SummaryFile, run_experiment};
pub use plot::{PlotMode, emit_plot};
pub use trace::{TRACE_COLUMNS, TRACE_SCHEMA_VERSION, Trace, format_trace, parse_trace};

use crate::drivers::{Algorithm, certify, default_certify_tol};
use crate::oracle::{MinimaxProblem, sample_assumption_violations, validate_derivatives};
use crate::problems::{AnyProblem, ProblemSpec};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("cannot read {path}: {source}")]
    Input {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path}: {msg}")]
    Parse { path: PathBuf, msg: String },
    #[error(transparent)]
    Solver(#[from] crate::Error),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn input(path: &Path, source: std::io::Error) -> Self {
        CliError::Input {
            path: path.to_path_buf(),
            source,
        }
    }

    fn output(path: &Path, source: std::io::Error) -> Self {
        CliError::Output {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Errors raised while building a problem from its description are
    /// configuration errors.
    fn from_build(e: crate::Error) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input { .. } | CliError::Parse { .. } => 2,
            CliError::Solver(
                crate::Error::InvalidConfig(_)
                | crate::Error::InvalidAccuracy(_)
                | crate::Error::DimensionMismatch { .. },
            ) => 2,
            _ => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "minimax-bench", version, about = "Second-order minimax solvers and benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an experiment described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides `output_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Base seed (overrides `seed`).
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for independent runs.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Plot one or more trace files to SVG.
    Plot {
        #[arg(long, value_enum)]
        mode: PlotMode,
        #[arg(long)]
        out: PathBuf,
        traces: Vec<PathBuf>,
    },
    /// Certify second-order stationarity of a point.
    Certify {
        /// Instance file (or experiment config with a `[problem]` table).
        #[arg(long)]
        problem: PathBuf,
        /// Whitespace- or comma-separated coordinates; `#` starts a comment.
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        epsilon: f64,
        /// Which certificate constants to use.
        #[arg(long, default_value = "grtr")]
        algorithm: String,
        /// Residual tolerance of the certifying inner solve.
        #[arg(long)]
        inner_tol: Option<f64>,
    },
    /// Finite-difference derivative and assumption checks.
    Validate {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, default_value_t = 20)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Maximum accepted relative derivative error.
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
}

/// Reads an instance file, or the `[problem]` table of an experiment config.
pub fn load_problem(path: &Path) -> Result<(ProblemSpec, AnyProblem), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
    let value: toml::Table = toml::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    let spec_value = match value.get("problem") {
        Some(toml::Value::Table(t)) => t.clone(),
        _ => value,
    };
    let spec: ProblemSpec = spec_value.try_into().map_err(|e: toml::de::Error| CliError::Parse {
        path: path.to_path_buf(),
        msg: e.message().to_string(),
    })?;
    let built = spec.build().map_err(CliError::from_build)?;
    Ok((spec, built))
}

/// Parses numbers separated by whitespace, commas or newlines.
pub fn parse_vector(text: &str) -> Result<Vec<f64>, String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.split(|c: char| c == ',' || c.is_whitespace()))
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|e| format!("'{t}': {e}")))
        .collect()
}

fn read_trace(path: &Path) -> Result<Trace, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
    parse_trace(&text).map_err(|msg| CliError::Parse {
        path: path.to_path_buf(),
        msg,
    })
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            jobs,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let summaries = run_experiment(&cfg, &RunOptions { out, seed, jobs })?;
            for s in &summaries {
                let gap = s.final_gap.map(|g| format!("{g:.3e}")).unwrap_or_else(|| "n/a".into());
                println!(
                    "{:<11} rep {:<3} iters {:>7}  gap {:>10}  certified {:<5}  {:>8.3}s  {}",
                    s.algorithm.name(),
                    s.repetition,
                    s.iterations,
                    gap,
                    s.certificate.satisfied,
                    s.wall_time,
                    s.termination,
                );
            }
            Ok(())
        }
        Command::Plot { mode, out, traces } => {
            if traces.is_empty() {
                return Err(CliError::Config("plot needs at least one trace file".into()));
            }
            let loaded = traces
                .iter()
                .map(|p| {
                    let t = read_trace(p)?;
                    let label = t.label().unwrap_or_else(|| {
                        p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
                    });
                    Ok((label, t))
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            emit_plot(&loaded, mode, &out).map_err(CliError::Runtime)?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Certify {
            problem,
            x,
            epsilon,
            algorithm,
            inner_tol,
        } => {
            let (_, built) = load_problem(&problem)?;
            let text = fs::read_to_string(&x).map_err(|e| CliError::input(&x, e))?;
            let coords = parse_vector(&text).map_err(|msg| CliError::Parse {
                path: x.clone(),
                msg,
            })?;
            if coords.len() != built.dim_x() {
                return Err(CliError::Config(format!(
                    "{} has {} coordinates, problem has n = {}",
                    x.display(),
                    coords.len(),
                    built.dim_x()
                )));
            }
            if !(epsilon > 0.0 && epsilon.is_finite()) {
                return Err(CliError::Config(format!("epsilon must be > 0, got {epsilon}")));
            }
            let alg: Algorithm = algorithm.parse().map_err(|e: crate::Error| CliError::Config(e.to_string()))?;
            let tol = inner_tol.unwrap_or_else(|| default_certify_tol(&built, epsilon));
            let report = certify(&built, &DVector::from_vec(coords), epsilon, tol, alg)?;
            print!("{}", toml::to_string(&report).map_err(|e| CliError::Runtime(e.to_string()))?);
            Ok(())
        }
        Command::Validate {
            problem,
            points,
            seed,
            tol,
        } => {
            let (_, built) = load_problem(&problem)?;
            let mut worst: f64 = 0.0;
            let mut violations = 0;
            for k in 0..points {
                let (x, y) = built.sample_point(seed.wrapping_add(k as u64));
                let z = DVector::from_iterator(x.len() + y.len(), x.iter().chain(y.iter()).copied());
                let step = 1e-6 * (1.0 + z.norm());
                let rep = validate_derivatives(&built, &z, step)?;
                worst = worst.max(rep.max());
                violations += sample_assumption_violations(&built, &x, &y, 0.1, 10, seed ^ k as u64)?.len();
                println!(
                    "point {k:>3}: grad_x {:.1e} grad_y {:.1e} hess_xx {:.1e} hess_xy {:.1e} hess_yx {:.1e} hess_yy {:.1e}",
                    rep.grad_x, rep.grad_y, rep.hess_xx, rep.hess_xy, rep.hess_yx, rep.hess_yy
                );
            }
            println!("max relative derivative error {worst:.2e} (tolerance {tol:.1e})");
            println!("assumption violations in random neighborhoods: {violations}");
            if worst > tol || violations > 0 {
                return Err(CliError::Runtime("derivative or assumption check failed".into()));
            }
            Ok(())
        }
    }
}

/// Parses arguments, runs the command, and returns the process exit code.
pub fn main_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
