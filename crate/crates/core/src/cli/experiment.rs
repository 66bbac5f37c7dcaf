//! Experiment configuration and orchestration.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::CliError;
use super::trace::format_trace;
use crate::drivers::{
    Algorithm, SolverConfig, SolverOutcome, StationarityReport, evaluate_envelope, run_algorithm,
    seeded_y0,
};
use crate::oracle::MinimaxProblem;
use crate::problems::{AnyProblem, ProblemSpec};

/// Experiment file. Unknown keys are rejected.
///
/// ```toml
/// epsilon = 1e-2
/// algorithms = ["grtr", "lmnegcur", "minimax_tr", "gda"]
/// repetitions = 1
/// output_dir = "out"
/// time_limit = 60.0
///
/// [problem]
/// kind = "saddle_chain"
/// n = 10
/// m = 5
/// L = 1.0
/// gamma = 1.0
///
/// [solver]            # shared SolverConfig fields
/// inner = { accelerated = false }
///
/// [overrides.gda]     # per-algorithm SolverConfig fields
/// max_outer_iters = 200000
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub algorithms: Vec<Algorithm>,
    pub epsilon: f64,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Per-run wall-clock limit in seconds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_limit: Option<f64>,
    /// Repetition `r` uses seed `seed + r` for its `y₀ ~ N(0, I)`.
    #[serde(default)]
    pub seed: u64,
    /// Starting `x`; defaults to `(10⁻³, …, 10⁻³)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    /// When false, wall times in traces and the summary are written as zero
    /// so that every output file is byte-for-byte reproducible.
    #[serde(default = "default_true")]
    pub record_wall_time: bool,
    #[serde(default, skip_serializing_if = "toml::Table::is_empty")]
    pub solver: toml::Table,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub overrides: BTreeMap<String, toml::Table>,
}

fn default_repetitions() -> usize {
    1
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_true() -> bool {
    true
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.algorithms.is_empty() {
            return Err(CliError::Config("at least one algorithm is required".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(CliError::Config(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if let Some(tl) = self.time_limit
            && !(tl > 0.0)
        {
            return Err(CliError::Config(format!("time_limit must be > 0, got {tl}")));
        }
        for name in self.overrides.keys() {
            let alg: Algorithm = name
                .parse()
                .map_err(|_| CliError::Config(format!("overrides.{name}: unknown algorithm")))?;
            if !self.algorithms.contains(&alg) {
                return Err(CliError::Config(format!(
                    "overrides.{name}: algorithm is not listed in 'algorithms'"
                )));
            }
        }
        for alg in &self.algorithms {
            self.solver_config(*alg, 0)?;
        }
        Ok(())
    }

    /// Defaults, then `[solver]`, then `[overrides.<alg>]`.
    pub fn solver_config(&self, algorithm: Algorithm, repetition: usize) -> Result<SolverConfig, CliError> {
        let mut table = toml::Table::try_from(SolverConfig::default()).expect("config serializes");
        table.insert("epsilon".into(), self.epsilon.into());
        if let Some(tl) = self.time_limit {
            table.insert("time_limit_s".into(), tl.into());
        }
        merge(&mut table, &self.solver);
        if let Some(o) = self.overrides.get(algorithm.name()) {
            merge(&mut table, o);
        }
        let mut cfg: SolverConfig = table.try_into().map_err(|e: toml::de::Error| {
            CliError::Config(format!("solver settings for {algorithm}: {}", e.message()))
        })?;
        cfg.seed = self.seed.wrapping_add(repetition as u64);
        Ok(cfg)
    }
}

fn merge(base: &mut toml::Table, over: &toml::Table) {
    for (k, v) in over {
        match (base.get_mut(k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

/// One (algorithm, repetition) result as stored in `summary.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub algorithm: Algorithm,
    pub repetition: usize,
    pub seed: u64,
    pub iterations: usize,
    pub inner_iterations_total: usize,
    /// `P(x_T)` from the closed form or a high-accuracy inner solve.
    pub final_p: f64,
    /// `P(x_T) − P*` when `P*` is known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_gap: Option<f64>,
    pub termination: String,
    pub wall_time: f64,
    pub trace_file: String,
    pub certificate: StationarityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_star: Option<f64>,
    pub runs: Vec<RunSummary>,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
}

fn envelope_at(problem: &AnyProblem, x: &DVector<f64>, y: &DVector<f64>, epsilon: f64) -> crate::Result<f64> {
    if let Some(cf) = problem.closed_form() {
        return cf.envelope_value(x);
    }
    let tol = crate::drivers::default_certify_tol(problem, epsilon) * 1e-2;
    Ok(evaluate_envelope(problem, x, y, tol)?.0)
}

fn trace_name(algorithm: Algorithm, repetition: usize) -> String {
    format!("{algorithm}_rep{repetition}.csv")
}

/// Runs every (algorithm, repetition) pair, writes one trace per run plus
/// `summary.toml` and `instance.toml` into the output directory, and returns
/// the summaries in config order. With zero repetitions nothing is written.
pub fn run_experiment(config: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<RunSummary>, CliError> {
    let mut config = config.clone();
    if let Some(seed) = opts.seed {
        config.seed = seed;
    }
    config.validate()?;
    let out_dir = opts.out.clone().unwrap_or_else(|| config.output_dir.clone());
    let problem = config.problem.build().map_err(CliError::from_build)?;
    let x0 = match &config.x0 {
        Some(v) => {
            if v.len() != problem.dim_x() {
                return Err(CliError::Config(format!(
                    "x0 has length {}, problem has n = {}",
                    v.len(),
                    problem.dim_x()
                )));
            }
            DVector::from_vec(v.clone())
        }
        None => problem.default_x0(),
    };
    let p_star = problem.closed_form().and_then(|c| c.optimal_value());

    let jobs: Vec<(Algorithm, usize)> = (0..config.repetitions)
        .flat_map(|r| config.algorithms.iter().map(move |&a| (a, r)))
        .collect();
    if jobs.is_empty() {
        return Ok(Vec::new());
    }
    fs::create_dir_all(&out_dir).map_err(|e| CliError::output(&out_dir, e))?;
    let instance = config.problem.resolved(&problem).to_toml();
    let instance_path = out_dir.join("instance.toml");
    fs::write(&instance_path, instance).map_err(|e| CliError::output(&instance_path, e))?;

    let run_one = |&(alg, rep): &(Algorithm, usize)| -> Result<RunSummary, CliError> {
        let cfg = config.solver_config(alg, rep)?;
        let y0 = seeded_y0(problem.dim_y(), cfg.seed);
        let outcome = run_algorithm(alg, &problem, &x0, &y0, &cfg)?;
        let name = trace_name(alg, rep);
        let path = out_dir.join(&name);
        write_run_trace(&path, &outcome, rep, cfg.seed, p_star, config.record_wall_time)?;
        let final_p = envelope_at(&problem, &outcome.x, &outcome.y, cfg.epsilon)?;
        Ok(RunSummary {
            algorithm: alg,
            repetition: rep,
            seed: cfg.seed,
            iterations: outcome.iterations(),
            inner_iterations_total: outcome.inner_iters_total,
            final_p,
            final_gap: p_star.map(|p| final_p - p),
            termination: outcome.termination.name().to_string(),
            wall_time: if config.record_wall_time { outcome.wall_time_s } else { 0.0 },
            trace_file: name,
            certificate: outcome.report,
        })
    };
    let threads = opts.jobs.unwrap_or(1).max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let summaries: Vec<RunSummary> =
        pool.install(|| jobs.par_iter().map(run_one).collect::<Result<_, _>>())?;

    let summary = SummaryFile {
        p_star,
        runs: summaries.clone(),
    };
    let text = toml::to_string(&summary).map_err(|e| CliError::Runtime(e.to_string()))?;
    let summary_path = out_dir.join("summary.toml");
    fs::write(&summary_path, text).map_err(|e| CliError::output(&summary_path, e))?;
    Ok(summaries)
}

fn write_run_trace(
    path: &Path,
    outcome: &SolverOutcome,
    repetition: usize,
    seed: u64,
    p_star: Option<f64>,
    record_wall_time: bool,
) -> Result<(), CliError> {
    let mut meta = BTreeMap::new();
    meta.insert("algorithm".to_string(), outcome.algorithm.name().to_string());
    meta.insert("repetition".to_string(), repetition.to_string());
    meta.insert("seed".to_string(), seed.to_string());
    meta.insert("termination".to_string(), outcome.termination.name().to_string());
    if let Some(p) = p_star {
        meta.insert("p_star".to_string(), format!("{p:e}"));
    }
    let text = if record_wall_time {
        format_trace(&meta, &outcome.trace)
    } else {
        let zeroed: Vec<_> = outcome
            .trace
            .iter()
            .cloned()
            .map(|mut r| {
                r.wall_time_s = 0.0;
                r
            })
            .collect();
        format_trace(&meta, &zeroed)
    };
    fs::write(path, text).map_err(|e| CliError::output(path, e))
}
