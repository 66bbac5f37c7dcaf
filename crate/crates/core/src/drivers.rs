//! Outer loops: GRTR, LMNegCur and the MINIMAX-TR / GDA baselines, plus the
//! stationarity certificate.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, check_dim};
use crate::inner::{InnerConfig, InnerResult, accuracy_radius, ascend, schedule_n, schedule_n_accelerated};
use crate::linalg::{spd_solve, std_normal};
use crate::oracle::{DerivedConstants, MinimaxProblem, evaluate};
use crate::trsub::{TRProblem, min_eigpair, solve_tr_cg, solve_tr_exact};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Grtr,
    Lmnegcur,
    Gda,
    MinimaxTr,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Grtr,
        Algorithm::Lmnegcur,
        Algorithm::Gda,
        Algorithm::MinimaxTr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Grtr => "grtr",
            Algorithm::Lmnegcur => "lmnegcur",
            Algorithm::Gda => "gda",
            Algorithm::MinimaxTr => "minimax_tr",
        }
    }

    /// `(ξ, θ)` of the certificate `‖∇P‖ ≤ ξε`, `λ_min(∇²P) ≥ −θ√(L₂ε)`.
    ///
    /// The trust-region methods share `(97/96, 19/12)`; LMNegCur has
    /// `(37/36, 5/9)`. GDA has no certificate of its own and is judged by the
    /// trust-region constants.
    pub fn certificate_constants(self) -> (f64, f64) {
        match self {
            Algorithm::Lmnegcur => (37.0 / 36.0, 5.0 / 9.0),
            _ => (97.0 / 96.0, 19.0 / 12.0),
        }
    }

    /// Default inner accuracies `(ε₁, ε₂)` for target accuracy `epsilon`.
    pub fn default_accuracies(self, derived: &DerivedConstants, epsilon: f64) -> (f64, f64) {
        let sl2 = derived.l2.sqrt();
        match self {
            Algorithm::Lmnegcur => (
                (1.0f64 / 36.0).min(sl2 / (12.0 * derived.l1)) * epsilon.powf(1.5),
                sl2 / 18.0 * epsilon.sqrt(),
            ),
            _ => (
                (1.0f64 / 96.0).min(sl2 / (16.0 * derived.l1)) * epsilon.powf(1.5),
                sl2 / 12.0 * epsilon.sqrt(),
            ),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown algorithm '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubproblemMode {
    /// Eigendecomposition-based solve returning the multiplier `λ_t`.
    #[default]
    Exact,
    /// Steihaug CG with the given iteration cap.
    Cg(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusRule {
    /// `r·max{‖g_t‖^{1/2}, ε^{1/2}}`.
    #[default]
    GradientScaled,
    /// `r·ε^{1/2}` at every iteration.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InnerOptions {
    /// Ascent step; `None` means `2/(ℓ+μ)`.
    pub eta_y: Option<f64>,
    /// Hard cap on inner iterations per outer iteration.
    pub max_iters: usize,
    pub accelerated: bool,
    /// Divides the residual target `μA`.
    pub tighten: f64,
    /// Also cap each inner solve at the schedule `N_t`.
    pub schedule_cap: bool,
}

impl Default for InnerOptions {
    fn default() -> Self {
        Self {
            eta_y: None,
            max_iters: 100_000,
            accelerated: false,
            tighten: 1.0,
            schedule_cap: true,
        }
    }
}

/// Solver settings. Unset optional fields take the per-algorithm defaults of
/// [`ResolvedConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub max_outer_iters: Option<usize>,
    /// Regularization weight; default `√L₂/2`. Zero is allowed.
    pub sigma: Option<f64>,
    /// Radius scale; default `1/(4√L₂)`.
    pub r: Option<f64>,
    pub eps1: Option<f64>,
    pub eps2: Option<f64>,
    pub subproblem: SubproblemMode,
    pub radius_rule: RadiusRule,
    pub seed: u64,
    pub inner: InnerOptions,
    /// Boundary tolerance of the exact subproblem solve.
    pub tr_tol: f64,
    /// Relative residual tolerance of the CG subproblem solve.
    pub cg_tol: f64,
    /// Lower bound on `P`, used for the default outer-iteration budget.
    pub p_lower_bound: Option<f64>,
    pub time_limit_s: Option<f64>,
    pub gda_step_x: f64,
    pub gda_step_y: f64,
    /// GDA records every `trace_stride`-th iteration (and the last).
    pub trace_stride: usize,
    /// Keep every outer iterate in [`SolverOutcome::iterates`].
    pub record_iterates: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-2,
            max_outer_iters: None,
            sigma: None,
            r: None,
            eps1: None,
            eps2: None,
            subproblem: SubproblemMode::Exact,
            radius_rule: RadiusRule::GradientScaled,
            seed: 0,
            inner: InnerOptions::default(),
            tr_tol: 1e-12,
            cg_tol: 1e-10,
            p_lower_bound: None,
            time_limit_s: None,
            gda_step_x: 0.01,
            gda_step_y: 0.01,
            trace_stride: 1,
            record_iterates: false,
        }
    }
}

impl SolverConfig {
    pub fn with_epsilon(epsilon: f64) -> Self {
        Self {
            epsilon,
            ..Self::default()
        }
    }

    /// Fills in the algorithm defaults and validates.
    pub fn resolve(&self, algorithm: Algorithm, derived: &DerivedConstants) -> Result<ResolvedConfig> {
        let eps = self.epsilon;
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidAccuracy(eps));
        }
        let sl2 = derived.l2.sqrt();
        let (d1, d2) = algorithm.default_accuracies(derived, eps);
        let default_sigma = match algorithm {
            Algorithm::MinimaxTr => 0.0,
            _ => sl2 / 2.0,
        };
        let resolved = ResolvedConfig {
            epsilon: eps,
            sigma: self.sigma.unwrap_or(default_sigma),
            r: self.r.unwrap_or(1.0 / (4.0 * sl2)),
            eps1: self.eps1.unwrap_or(d1),
            eps2: self.eps2.unwrap_or(d2),
            l2: derived.l2,
        };
        if !(resolved.sigma >= 0.0 && resolved.sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!("sigma must be >= 0, got {}", resolved.sigma)));
        }
        if !(resolved.r > 0.0 && resolved.r.is_finite()) {
            return Err(Error::InvalidConfig(format!("r must be > 0, got {}", resolved.r)));
        }
        for v in [resolved.eps1, resolved.eps2] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidAccuracy(v));
            }
        }
        if self.max_outer_iters == Some(0) {
            return Err(Error::InvalidConfig("max_outer_iters must be >= 1".into()));
        }
        if !(self.tr_tol > 0.0) || !(self.cg_tol > 0.0) {
            return Err(Error::InvalidConfig("subproblem tolerances must be > 0".into()));
        }
        if let SubproblemMode::Cg(0) = self.subproblem {
            return Err(Error::InvalidConfig("cg needs at least one iteration".into()));
        }
        if !(self.inner.tighten >= 1.0) {
            return Err(Error::InvalidConfig("inner.tighten must be >= 1".into()));
        }
        if self.inner.max_iters == 0 {
            return Err(Error::InvalidConfig("inner.max_iters must be >= 1".into()));
        }
        if !(self.gda_step_x >= 0.0 && self.gda_step_y >= 0.0) {
            return Err(Error::InvalidConfig("GDA steps must be >= 0".into()));
        }
        if self.trace_stride == 0 {
            return Err(Error::InvalidConfig("trace_stride must be >= 1".into()));
        }
        if let Some(tl) = self.time_limit_s
            && !(tl > 0.0)
        {
            return Err(Error::InvalidConfig("time_limit_s must be > 0".into()));
        }
        Ok(resolved)
    }

    /// `⌈10·128·√L₂·(P(x₀) − P_lb)·ε^{−3/2}⌉` when a lower bound is known,
    /// otherwise 10⁵.
    pub fn outer_budget(&self, l2: f64, p0: f64) -> usize {
        if let Some(n) = self.max_outer_iters {
            return n;
        }
        match self.p_lower_bound {
            Some(lb) if p0.is_finite() => {
                let v = 10.0 * 128.0 * l2.sqrt() * (p0 - lb).max(0.0) * self.epsilon.powf(-1.5);
                if v >= 1e12 { 1_000_000_000_000 } else { (v.ceil() as usize).max(1) }
            }
            _ => 100_000,
        }
    }
}

/// Numeric parameters of one run after defaults are applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedConfig {
    pub epsilon: f64,
    pub sigma: f64,
    pub r: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub l2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepKind {
    TrustRegion,
    Lm,
    NegativeCurvature,
    Gradient,
    /// Terminal row: the stopping test passed and no step was taken.
    None,
}

impl StepKind {
    pub fn name(self) -> &'static str {
        match self {
            StepKind::TrustRegion => "trust_region",
            StepKind::Lm => "lm",
            StepKind::NegativeCurvature => "negative_curvature",
            StepKind::Gradient => "gradient",
            StepKind::None => "none",
        }
    }
}

impl fmt::Display for StepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            StepKind::TrustRegion,
            StepKind::Lm,
            StepKind::NegativeCurvature,
            StepKind::Gradient,
            StepKind::None,
        ]
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| Error::InvalidConfig(format!("unknown step kind '{s}'")))
    }
}

/// One outer iteration: the state at `x_t` and the step taken from it.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub t: usize,
    pub x_norm: f64,
    pub g_norm: f64,
    /// Subproblem multiplier (TR) or shift `√(L₂‖g‖)` (LM step).
    pub lambda: Option<f64>,
    pub lambda_min_h: Option<f64>,
    pub step_norm: f64,
    pub step_kind: StepKind,
    /// `f(x_t, y_t)`.
    pub p_estimate: f64,
    pub inner_iters: usize,
    /// Step halvings needed to stay in the problem domain.
    pub backtracks: usize,
    /// The iterate was projected back onto the domain.
    pub projected: bool,
    /// Seconds since the start of the run, at the end of this iteration.
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIters,
    TimeLimit,
}

impl Termination {
    pub fn name(self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::MaxIters => "max_iters",
            Termination::TimeLimit => "time_limit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    /// Upper bound on `‖∇P(x)‖`.
    pub grad_norm: f64,
    /// Lower bound on `λ_min(∇²P(x))`.
    pub min_eig: f64,
    /// `ξε`.
    pub xi_bound: f64,
    /// `θ√(L₂ε)`.
    pub theta_bound: f64,
    pub satisfied: bool,
    /// Added to `‖g‖` to get `grad_norm`.
    pub grad_slack: f64,
    /// Subtracted from `λ_min(H)` to get `min_eig`.
    pub eig_slack: f64,
    /// `‖∇ᵧf‖` of the certifying inner solve.
    pub inner_residual: f64,
}

#[derive(Debug, Clone)]
pub struct SolverOutcome {
    pub algorithm: Algorithm,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub trace: Vec<IterationRecord>,
    /// `x_0, x_1, …` when `record_iterates` is set.
    pub iterates: Vec<DVector<f64>>,
    pub report: StationarityReport,
    pub termination: Termination,
    pub inner_iters_total: usize,
    /// Inner solves stopped by their cap before the residual test passed.
    pub inner_truncations: usize,
    pub wall_time_s: f64,
}

impl SolverOutcome {
    pub fn iterations(&self) -> usize {
        self.trace.iter().filter(|r| r.step_kind != StepKind::None).count()
    }

    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}

/// Seeded `N(0, 1)` starting point for `y`.
pub fn seeded_y0(m: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_fn(m, |_, _| std_normal(&mut rng))
}

/// Residual tolerance `μ·min{ε/(100ℓ), √(L₂ε)/(100L_H)}` of [`certify`].
pub fn default_certify_tol<P: MinimaxProblem + ?Sized>(problem: &P, epsilon: f64) -> f64 {
    let c = problem.constants();
    let d = problem.derived_constants();
    c.mu * (epsilon / (100.0 * c.ell)).min((d.l2 * epsilon).sqrt() / (100.0 * d.l_h))
}

/// Certificate at `x` with a cold inner start `y = 0`.
pub fn certify<P: MinimaxProblem + ?Sized>(
    problem: &P,
    x: &DVector<f64>,
    epsilon: f64,
    inner_tol: f64,
    algorithm: Algorithm,
) -> Result<StationarityReport> {
    certify_from(problem, x, &DVector::zeros(problem.dim_y()), epsilon, inner_tol, algorithm)
}

/// Re-solves the inner problem to `‖∇ᵧf‖ ≤ inner_tol` from `y0` and bounds
/// `‖∇P(x)‖` and `λ_min(∇²P(x))` using `‖y − y*(x)‖ ≤ ‖∇ᵧf‖/μ`.
pub fn certify_from<P: MinimaxProblem + ?Sized>(
    problem: &P,
    x: &DVector<f64>,
    y0: &DVector<f64>,
    epsilon: f64,
    inner_tol: f64,
    algorithm: Algorithm,
) -> Result<StationarityReport> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidAccuracy(epsilon));
    }
    if !(inner_tol > 0.0 && inner_tol.is_finite()) {
        return Err(Error::InvalidAccuracy(inner_tol));
    }
    let c = problem.constants();
    let d = problem.derived_constants();
    let inner = solve_to_residual(problem, x, y0, inner_tol, None)?;
    let ev = evaluate(problem, x, &inner.y, 0.0, 0.0, inner.iters)?;
    let dist = inner.residual / c.mu;
    let grad_slack = c.ell * dist;
    let eig_slack = d.l_h * dist;
    let low = min_eigpair(&ev.h, &ev.g)?.value;
    let (xi, theta) = algorithm.certificate_constants();
    let grad_norm = ev.g.norm() + grad_slack;
    let min_eig = low - eig_slack;
    let xi_bound = xi * epsilon;
    let theta_bound = theta * (d.l2 * epsilon).sqrt();
    Ok(StationarityReport {
        grad_norm,
        min_eig,
        xi_bound,
        theta_bound,
        satisfied: grad_norm <= xi_bound && min_eig >= -theta_bound,
        grad_slack,
        eig_slack,
        inner_residual: inner.residual,
    })
}

/// Plain gradient ascent until `‖∇ᵧf(x, y)‖ ≤ residual_tol`.
fn solve_to_residual<P: MinimaxProblem + ?Sized>(
    problem: &P,
    x: &DVector<f64>,
    y0: &DVector<f64>,
    residual_tol: f64,
    cap: Option<usize>,
) -> Result<InnerResult> {
    let c = problem.constants();
    let d = problem.derived_constants();
    // Choose ε₁ so that μA equals the requested residual.
    let a = residual_tol / c.mu;
    let cfg = InnerConfig {
        eta_y: 2.0 / (c.ell + c.mu),
        target_eps1: a * c.ell,
        target_eps2: a * d.l_h,
        max_iters: cap.unwrap_or(10_000_000),
        accelerated: false,
    };
    ascend(problem, x, y0, &cfg)
}

/// `P(x)` through a high-accuracy inner solve: `f(x, y)` with
/// `‖∇ᵧf(x, y)‖ ≤ residual_tol`, warm-started at `y0`.
pub fn evaluate_envelope<P: MinimaxProblem + ?Sized>(
    problem: &P,
    x: &DVector<f64>,
    y0: &DVector<f64>,
    residual_tol: f64,
) -> Result<(f64, DVector<f64>)> {
    let inner = solve_to_residual(problem, x, y0, residual_tol, None)?;
    Ok((problem.value(x, &inner.y)?, inner.y))
}

/// Inner-loop bookkeeping shared by the second-order drivers.
struct InnerDriver {
    cfg: InnerConfig,
    kappa: f64,
    a: f64,
    schedule_cap: bool,
    cap: usize,
}

impl InnerDriver {
    fn new<P: MinimaxProblem + ?Sized>(problem: &P, opts: &InnerOptions, eps1: f64, eps2: f64) -> Result<Self> {
        let c = problem.constants();
        let d = problem.derived_constants();
        let mut cfg = InnerConfig::new(&c, eps1 / opts.tighten, eps2 / opts.tighten);
        if let Some(eta) = opts.eta_y {
            cfg.eta_y = eta;
        }
        cfg.accelerated = opts.accelerated;
        cfg.validate(&c)?;
        Ok(Self {
            a: accuracy_radius(&c, &d, cfg.target_eps1, cfg.target_eps2),
            kappa: c.kappa(),
            cfg,
            schedule_cap: opts.schedule_cap,
            cap: opts.max_iters,
        })
    }

    fn solve<P: MinimaxProblem + ?Sized>(
        &self,
        problem: &P,
        x: &DVector<f64>,
        y: &DVector<f64>,
        t: usize,
        s_prev_norm: f64,
    ) -> Result<InnerResult> {
        let mut cfg = self.cfg;
        cfg.max_iters = self.cap;
        if self.schedule_cap {
            // For t = 1 the distance to y*(x₀) is bounded by ‖∇ᵧf(x₀, y₀)‖/μ.
            let d0 = if t <= 1 {
                problem.grad_y(x, y)?.norm() / problem.constants().mu
            } else {
                0.0
            };
            let n_t = if cfg.accelerated {
                schedule_n_accelerated(t, self.kappa, self.a, s_prev_norm, d0)?
            } else {
                schedule_n(t, self.kappa, self.a, s_prev_norm, d0)?
            };
            cfg.max_iters = cfg.max_iters.min(n_t);
        }
        ascend(problem, x, y, &cfg)
    }
}

/// Takes `x + s`, halving `s` up to 30 times while the point leaves the
/// domain, then projecting as a last resort.
fn apply_step<P: MinimaxProblem + ?Sized>(
    problem: &P,
    x: &DVector<f64>,
    s: &DVector<f64>,
) -> Result<(DVector<f64>, f64, usize, bool)> {
    let mut scale = 1.0;
    let mut backtracks = 0;
    loop {
        let cand = x + s * scale;
        if cand.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteIterate("outer iterate"));
        }
        if problem.contains(&cand) {
            return Ok((cand, s.norm() * scale, backtracks, false));
        }
        if backtracks == 30 {
            let mut cand = cand;
            problem.project(&mut cand);
            let taken = (&cand - x).norm();
            return Ok((cand, taken, backtracks, true));
        }
        scale *= 0.5;
        backtracks += 1;
    }
}

fn prepare_start<P: MinimaxProblem + ?Sized>(
    problem: &P,
    x0: &DVector<f64>,
    y0: &DVector<f64>,
) -> Result<(DVector<f64>, bool)> {
    check_dim("x0", problem.dim_x(), x0.len())?;
    check_dim("y0", problem.dim_y(), y0.len())?;
    if x0.iter().chain(y0.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteIterate("starting point"));
    }
    let mut x = x0.clone();
    let projected = !problem.contains(&x) && problem.project(&mut x);
    if !problem.contains(&x) {
        return Err(Error::OutsideDomain);
    }
    Ok((x, projected))
}

/// Per-iteration decision of a second-order driver.
struct Decision {
    step: Option<DVector<f64>>,
    kind: StepKind,
    lambda: Option<f64>,
    lambda_min_h: Option<f64>,
}

/// Shared outer loop: inner solve, oracle, `decide`, step, record.
fn second_order_loop<P, F>(
    problem: &P,
    x0: &DVector<f64>,
    y0: &DVector<f64>,
    cfg: &SolverConfig,
    algorithm: Algorithm,
    mut decide: F,
) -> Result<SolverOutcome>
where
    P: MinimaxProblem + ?Sized,
    F: FnMut(&crate::oracle::OracleEval, &ResolvedConfig) -> Result<Decision>,
{
    let start = Instant::now();
    let derived = problem.derived_constants();
    let rc = cfg.resolve(algorithm, &derived)?;
    let inner = InnerDriver::new(problem, &cfg.inner, rc.eps1, rc.eps2)?;
    let (mut x, mut projected) = prepare_start(problem, x0, y0)?;
    let mut y = y0.clone();

    let mut trace = Vec::new();
    let mut iterates = Vec::new();
    if cfg.record_iterates {
        iterates.push(x.clone());
    }
    let mut inner_total = 0;
    let mut truncations = 0;
    let mut s_prev_norm = 0.0;
    let mut budget = None;
    let mut termination = Termination::MaxIters;
    let mut t = 1;
    loop {
        let res = inner.solve(problem, &x, &y, t, s_prev_norm)?;
        inner_total += res.iters;
        truncations += res.truncated as usize;
        y = res.y;
        let ev = evaluate(problem, &x, &y, rc.eps1, rc.eps2, res.iters)?;
        let p_estimate = problem.value(&x, &y)?;
        let budget = *budget.get_or_insert_with(|| cfg.outer_budget(rc.l2, p_estimate));
        let d = decide(&ev, &rc)?;

        let mut record = IterationRecord {
            t,
            x_norm: x.norm(),
            g_norm: ev.g.norm(),
            lambda: d.lambda,
            lambda_min_h: d.lambda_min_h,
            step_norm: 0.0,
            step_kind: d.kind,
            p_estimate,
            inner_iters: res.iters,
            backtracks: 0,
            projected,
            wall_time_s: 0.0,
        };
        projected = false;
        let Some(s) = d.step else {
            record.wall_time_s = start.elapsed().as_secs_f64();
            trace.push(record);
            termination = Termination::Converged;
            break;
        };
        let (x_next, taken, backtracks, proj) = apply_step(problem, &x, &s)?;
        record.step_norm = taken;
        record.backtracks = backtracks;
        record.projected = proj;
        x = x_next;
        s_prev_norm = taken;
        if cfg.record_iterates {
            iterates.push(x.clone());
        }
        let elapsed = start.elapsed().as_secs_f64();
        record.wall_time_s = elapsed;
        trace.push(record);
        if t >= budget {
            break;
        }
        if cfg.time_limit_s.is_some_and(|tl| elapsed >= tl) {
            termination = Termination::TimeLimit;
            break;
        }
        t += 1;
    }

    let report = certify_from(
        problem,
        &x,
        &y,
        rc.epsilon,
        default_certify_tol(problem, rc.epsilon),
        algorithm,
    )?;
    Ok(SolverOutcome {
        algorithm,
        x,
        y,
        trace,
        iterates,
        report,
        termination,
        inner_iters_total: inner_total,
        inner_truncations: truncations,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

fn trust_region_run<P: MinimaxProblem + ?Sized>(
    problem: &P,
    x0: &DVector<f64>,
    y0: &DVector<f64>,
    cfg: &SolverConfig,
    algorithm: Algorithm,
    fixed_radius: bool,
) -> Result<SolverOutcome> {
    let mode = cfg.subproblem;
    let (tr_tol, cg_tol) = (cfg.tr_tol, cfg.cg_tol);
    second_order_loop(problem, x0, y0, cfg, algorithm, |ev, rc| {
        let gn = ev.g.norm();
        let reg = rc.sigma * gn.sqrt();
        let radius = if fixed_radius {
            rc.r * rc.epsilon.sqrt()
        } else {
            rc.r * gn.sqrt().max(rc.epsilon.sqrt())
        };
        let sub = TRProblem::new(ev.h.clone(), ev.g.clone(), reg, radius)?;
        let threshold = (rc.l2 * rc.epsilon).sqrt();
        match mode {
            SubproblemMode::Exact => {
                let sol = solve_tr_exact(&sub, tr_tol)?;
                let lambda_min_h = sol.model_min_eig.map(|w| w - reg);
                let stop = gn <= rc.epsilon && sol.lambda <= threshold;
                Ok(Decision {
                    step: (!stop).then_some(sol.s),
                    kind: if stop { StepKind::None } else { StepKind::TrustRegion },
                    lambda: Some(sol.lambda),
                    lambda_min_h,
                })
            }
            SubproblemMode::Cg(k) => {
                let mut lambda_min_h = None;
                if gn <= rc.epsilon {
                    let low = min_eigpair(&ev.h, &ev.g)?.value;
                    lambda_min_h = Some(low);
                    if low >= -0.5 * threshold {
                        return Ok(Decision {
                            step: None,
                            kind: StepKind::None,
                            lambda: None,
                            lambda_min_h,
                        });
                    }
                }
                let sol = solve_tr_cg(&sub, k, cg_tol)?;
                Ok(Decision {
                    step: Some(sol.s),
                    kind: StepKind::TrustRegion,
                    lambda: None,
                    lambda_min_h,
                })
            }
        }
    })
}

/// GRTR: trust-region steps with regularization `σ‖g_t‖^{1/2}` and radius
/// `r·max{‖g_t‖^{1/2}, ε^{1/2}}`; stops once `‖g_t‖ ≤ ε` and `λ_t ≤ √(L₂ε)`.
///
/// `cfg.radius_rule = Fixed` with `sigma = 0` reproduces [`run_minimax_tr`].
pub fn run_grtr<P: MinimaxProblem + ?Sized>(
    problem: &P,
    x0: &DVector<f64>,
    y0: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<SolverOutcome> {
    let fixed = cfg.radius_rule == RadiusRule::Fixed;
    trust_region_run(problem, x0, y0, cfg, Algorithm::Grtr, fixed)
}

/// MINIMAX-TR: unregularized trust region with the fixed radius `r√ε`.
pub fn run_minimax_tr<P: MinimaxProblem + ?Sized>(
    problem: &P,
    x0: &DVector<f64>,
    y0: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<SolverOutcome> {
    let mut cfg = cfg.clone();
    cfg.sigma = Some(0.0);
    trust_region_run(problem, x0, y0, &cfg, Algorithm::MinimaxTr, true)
}

/// The LMNegCur step rule for one oracle output, or `None` for "stop".
///
/// Returns the step, its kind and the LM shift when one was used.
pub fn lmnegcur_step(
    g: &DVector<f64>,
    h: &DMatrix<f64>,
    epsilon: f64,
    l2: f64,
) -> Result<(Option<DVector<f64>>, StepKind, Option<f64>, f64)> {
    let gn = g.norm();
    let big = gn.max(epsilon);
    let eig = min_eigpair(h, g)?;
    if eig.value <= -0.5 * (l2 * big).sqrt() {
        return Ok((
            Some(eig.vector * (big / l2).sqrt()),
            StepKind::NegativeCurvature,
            None,
            eig.value,
        ));
    }
    if gn >= epsilon {
        let shift = (l2 * gn).sqrt();
        let n = g.len();
        let m = h + DMatrix::identity(n, n) * shift;
        let s = spd_solve(&m, &(-g)).ok_or(Error::SingularLMSystem)?;
        return Ok((Some(s), StepKind::Lm, Some(shift), eig.value));
    }
    Ok((None, StepKind::None, None, eig.value))
}

/// LMNegCur: negative-curvature steps when `λ_min(H_t) ≤ −½√(L₂·max{‖g_t‖, ε})`,
/// LM steps `−(H_t + √(L₂‖g_t‖)I)⁻¹g_t` while `‖g_t‖ ≥ ε`, otherwise stop.
pub fn run_lmnegcur<P: MinimaxProblem + ?Sized>(
    problem: &P,
    x0: &DVector<f64>,
    y0: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<SolverOutcome> {
    second_order_loop(problem, x0, y0, cfg, Algorithm::Lmnegcur, |ev, rc| {
        let (step, kind, lambda, low) = lmnegcur_step(&ev.g, &ev.h, rc.epsilon, rc.l2)?;
        Ok(Decision {
            step,
            kind,
            lambda,
            lambda_min_h: Some(low),
        })
    })
}

/// GDA with explicit steps and iteration count; see [`run_gda_with`].
pub fn run_gda<P: MinimaxProblem + ?Sized>(
    problem: &P,
    x0: &DVector<f64>,
    y0: &DVector<f64>,
    step_x: f64,
    step_y: f64,
    max_iters: usize,
) -> Result<SolverOutcome> {
    let cfg = SolverConfig {
        gda_step_x: step_x,
        gda_step_y: step_y,
        max_outer_iters: Some(max_iters),
        ..SolverConfig::default()
    };
    run_gda_with(problem, x0, y0, &cfg)
}

/// Simultaneous `x ← x − η_x∇ₓf`, `y ← y + η_y∇ᵧf` for `max_outer_iters`
/// iterations or until the time limit.
pub fn run_gda_with<P: MinimaxProblem + ?Sized>(
    problem: &P,
    x0: &DVector<f64>,
    y0: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<SolverOutcome> {
    let start = Instant::now();
    let derived = problem.derived_constants();
    let rc = cfg.resolve(Algorithm::Gda, &derived)?;
    let (mut x, mut projected) = prepare_start(problem, x0, y0)?;
    let mut y = y0.clone();
    let (sx, sy) = (cfg.gda_step_x, cfg.gda_step_y);
    let mut trace = Vec::new();
    let mut iterates = Vec::new();
    if cfg.record_iterates {
        iterates.push(x.clone());
    }
    let mut budget = None;
    let mut termination = Termination::MaxIters;
    let mut t = 1;
    loop {
        let gx = problem.grad_x(&x, &y)?;
        let gy = problem.grad_y(&x, &y)?;
        if gx.iter().chain(gy.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteIterate("GDA gradient"));
        }
        let p_estimate = problem.value(&x, &y)?;
        let budget = *budget.get_or_insert_with(|| cfg.outer_budget(rc.l2, p_estimate));
        let (x_next, taken, backtracks, proj) = apply_step(problem, &x, &(&gx * -sx))?;
        let record = IterationRecord {
            t,
            x_norm: x.norm(),
            g_norm: gx.norm(),
            lambda: None,
            lambda_min_h: None,
            step_norm: taken,
            step_kind: StepKind::Gradient,
            p_estimate,
            inner_iters: 1,
            backtracks,
            projected: projected || proj,
            wall_time_s: 0.0,
        };
        projected = false;
        x = x_next;
        y.axpy(sy, &gy, 1.0);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteIterate("GDA y iterate"));
        }
        if cfg.record_iterates {
            iterates.push(x.clone());
        }
        let elapsed = start.elapsed().as_secs_f64();
        let timed_out = cfg.time_limit_s.is_some_and(|tl| elapsed >= tl);
        let last = t >= budget || timed_out;
        if t % cfg.trace_stride == 0 || t == 1 || last {
            trace.push(IterationRecord {
                wall_time_s: elapsed,
                ..record
            });
        }
        if last {
            if timed_out && t < budget {
                termination = Termination::TimeLimit;
            }
            break;
        }
        t += 1;
    }
    let report = certify_from(
        problem,
        &x,
        &y,
        rc.epsilon,
        default_certify_tol(problem, rc.epsilon),
        Algorithm::Gda,
    )?;
    Ok(SolverOutcome {
        algorithm: Algorithm::Gda,
        x,
        y,
        trace,
        iterates,
        report,
        termination,
        inner_iters_total: t,
        inner_truncations: 0,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Dispatches on `algorithm`.
pub fn run_algorithm<P: MinimaxProblem + ?Sized>(
    algorithm: Algorithm,
    problem: &P,
    x0: &DVector<f64>,
    y0: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<SolverOutcome> {
    match algorithm {
        Algorithm::Grtr => run_grtr(problem, x0, y0, cfg),
        Algorithm::Lmnegcur => run_lmnegcur(problem, x0, y0, cfg),
        Algorithm::MinimaxTr => run_minimax_tr(problem, x0, y0, cfg),
        Algorithm::Gda => run_gda_with(problem, x0, y0, cfg),
    }
}
