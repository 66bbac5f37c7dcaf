//! Inner maximization `max_y f(x, y)` by gradient ascent.

use nalgebra::DVector;

use crate::error::{Error, Result, check_dim};
use crate::oracle::{DerivedConstants, MinimaxProblem, ProblemConstants};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerConfig {
    /// Ascent step; at most `2/(ℓ+μ)`.
    pub eta_y: f64,
    /// Target accuracy `ε₁` of the gradient surrogate.
    pub target_eps1: f64,
    /// Target accuracy `ε₂` of the reduced-Hessian surrogate.
    pub target_eps2: f64,
    pub max_iters: usize,
    /// Nesterov momentum `(√κ−1)/(√κ+1)` with step `min(η_y, 1/ℓ)`.
    pub accelerated: bool,
}

impl InnerConfig {
    /// Default step `2/(ℓ+μ)` and a cap of 10⁴ iterations.
    pub fn new(constants: &ProblemConstants, eps1: f64, eps2: f64) -> Self {
        Self {
            eta_y: 2.0 / (constants.ell + constants.mu),
            target_eps1: eps1,
            target_eps2: eps2,
            max_iters: 10_000,
            accelerated: false,
        }
    }

    pub fn validate(&self, constants: &ProblemConstants) -> Result<()> {
        let max_eta = 2.0 / (constants.ell + constants.mu);
        if !(self.eta_y > 0.0 && self.eta_y <= max_eta * (1.0 + 1e-12)) {
            return Err(Error::InvalidConfig(format!(
                "eta_y = {} outside (0, 2/(ell+mu) = {max_eta}]",
                self.eta_y
            )));
        }
        for v in [self.target_eps1, self.target_eps2] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidAccuracy(v));
            }
        }
        Ok(())
    }

    /// `A = min{ε₁/ℓ, ε₂/L_H}`, the distance to `y*(x)` that guarantees both
    /// target accuracies.
    pub fn accuracy_radius(&self, constants: &ProblemConstants, derived: &DerivedConstants) -> f64 {
        accuracy_radius(constants, derived, self.target_eps1, self.target_eps2)
    }
}

/// `A = min{ε₁/ℓ, ε₂/L_H}`.
pub fn accuracy_radius(
    constants: &ProblemConstants,
    derived: &DerivedConstants,
    eps1: f64,
    eps2: f64,
) -> f64 {
    (eps1 / constants.ell).min(eps2 / derived.l_h)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerResult {
    pub y: DVector<f64>,
    pub iters: usize,
    /// `‖∇ᵧf(x, y)‖` at the returned point.
    pub residual: f64,
    /// The cap was hit before the residual test `‖∇ᵧf‖ ≤ μA` passed.
    pub truncated: bool,
}

/// Runs `y ← y + η∇ᵧf(x, y)` from `y0` until `‖∇ᵧf(x, y)‖ ≤ μA`, or for
/// `cfg.max_iters` steps.
///
/// By strong concavity the residual test certifies `‖y − y*(x)‖ ≤ A`, hence
/// `‖∇P(x) − ∇ₓf(x, y)‖ ≤ ε₁` and `‖∇²P(x) − H(x, y)‖ ≤ ε₂`.
pub fn ascend<P: MinimaxProblem + ?Sized>(
    problem: &P,
    x: &DVector<f64>,
    y0: &DVector<f64>,
    cfg: &InnerConfig,
) -> Result<InnerResult> {
    let constants = problem.constants();
    cfg.validate(&constants)?;
    check_dim("x", problem.dim_x(), x.len())?;
    check_dim("y0", problem.dim_y(), y0.len())?;
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteIterate("initial y"));
    }
    let tol = constants.mu * cfg.accuracy_radius(&constants, &problem.derived_constants());

    let grad = |y: &DVector<f64>| -> Result<DVector<f64>> {
        let g = problem.grad_y(x, y)?;
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteIterate("grad_y"));
        }
        Ok(g)
    };

    let mut y = y0.clone();
    let mut g = grad(&y)?;
    let mut residual = g.norm();
    let mut iters = 0;

    if cfg.accelerated {
        let sk = constants.kappa().sqrt();
        let momentum = (sk - 1.0) / (sk + 1.0);
        let eta = cfg.eta_y.min(1.0 / constants.ell);
        let mut y_prev = y.clone();
        while residual > tol && iters < cfg.max_iters {
            let v = &y + (&y - &y_prev) * momentum;
            let gv = grad(&v)?;
            y_prev = std::mem::replace(&mut y, v + gv * eta);
            g = grad(&y)?;
            residual = g.norm();
            iters += 1;
        }
    } else {
        while residual > tol && iters < cfg.max_iters {
            y.axpy(cfg.eta_y, &g, 1.0);
            g = grad(&y)?;
            residual = g.norm();
            iters += 1;
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteIterate("inner iterate"));
    }

    Ok(InnerResult {
        y,
        iters,
        residual,
        truncated: residual > tol,
    })
}

/// Iteration budget `N_t` of plain ascent with step `2/(ℓ+μ)`.
///
/// `t = 1`: `max(1, ⌈κ·ln(d₀/A)⌉)` with `d₀` a bound on `‖y₀ − y*(x₀)‖`.
/// `t ≥ 2`: `max(1, ⌈κ·ln((A + κ‖s_{t−1}‖)/A)⌉)`.
pub fn schedule_n(t: usize, kappa: f64, a: f64, s_prev_norm: f64, y0_dist: f64) -> Result<usize> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::InvalidAccuracy(a));
    }
    if !(kappa >= 1.0) {
        return Err(Error::InvalidConfig(format!("kappa must be >= 1, got {kappa}")));
    }
    let ratio = if t <= 1 {
        y0_dist / a
    } else {
        (a + kappa * s_prev_norm) / a
    };
    Ok(ceil_clamped(kappa * ratio.ln()))
}

/// Budget of the accelerated variant, `⌈2√κ·ln(√(κ+1)·d/A)⌉` with
/// `d = d₀` for `t = 1` and `d = A + κ‖s_{t−1}‖` afterwards.
pub fn schedule_n_accelerated(
    t: usize,
    kappa: f64,
    a: f64,
    s_prev_norm: f64,
    y0_dist: f64,
) -> Result<usize> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::InvalidAccuracy(a));
    }
    if !(kappa >= 1.0) {
        return Err(Error::InvalidConfig(format!("kappa must be >= 1, got {kappa}")));
    }
    let d = if t <= 1 { y0_dist } else { a + kappa * s_prev_norm };
    Ok(ceil_clamped(2.0 * kappa.sqrt() * ((kappa + 1.0).sqrt() * d / a).ln()))
}

fn ceil_clamped(v: f64) -> usize {
    if v.is_nan() || v <= 1.0 {
        1
    } else if v >= usize::MAX as f64 {
        usize::MAX
    } else {
        v.ceil() as usize
    }
}
