//! Trust-region subproblem
//! `min_s gᵀs + ½sᵀ(H + reg·I)s  s.t. ‖s‖ ≤ radius`
//! and smallest eigenpairs for negative-curvature steps.
//!
//! The exact solver diagonalizes `H + reg·I` and finds the multiplier `λ` of
//! the boundary solution from the secular equation `1/‖s(λ)‖ = 1/radius`,
//! which is concave and increasing in `λ`, with a bracketed Newton iteration.
//! The hard case (gradient orthogonal to the bottom eigenspace) is completed
//! with a bottom-eigenvector component.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result, check_dim};
use crate::linalg::{lanczos_smallest, sorted_eigen, symmetrize};

/// Above this dimension [`min_eigpair`] switches from dense QR to Lanczos.
pub const DENSE_EIGEN_MAX_DIM: usize = 512;

/// Relative threshold `|v_minᵀg| ≤ HARD_CASE_TOL·‖g‖` for the hard case.
pub const HARD_CASE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TRProblem {
    pub h: DMatrix<f64>,
    pub g: DVector<f64>,
    /// Diagonal regularization added to `h`.
    pub reg: f64,
    pub radius: f64,
}

impl TRProblem {
    pub fn new(h: DMatrix<f64>, g: DVector<f64>, reg: f64, radius: f64) -> Result<Self> {
        let p = Self { h, g, reg, radius };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.g.len();
        check_dim("H rows", n, self.h.nrows())?;
        check_dim("H cols", n, self.h.ncols())?;
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "trust-region radius must be positive, got {}",
                self.radius
            )));
        }
        if !(self.reg >= 0.0 && self.reg.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "regularization must be nonnegative, got {}",
                self.reg
            )));
        }
        if self.g.iter().chain(self.h.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteIterate("trust-region data"));
        }
        Ok(())
    }

    /// `H + reg·I`, symmetrized.
    pub fn model_matrix(&self) -> DMatrix<f64> {
        let n = self.g.len();
        symmetrize(&self.h) + DMatrix::identity(n, n) * self.reg
    }

    /// Model value `gᵀs + ½sᵀ(H + reg·I)s`.
    pub fn model(&self, s: &DVector<f64>) -> f64 {
        self.g.dot(s) + 0.5 * (s.dot(&(&self.h * s)) + self.reg * s.norm_squared())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TRSolution {
    pub s: DVector<f64>,
    /// Dual multiplier of the ball constraint; 0 for the CG solver.
    pub lambda: f64,
    /// `‖(H + reg·I + λI)s + g‖`.
    pub kkt_residual: f64,
    pub on_boundary: bool,
    pub hard_case: bool,
    /// `λ_min(H + reg·I)` when the solver computed it.
    pub model_min_eig: Option<f64>,
}

/// Violations of the four optimality conditions at `(s, λ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    /// `max(0, ‖s‖ − radius) / radius`.
    pub feasibility: f64,
    /// `|λ(radius − ‖s‖)| / radius`.
    pub complementarity: f64,
    /// `‖(H + reg·I + λI)s + g‖ / (1 + ‖g‖)`.
    pub stationarity: f64,
    /// `max(0, −λ_min(H + reg·I + λI)) / (1 + ‖H‖)`.
    pub curvature: f64,
    pub dual_feasible: bool,
}

impl KktReport {
    pub fn max_violation(&self) -> f64 {
        self.feasibility
            .max(self.complementarity)
            .max(self.stationarity)
            .max(self.curvature)
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.dual_feasible && self.max_violation() <= tol
    }
}

/// Evaluates the optimality conditions of `p` at `(s, λ)`.
pub fn check_kkt(p: &TRProblem, s: &DVector<f64>, lambda: f64) -> Result<KktReport> {
    let n = p.g.len();
    let sn = s.norm();
    let shifted = p.model_matrix() + DMatrix::identity(n, n) * lambda;
    let stat = (&shifted * s + &p.g).norm();
    let low = if n == 0 { 0.0 } else { sorted_eigen(&shifted)?.values[0] };
    Ok(KktReport {
        feasibility: (sn - p.radius).max(0.0) / p.radius,
        complementarity: (lambda * (p.radius - sn)).abs() / p.radius,
        stationarity: stat / (1.0 + p.g.norm()),
        curvature: (-low).max(0.0) / (1.0 + p.h.norm()),
        dual_feasible: lambda >= 0.0,
    })
}

/// Global solution of the subproblem with its multiplier.
///
/// `tol` bounds the relative boundary mismatch `|‖s‖ − radius|/radius` of
/// the secular iteration; the returned pair satisfies the optimality
/// conditions to roughly that accuracy.
pub fn solve_tr_exact(p: &TRProblem, tol: f64) -> Result<TRSolution> {
    p.validate()?;
    if !(tol > 0.0) {
        return Err(Error::InvalidAccuracy(tol));
    }
    let n = p.g.len();
    let radius = p.radius;
    if n == 0 {
        return Ok(TRSolution {
            s: DVector::zeros(0),
            lambda: 0.0,
            kkt_residual: 0.0,
            on_boundary: false,
            hard_case: false,
            model_min_eig: None,
        });
    }
    let m = p.model_matrix();
    let eig = sorted_eigen(&m)?;
    let w = &eig.values;
    let v = &eig.vectors;
    let b = v.tr_mul(&p.g);
    let gnorm = p.g.norm();
    let w_min = w[0];
    let scale = 1.0 + w.amax();

    let finish = |s: DVector<f64>, lambda: f64, on_boundary: bool, hard_case: bool| {
        let kkt_residual = (&m * &s + &s * lambda + &p.g).norm();
        TRSolution {
            s,
            lambda,
            kkt_residual,
            on_boundary,
            hard_case,
            model_min_eig: Some(w_min),
        }
    };

    // Multiplier floor and shifted eigenvalues d_i = w_i + λ_lo ≥ 0.
    let lam_lo = (-w_min).max(0.0);
    let d: Vec<f64> = w.iter().map(|&wi| (wi - w_min).max(0.0) + (w_min + lam_lo)).collect();
    let bottom: Vec<usize> = (0..n)
        .filter(|&i| w[i] - w_min <= 1e-12 * scale)
        .collect();
    let bottom_proj = bottom.iter().map(|&i| b[i] * b[i]).sum::<f64>().sqrt();

    let combine = |coef: &dyn Fn(usize) -> f64| -> DVector<f64> {
        let mut s = DVector::zeros(n);
        for i in 0..n {
            let c = coef(i);
            if c != 0.0 {
                s.axpy(c, &v.column(i), 1.0);
            }
        }
        s
    };

    // Interior Newton step.
    if w_min > 0.0 {
        let s0 = combine(&|i| -b[i] / w[i]);
        if s0.norm() <= radius {
            return Ok(finish(s0, 0.0, false, false));
        }
    }

    // Hard case: g has no component along the bottom eigenspace.
    if bottom_proj <= HARD_CASE_TOL * gnorm || gnorm == 0.0 {
        let s_rest = combine(&|i| {
            if bottom.contains(&i) || d[i] == 0.0 {
                0.0
            } else {
                -b[i] / d[i]
            }
        });
        let rest_norm = s_rest.norm();
        if rest_norm <= radius {
            if lam_lo == 0.0 {
                return Ok(finish(s_rest, 0.0, false, false));
            }
            let tau = (radius * radius - rest_norm * rest_norm).max(0.0).sqrt();
            let mut u = v.column(0).into_owned();
            if p.g.dot(&u) > 0.0 {
                u = -u;
            }
            let s = s_rest + u * tau;
            return Ok(finish(s, lam_lo, true, true));
        }
    }

    // Boundary solution: find δ > 0 with ‖s(λ_lo + δ)‖ = radius.
    let norm_at = |delta: f64| -> (f64, f64) {
        let mut sq = 0.0;
        let mut cube = 0.0;
        for i in 0..n {
            let den = d[i] + delta;
            if b[i] == 0.0 {
                continue;
            }
            let q = b[i] / den;
            sq += q * q;
            cube += q * q / den;
        }
        (sq.sqrt(), cube)
    };
    let mut lo = 0.0;
    let mut hi = gnorm / radius + 1e-300;
    // `hi` satisfies ‖s‖ ≤ radius because d_i + δ ≥ δ.
    let mut delta = hi;
    let mut converged = false;
    for _ in 0..500 {
        let (sn, cube) = norm_at(delta);
        let mismatch = (sn - radius) / radius;
        if mismatch.abs() <= tol.min(1e-14).max(f64::EPSILON) {
            converged = true;
            break;
        }
        if sn > radius {
            lo = delta;
        } else {
            hi = delta;
        }
        // Newton on φ(δ) = 1/‖s‖ − 1/radius, φ' = Σ q²/den / ‖s‖³.
        let phi = 1.0 / sn - 1.0 / radius;
        let dphi = cube / (sn * sn * sn);
        let mut next = delta - phi / dphi;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = if lo == 0.0 { 0.5 * hi.min(delta) } else { 0.5 * (lo + hi) };
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            converged = true;
            break;
        }
        delta = next;
    }
    if !converged {
        let (sn, _) = norm_at(delta);
        if ((sn - radius) / radius).abs() > tol {
            return Err(Error::NumericalBreakdown(format!(
                "secular iteration stalled at lambda = {}, |s| = {sn}, radius = {radius}",
                lam_lo + delta
            )));
        }
    }
    let s = combine(&|i| if b[i] == 0.0 { 0.0 } else { -b[i] / (d[i] + delta) });
    Ok(finish(s, lam_lo + delta, true, false))
}

/// Cauchy point: model minimizer along `−g` within the ball.
pub fn cauchy_point(p: &TRProblem) -> DVector<f64> {
    let gn = p.g.norm();
    if gn == 0.0 {
        return DVector::zeros(p.g.len());
    }
    let curv = p.g.dot(&(&p.h * &p.g)) + p.reg * gn * gn;
    let t = if curv <= 0.0 {
        1.0
    } else {
        (gn * gn * gn / (p.radius * curv)).min(1.0)
    };
    -&p.g * (t * p.radius / gn)
}

/// Steihaug–Toint truncated conjugate gradients on `H + reg·I`.
///
/// Stops at an interior point once `‖r‖ ≤ tol·‖g‖`, or at the boundary on
/// negative curvature or when an iterate would leave the ball.
pub fn solve_tr_cg(p: &TRProblem, max_iters: usize, tol: f64) -> Result<TRSolution> {
    p.validate()?;
    if max_iters == 0 {
        return Err(Error::InvalidConfig("CG needs at least one iteration".into()));
    }
    let n = p.g.len();
    let m = p.model_matrix();
    let mut s = DVector::zeros(n);
    let mut r = p.g.clone();
    let gnorm = r.norm();
    let mut on_boundary = false;
    if gnorm > 0.0 {
        let mut d = -&r;
        let mut rr = r.norm_squared();
        for _ in 0..max_iters {
            let md = &m * &d;
            let curv = d.dot(&md);
            if curv <= 0.0 {
                s += &d * boundary_step(&s, &d, p.radius);
                on_boundary = true;
                break;
            }
            let alpha = rr / curv;
            let s_next = &s + &d * alpha;
            if s_next.norm() >= p.radius {
                s += &d * boundary_step(&s, &d, p.radius);
                on_boundary = true;
                break;
            }
            s = s_next;
            r.axpy(alpha, &md, 1.0);
            let rr_next = r.norm_squared();
            if rr_next.sqrt() <= tol * gnorm {
                break;
            }
            d = -&r + d * (rr_next / rr);
            rr = rr_next;
        }
    }
    let kkt_residual = (&m * &s + &p.g).norm();
    Ok(TRSolution {
        s,
        lambda: 0.0,
        kkt_residual,
        on_boundary,
        hard_case: false,
        model_min_eig: None,
    })
}

/// Positive root `τ` of `‖s + τd‖ = radius` for `‖s‖ ≤ radius`.
fn boundary_step(s: &DVector<f64>, d: &DVector<f64>, radius: f64) -> f64 {
    let a = d.norm_squared();
    let b = 2.0 * s.dot(d);
    let c = s.norm_squared() - radius * radius;
    let disc = (b * b - 4.0 * a * c).max(0.0).sqrt();
    // Stable form of (−b + disc)/(2a); c ≤ 0 so the root is nonnegative.
    if b >= 0.0 {
        (-2.0 * c) / (b + disc)
    } else {
        (-b + disc) / (2.0 * a)
    }
}

/// Smallest eigenvalue with a unit eigenvector.
#[derive(Debug, Clone, PartialEq)]
pub struct EigPair {
    pub value: f64,
    pub vector: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EigenMethod {
    /// Dense for `n ≤ DENSE_EIGEN_MAX_DIM`, Lanczos above.
    #[default]
    Auto,
    Dense,
    Lanczos,
}

/// `(λ_min(H), u)` with `u` oriented so that `orient_against·u ≤ 0`; ties keep
/// the sign returned by the eigensolver.
pub fn min_eigpair(h: &DMatrix<f64>, orient_against: &DVector<f64>) -> Result<EigPair> {
    min_eigpair_with(h, orient_against, EigenMethod::Auto)
}

pub fn min_eigpair_with(
    h: &DMatrix<f64>,
    orient_against: &DVector<f64>,
    method: EigenMethod,
) -> Result<EigPair> {
    let n = h.nrows();
    check_dim("H cols", n, h.ncols())?;
    check_dim("orientation vector", n, orient_against.len())?;
    if n == 0 {
        return Err(Error::ConvergenceFailure("empty matrix".into()));
    }
    let hs = symmetrize(h);
    let dense = match method {
        EigenMethod::Auto => n <= DENSE_EIGEN_MAX_DIM,
        EigenMethod::Dense => true,
        EigenMethod::Lanczos => false,
    };
    let (value, mut vector) = if dense {
        let e = sorted_eigen(&hs)?;
        (e.values[0], e.vectors.column(0).into_owned())
    } else {
        lanczos_smallest(&hs, 0x5eed, 1e-13)?
    };
    if orient_against.dot(&vector) > 0.0 {
        vector = -vector;
    }
    Ok(EigPair { value, vector })
}
