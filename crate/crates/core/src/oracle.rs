//! Problem interface for `min_x max_y f(x, y)` and the reduced gradient/Hessian
//! surrogates of the envelope `P(x) = max_y f(x, y)`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, check_dim};
use crate::linalg::{sorted_eigen, std_normal, symmetrize};

/// Regularity constants of `f`, supplied by the user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemConstants {
    /// Lipschitz constant of the full gradient of `f`.
    pub ell: f64,
    /// Strong-concavity modulus in `y`.
    pub mu: f64,
    /// Lipschitz constant of the second-derivative blocks of `f`.
    pub rho: f64,
}

impl ProblemConstants {
    pub fn new(ell: f64, mu: f64, rho: f64) -> Result<Self> {
        let c = Self { ell, mu, rho };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !(ok(self.ell) && ok(self.mu) && ok(self.rho)) {
            return Err(Error::InvalidConfig(format!(
                "ell, mu, rho must be positive and finite (got {}, {}, {})",
                self.ell, self.mu, self.rho
            )));
        }
        if self.mu > self.ell {
            return Err(Error::InvalidConfig(format!(
                "mu = {} exceeds ell = {}",
                self.mu, self.ell
            )));
        }
        Ok(())
    }

    pub fn kappa(&self) -> f64 {
        self.ell / self.mu
    }
}

/// Lipschitz constants of the envelope `P` and of the reduced Hessian map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    /// Gradient Lipschitz constant of `P`.
    pub l1: f64,
    /// Lipschitz constant of `(x, y) -> H(x, y)`.
    pub l_h: f64,
    /// Hessian Lipschitz constant of `P`.
    pub l2: f64,
}

impl DerivedConstants {
    /// Worst-case bounds for a general coupled problem:
    /// `L1 = (κ+1)ℓ`, `L_H = ρ(1+κ)²`, `L2 = ρ(1+κ)³`.
    pub fn general(c: &ProblemConstants) -> Self {
        let k1 = 1.0 + c.kappa();
        Self {
            l1: k1 * c.ell,
            l_h: c.rho * k1 * k1,
            l2: c.rho * k1 * k1 * k1,
        }
    }

    /// Exact constants when `f(x, y) = g(x) - ½‖y‖²` style problems have a
    /// constant maximizer: `∇P = ∇g`, `H(x, y) = ∇²g(x)`.
    pub fn decoupled(c: &ProblemConstants) -> Self {
        Self {
            l1: c.ell,
            l_h: c.rho,
            l2: c.rho,
        }
    }
}

/// How the envelope constants of a problem are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    #[default]
    General,
    Decoupled,
}

impl Coupling {
    pub fn derive(self, c: &ProblemConstants) -> DerivedConstants {
        match self {
            Coupling::General => DerivedConstants::general(c),
            Coupling::Decoupled => DerivedConstants::decoupled(c),
        }
    }
}

/// Closed forms of the envelope, available for analytic test problems.
pub trait ClosedFormEnvelope {
    fn y_star(&self, x: &DVector<f64>) -> Result<DVector<f64>>;
    fn envelope_value(&self, x: &DVector<f64>) -> Result<f64>;
    fn envelope_grad(&self, x: &DVector<f64>) -> Result<DVector<f64>>;
    fn envelope_hess(&self, x: &DVector<f64>) -> Result<DMatrix<f64>>;
    /// Global minimum of `P`, when known.
    fn optimal_value(&self) -> Option<f64> {
        None
    }
}

/// Oracle bundle for `f` and its first and second partial derivatives.
///
/// Implementations must be strongly concave in `y`. `hess_xy` returns the
/// `n × m` block `∂²f/∂x∂y`; the `yx` block is its transpose.
pub trait MinimaxProblem: Send + Sync {
    fn dim_x(&self) -> usize;
    fn dim_y(&self) -> usize;

    fn value(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64>;
    fn grad_x(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>>;
    fn grad_y(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>>;
    fn hess_xx(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DMatrix<f64>>;
    fn hess_xy(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DMatrix<f64>>;
    fn hess_yy(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DMatrix<f64>>;

    fn constants(&self) -> ProblemConstants;

    fn coupling(&self) -> Coupling {
        Coupling::General
    }

    fn derived_constants(&self) -> DerivedConstants {
        self.coupling().derive(&self.constants())
    }

    /// Whether `x` lies in the domain of `f(·, y)`.
    fn contains(&self, _x: &DVector<f64>) -> bool {
        true
    }

    /// Moves `x` into a box enclosing the domain; returns true if it changed.
    fn project(&self, _x: &mut DVector<f64>) -> bool {
        false
    }

    fn closed_form(&self) -> Option<&dyn ClosedFormEnvelope> {
        None
    }
}

/// Inexact gradient/reduced-Hessian pair of `P` at an outer iterate.
#[derive(Debug, Clone)]
pub struct OracleEval {
    pub g: DVector<f64>,
    pub h: DMatrix<f64>,
    /// Guaranteed bound on `‖∇P(x) - g‖`.
    pub eps1: f64,
    /// Guaranteed bound on `‖∇²P(x) - H‖`.
    pub eps2: f64,
    pub inner_iters: usize,
}

fn check_point<P: MinimaxProblem + ?Sized>(
    problem: &P,
    x: &DVector<f64>,
    y: &DVector<f64>,
) -> Result<()> {
    check_dim("x", problem.dim_x(), x.len())?;
    check_dim("y", problem.dim_y(), y.len())
}

/// Schur complement `∇²ₓₓf − ∇²ₓᵧf (∇²ᵧᵧf)⁻¹ ∇²ᵧₓf`, symmetrized.
///
/// The yy-block is applied through a Cholesky solve of `-∇²ᵧᵧf`.
pub fn assemble_reduced_hessian<P: MinimaxProblem + ?Sized>(
    problem: &P,
    x: &DVector<f64>,
    y: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    check_point(problem, x, y)?;
    let (n, m) = (problem.dim_x(), problem.dim_y());
    let hxx = problem.hess_xx(x, y)?;
    let hxy = problem.hess_xy(x, y)?;
    let hyy = problem.hess_yy(x, y)?;
    check_dim("hess_xx rows", n, hxx.nrows())?;
    check_dim("hess_xx cols", n, hxx.ncols())?;
    check_dim("hess_xy rows", n, hxy.nrows())?;
    check_dim("hess_xy cols", m, hxy.ncols())?;
    check_dim("hess_yy rows", m, hyy.nrows())?;
    check_dim("hess_yy cols", m, hyy.ncols())?;
    if m == 0 {
        return Ok(symmetrize(&hxx));
    }
    let neg_yy = symmetrize(&(-hyy));
    let chol = neg_yy.cholesky().ok_or(Error::SingularYYBlock)?;
    let z = chol.solve(&hxy.transpose());
    let h = hxx + &hxy * z;
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularYYBlock);
    }
    Ok(symmetrize(&h))
}

/// Builds `(g, H)` at `(x, y)`.
pub fn evaluate<P: MinimaxProblem + ?Sized>(
    problem: &P,
    x: &DVector<f64>,
    y: &DVector<f64>,
    eps1: f64,
    eps2: f64,
    inner_iters: usize,
) -> Result<OracleEval> {
    let g = problem.grad_x(x, y)?;
    check_dim("grad_x", problem.dim_x(), g.len())?;
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteIterate("grad_x"));
    }
    let h = assemble_reduced_hessian(problem, x, y)?;
    Ok(OracleEval {
        g,
        h,
        eps1,
        eps2,
        inner_iters,
    })
}

/// Maximum elementwise relative errors `|fd − exact| / (1 + |exact|)` per block.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct DerivativeReport {
    pub grad_x: f64,
    pub grad_y: f64,
    pub hess_xx: f64,
    pub hess_xy: f64,
    /// Mixed-partial symmetry: finite differences of `grad_y` in `x` against `hess_xyᵀ`.
    pub hess_yx: f64,
    pub hess_yy: f64,
}

impl DerivativeReport {
    pub fn max(&self) -> f64 {
        [
            self.grad_x,
            self.grad_y,
            self.hess_xx,
            self.hess_xy,
            self.hess_yx,
            self.hess_yy,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

fn rel_err(fd: f64, exact: f64) -> f64 {
    let e = (fd - exact).abs() / (1.0 + exact.abs());
    if e.is_nan() { f64::INFINITY } else { e }
}

/// Central-difference check of every derivative block at `z = (x, y)`.
pub fn validate_derivatives<P: MinimaxProblem + ?Sized>(
    problem: &P,
    z: &DVector<f64>,
    step: f64,
) -> Result<DerivativeReport> {
    let (n, m) = (problem.dim_x(), problem.dim_y());
    check_dim("z", n + m, z.len())?;
    if !(step > 0.0) {
        return Err(Error::InvalidConfig(format!("step must be positive, got {step}")));
    }
    let x = z.rows(0, n).into_owned();
    let y = z.rows(n, m).into_owned();
    let gx = problem.grad_x(&x, &y)?;
    let gy = problem.grad_y(&x, &y)?;
    let hxx = problem.hess_xx(&x, &y)?;
    let hxy = problem.hess_xy(&x, &y)?;
    let hyy = problem.hess_yy(&x, &y)?;

    let mut rep = DerivativeReport::default();
    let h2 = 2.0 * step;

    for j in 0..n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += step;
        xm[j] -= step;
        let fd = (problem.value(&xp, &y)? - problem.value(&xm, &y)?) / h2;
        rep.grad_x = rep.grad_x.max(rel_err(fd, gx[j]));
        let dgx = (problem.grad_x(&xp, &y)? - problem.grad_x(&xm, &y)?) / h2;
        for i in 0..n {
            rep.hess_xx = rep.hess_xx.max(rel_err(dgx[i], hxx[(i, j)]));
        }
        let dgy = (problem.grad_y(&xp, &y)? - problem.grad_y(&xm, &y)?) / h2;
        for i in 0..m {
            rep.hess_yx = rep.hess_yx.max(rel_err(dgy[i], hxy[(j, i)]));
        }
    }
    for j in 0..m {
        let mut yp = y.clone();
        let mut ym = y.clone();
        yp[j] += step;
        ym[j] -= step;
        let fd = (problem.value(&x, &yp)? - problem.value(&x, &ym)?) / h2;
        rep.grad_y = rep.grad_y.max(rel_err(fd, gy[j]));
        let dgx = (problem.grad_x(&x, &yp)? - problem.grad_x(&x, &ym)?) / h2;
        for i in 0..n {
            rep.hess_xy = rep.hess_xy.max(rel_err(dgx[i], hxy[(i, j)]));
        }
        let dgy = (problem.grad_y(&x, &yp)? - problem.grad_y(&x, &ym)?) / h2;
        for i in 0..m {
            rep.hess_yy = rep.hess_yy.max(rel_err(dgy[i], hyy[(i, j)]));
        }
    }
    Ok(rep)
}

/// A sampled point at which a declared assumption failed.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionViolation {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub what: &'static str,
    /// Size of the violation (eigenvalue excess or asymmetry).
    pub amount: f64,
}

/// Debug routine: evaluates the yy-block at random perturbations of `(x, y)`
/// and flags points where `∇²ᵧᵧf + μI` is not negative semidefinite, or
/// where the declared `ℓ` is smaller than the full Hessian's spectral norm.
pub fn sample_assumption_violations<P: MinimaxProblem + ?Sized>(
    problem: &P,
    x: &DVector<f64>,
    y: &DVector<f64>,
    radius: f64,
    samples: usize,
    seed: u64,
) -> Result<Vec<AssumptionViolation>> {
    check_point(problem, x, y)?;
    let c = problem.constants();
    let (n, m) = (problem.dim_x(), problem.dim_y());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for _ in 0..samples {
        let mut xs = x + DVector::from_fn(n, |_, _| radius * std_normal(&mut rng));
        let ys = y + DVector::from_fn(m, |_, _| radius * std_normal(&mut rng));
        problem.project(&mut xs);
        if !problem.contains(&xs) {
            continue;
        }
        let hyy = symmetrize(&problem.hess_yy(&xs, &ys)?);
        if m > 0 {
            let top = sorted_eigen(&hyy)?.values[m - 1];
            let excess = top + c.mu;
            if excess > 1e-10 * (1.0 + c.mu) {
                out.push(AssumptionViolation {
                    x: xs.clone(),
                    y: ys.clone(),
                    what: "strong concavity",
                    amount: excess,
                });
            }
        }
        let hxx = problem.hess_xx(&xs, &ys)?;
        let hxy = problem.hess_xy(&xs, &ys)?;
        let mut full = DMatrix::zeros(n + m, n + m);
        full.view_mut((0, 0), (n, n)).copy_from(&hxx);
        full.view_mut((0, n), (n, m)).copy_from(&hxy);
        full.view_mut((n, 0), (m, n)).copy_from(&hxy.transpose());
        full.view_mut((n, n), (m, m)).copy_from(&hyy);
        let norm = crate::linalg::sym_spectral_norm(&symmetrize(&full))?;
        if norm > c.ell * (1.0 + 1e-10) {
            out.push(AssumptionViolation {
                x: xs,
                y: ys,
                what: "gradient Lipschitz constant",
                amount: norm - c.ell,
            });
        }
    }
    Ok(out)
}
