//! Piecewise-polynomial saddle chain `g : D₀ → ℝ` with `n` strict saddle
//! points and a single local minimizer at `(4τ, …, 4τ)`, lifted to a minimax
//! problem as `f(x, y) = g(x) − ½‖y‖²`.
//!
//! Region `i` (1-based) fixes `x₁..x_{i−1} ∈ [2τ, 6τ]`, `x_i ∈ [0, 2τ]` and
//! `x_{i+1}..x_n ∈ [0, τ]`. Inside it, `x_i ∈ [0, τ)` uses the pure quadratic
//! piece and `x_i ∈ [τ, 2τ)` the quartic/quintic gluing piece.

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, check_dim};
use crate::linalg::sym_spectral_norm;
use crate::oracle::{ClosedFormEnvelope, Coupling, MinimaxProblem, ProblemConstants};

/// Shape parameters of the saddle chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaddleChainParams {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "L")]
    pub l: f64,
    pub gamma: f64,
    pub tau: f64,
}

impl SaddleChainParams {
    pub fn new(n: usize, m: usize, l: f64, gamma: f64) -> Result<Self> {
        Self::with_tau(n, m, l, gamma, std::f64::consts::E)
    }

    pub fn with_tau(n: usize, m: usize, l: f64, gamma: f64, tau: f64) -> Result<Self> {
        let p = Self { n, m, l, gamma, tau };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("saddle chain needs n >= 1".into()));
        }
        for (name, v) in [("L", self.l), ("gamma", self.gamma), ("tau", self.tau)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// `ν = −h₁(2τ) + 4Lτ²`.
    pub fn nu(&self) -> f64 {
        -self.h1(2.0 * self.tau) + 4.0 * self.l * self.tau * self.tau
    }

    pub fn h1(&self, x: f64) -> f64 {
        let (c3, c4) = self.h1_coeffs();
        let d = x - self.tau;
        -self.gamma * x * x + c3 * d.powi(3) + c4 * d.powi(4)
    }

    fn h1_d1(&self, x: f64) -> f64 {
        let (c3, c4) = self.h1_coeffs();
        let d = x - self.tau;
        -2.0 * self.gamma * x + 3.0 * c3 * d * d + 4.0 * c4 * d.powi(3)
    }

    fn h1_d2(&self, x: f64) -> f64 {
        let (c3, c4) = self.h1_coeffs();
        let d = x - self.tau;
        -2.0 * self.gamma + 6.0 * c3 * d + 12.0 * c4 * d * d
    }

    fn h1_coeffs(&self) -> (f64, f64) {
        let (l, g, t) = (self.l, self.gamma, self.tau);
        ((-14.0 * l + 10.0 * g) / (3.0 * t), (5.0 * l - 3.0 * g) / (2.0 * t * t))
    }

    pub fn h2(&self, x: f64) -> f64 {
        let k = self.l + self.gamma;
        let t = self.tau;
        let d = x - 2.0 * t;
        -self.gamma - 10.0 * k * d.powi(3) / t.powi(3) - 15.0 * k * d.powi(4) / t.powi(4)
            - 6.0 * k * d.powi(5) / t.powi(5)
    }

    fn h2_d1(&self, x: f64) -> f64 {
        let k = self.l + self.gamma;
        let t = self.tau;
        let d = x - 2.0 * t;
        -30.0 * k * d * d / t.powi(3) - 60.0 * k * d.powi(3) / t.powi(4)
            - 30.0 * k * d.powi(4) / t.powi(5)
    }

    fn h2_d2(&self, x: f64) -> f64 {
        let k = self.l + self.gamma;
        let t = self.tau;
        let d = x - 2.0 * t;
        -60.0 * k * d / t.powi(3) - 180.0 * k * d * d / t.powi(4)
            - 120.0 * k * d.powi(3) / t.powi(5)
    }

    /// The global minimum `−nν` attained at `(4τ, …, 4τ)`.
    pub fn optimal_value(&self) -> f64 {
        -(self.n as f64) * self.nu()
    }
}

/// Region of `D₀` containing a point; block indices are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RegionLabel {
    /// `x_i ∈ [0, τ)`: pure quadratic piece with the `−γx_i²` saddle term.
    Type1(usize),
    /// `x_i ∈ [τ, 2τ)`: gluing piece `h₁(x_i) + h₂(x_i)x_{i+1}²`.
    Type2(usize),
    /// All coordinates in `[2τ, 6τ]`.
    Final,
    Outside,
}

/// Returns the region of `D₀` containing `x`.
///
/// `x_i = τ` belongs to `Type2(i)`; `x_i = 2τ` belongs to the successor region.
pub fn classify_region(x: &DVector<f64>, params: &SaddleChainParams) -> RegionLabel {
    let t = params.tau;
    let n = x.len();
    if n != params.n || x.iter().any(|v| !v.is_finite()) {
        return RegionLabel::Outside;
    }
    let k = x.iter().position(|&v| v < 2.0 * t).unwrap_or(n);
    if x.iter().take(k).any(|&v| v > 6.0 * t) {
        return RegionLabel::Outside;
    }
    if k == n {
        return RegionLabel::Final;
    }
    if x[k] < 0.0 || x.iter().skip(k + 1).any(|&v| !(0.0..=t).contains(&v)) {
        return RegionLabel::Outside;
    }
    if x[k] < t {
        RegionLabel::Type1(k + 1)
    } else {
        RegionLabel::Type2(k + 1)
    }
}

/// Value of `g` at `x`.
pub fn saddle_chain_value(x: &DVector<f64>, params: &SaddleChainParams) -> Result<f64> {
    Ok(evaluate(x, params, Order::Value)?.0)
}

pub fn saddle_chain_grad(x: &DVector<f64>, params: &SaddleChainParams) -> Result<DVector<f64>> {
    Ok(evaluate(x, params, Order::Gradient)?.1)
}

pub fn saddle_chain_hess(x: &DVector<f64>, params: &SaddleChainParams) -> Result<DMatrix<f64>> {
    Ok(evaluate(x, params, Order::Hessian)?.2)
}

#[derive(Clone, Copy, PartialEq, PartialOrd)]
enum Order {
    Value,
    Gradient,
    Hessian,
}

fn evaluate(
    x: &DVector<f64>,
    p: &SaddleChainParams,
    order: Order,
) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
    check_dim("x", p.n, x.len())?;
    let region = classify_region(x, p);
    let n = p.n;
    let (l, gam, t, nu) = (p.l, p.gamma, p.tau, p.nu());
    let want_g = order >= Order::Gradient;
    let want_h = order >= Order::Hessian;
    let dg = if want_g { n } else { 0 };
    let dh = if want_h { n } else { 0 };
    let mut v = 0.0;
    let mut g = DVector::zeros(dg);
    let mut h = DMatrix::zeros(dh, dh);

    let (k, tail_from) = match region {
        RegionLabel::Outside => return Err(Error::OutsideDomain),
        RegionLabel::Final => (n, n),
        RegionLabel::Type1(i) => (i - 1, i),
        RegionLabel::Type2(i) => (i - 1, (i + 1).min(n)),
    };

    for j in 0..k {
        let d = x[j] - 4.0 * t;
        v += l * d * d;
        if want_g {
            g[j] = 2.0 * l * d;
        }
        if want_h {
            h[(j, j)] = 2.0 * l;
        }
    }
    v -= k as f64 * nu;

    match region {
        RegionLabel::Type1(_) => {
            let xi = x[k];
            v -= gam * xi * xi;
            if want_g {
                g[k] = -2.0 * gam * xi;
            }
            if want_h {
                h[(k, k)] = -2.0 * gam;
            }
        }
        RegionLabel::Type2(_) => {
            let xi = x[k];
            v += p.h1(xi);
            if want_g {
                g[k] = p.h1_d1(xi);
            }
            if want_h {
                h[(k, k)] = p.h1_d2(xi);
            }
            if k + 1 < n {
                let z = x[k + 1];
                v += p.h2(xi) * z * z;
                if want_g {
                    g[k] += p.h2_d1(xi) * z * z;
                    g[k + 1] = 2.0 * p.h2(xi) * z;
                }
                if want_h {
                    h[(k, k)] += p.h2_d2(xi) * z * z;
                    h[(k, k + 1)] = 2.0 * p.h2_d1(xi) * z;
                    h[(k + 1, k)] = h[(k, k + 1)];
                    h[(k + 1, k + 1)] = 2.0 * p.h2(xi);
                }
            }
        }
        _ => {}
    }

    for j in tail_from..n {
        v += l * x[j] * x[j];
        if want_g {
            g[j] = 2.0 * l * x[j];
        }
        if want_h {
            h[(j, j)] = 2.0 * l;
        }
    }
    Ok((v, g, h))
}

/// Safety factor applied to sampled derivative bounds.
pub const CONSTANT_SAFETY: f64 = 1.1;

/// Box `[lo, hi]` of each coordinate for the given region.
fn region_box(p: &SaddleChainParams, region: RegionLabel) -> Vec<(f64, f64)> {
    let t = p.tau;
    let n = p.n;
    let (k, lead) = match region {
        RegionLabel::Type1(i) => (i - 1, (0.0, t)),
        RegionLabel::Type2(i) => (i - 1, (t, 2.0 * t)),
        RegionLabel::Final | RegionLabel::Outside => (n, (0.0, 0.0)),
    };
    (0..n)
        .map(|j| match j.cmp(&k) {
            std::cmp::Ordering::Less => (2.0 * t, 6.0 * t),
            std::cmp::Ordering::Equal => lead,
            std::cmp::Ordering::Greater => (0.0, t),
        })
        .collect()
}

fn all_regions(n: usize) -> Vec<RegionLabel> {
    let mut r = Vec::with_capacity(2 * n + 1);
    for i in 1..=n {
        r.push(RegionLabel::Type1(i));
        r.push(RegionLabel::Type2(i));
    }
    r.push(RegionLabel::Final);
    r
}

/// Uniform sample from the interior of a uniformly chosen region of `D₀`,
/// kept `margin` away from every region boundary.
pub fn sample_interior_point<R: rand::Rng + ?Sized>(
    p: &SaddleChainParams,
    margin: f64,
    rng: &mut R,
) -> DVector<f64> {
    let regions = all_regions(p.n);
    let region = regions[rng.random_range(0..regions.len())];
    let bx = region_box(p, region);
    DVector::from_iterator(
        p.n,
        bx.iter().map(|&(lo, hi)| rng.random_range((lo + margin)..(hi - margin))),
    )
}

/// Sampled sup-norm bounds `(ℓ_g, ρ_g)` on `‖∇²g‖` and on the Lipschitz
/// constant of `∇²g` over `D₀`, without safety factor.
///
/// Each region's box is sampled with coordinates drawn from its endpoints or
/// uniformly inside; `ρ_g` comes from central differences of the Hessian
/// along random unit directions.
pub fn estimate_derivative_bounds(
    p: &SaddleChainParams,
    samples_per_region: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fd_step = 1e-4 * p.tau;
    let margin = 2.0 * fd_step;
    let mut ell: f64 = 0.0;
    let mut rho: f64 = 0.0;
    for region in all_regions(p.n) {
        let bx = region_box(p, region);
        for _ in 0..samples_per_region {
            let x = DVector::from_iterator(
                p.n,
                bx.iter().map(|&(lo, hi)| {
                    let (lo, hi) = (lo + margin, hi - margin);
                    match rng.random_range(0..4u8) {
                        0 => lo,
                        1 => hi,
                        _ => rng.random_range(lo..hi),
                    }
                }),
            );
            let h = saddle_chain_hess(&x, p)?;
            ell = ell.max(sym_spectral_norm(&h)?);
            let mut d = DVector::from_fn(p.n, |_, _| rng.random_range(-1.0..1.0));
            let nd = d.norm();
            if nd == 0.0 {
                continue;
            }
            d /= nd;
            let hp = saddle_chain_hess(&(&x + &d * fd_step), p)?;
            let hm = saddle_chain_hess(&(&x - &d * fd_step), p)?;
            rho = rho.max(sym_spectral_norm(&((hp - hm) / (2.0 * fd_step)))?);
        }
    }
    Ok((ell, rho))
}

/// The saddle chain as a minimax problem `g(x) − ½‖y‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddleChain {
    params: SaddleChainParams,
    nu: f64,
    /// Bound on `‖∇²g‖` over `D₀`.
    ell_g: f64,
    /// Bound on the Lipschitz constant of `∇²g` over `D₀`.
    rho_g: f64,
}

impl SaddleChain {
    /// Builds the instance with sampled constants (500 samples per region,
    /// seed 0, safety factor [`CONSTANT_SAFETY`]).
    pub fn new(params: SaddleChainParams) -> Result<Self> {
        params.validate()?;
        let (ell, rho) = estimate_derivative_bounds(&params, 500, 0)?;
        Self::with_bounds(params, CONSTANT_SAFETY * ell, CONSTANT_SAFETY * rho)
    }

    /// Builds the instance with externally supplied bounds, e.g. from an
    /// instance file.
    pub fn with_bounds(params: SaddleChainParams, ell_g: f64, rho_g: f64) -> Result<Self> {
        params.validate()?;
        if !(ell_g > 0.0 && rho_g > 0.0) {
            return Err(Error::InvalidConfig("ell and rho must be positive".into()));
        }
        Ok(Self {
            params,
            nu: params.nu(),
            ell_g,
            rho_g,
        })
    }

    pub fn params(&self) -> &SaddleChainParams {
        &self.params
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn ell_g(&self) -> f64 {
        self.ell_g
    }

    pub fn rho_g(&self) -> f64 {
        self.rho_g
    }

    /// `(4τ, …, 4τ)`.
    pub fn minimizer(&self) -> DVector<f64> {
        DVector::from_element(self.params.n, 4.0 * self.params.tau)
    }

    /// The `n` saddle points `(4τ, …, 4τ, 0, …, 0)` with `k = 0..n` leading entries.
    pub fn saddle_points(&self) -> Vec<DVector<f64>> {
        let n = self.params.n;
        let t4 = 4.0 * self.params.tau;
        (0..n)
            .map(|k| DVector::from_fn(n, |j, _| if j < k { t4 } else { 0.0 }))
            .collect()
    }

    fn check_y(&self, y: &DVector<f64>) -> Result<()> {
        check_dim("y", self.params.m, y.len())
    }
}

impl MinimaxProblem for SaddleChain {
    fn dim_x(&self) -> usize {
        self.params.n
    }

    fn dim_y(&self) -> usize {
        self.params.m
    }

    fn value(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        self.check_y(y)?;
        Ok(saddle_chain_value(x, &self.params)? - 0.5 * y.norm_squared())
    }

    fn grad_x(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_y(y)?;
        saddle_chain_grad(x, &self.params)
    }

    fn grad_y(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_y(y)?;
        check_dim("x", self.params.n, x.len())?;
        Ok(-y)
    }

    fn hess_xx(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_y(y)?;
        saddle_chain_hess(x, &self.params)
    }

    fn hess_xy(&self, _x: &DVector<f64>, _y: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(DMatrix::zeros(self.params.n, self.params.m))
    }

    fn hess_yy(&self, _x: &DVector<f64>, _y: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(-DMatrix::identity(self.params.m, self.params.m))
    }

    fn constants(&self) -> ProblemConstants {
        ProblemConstants {
            ell: self.ell_g.max(1.0),
            mu: 1.0,
            rho: self.rho_g,
        }
    }

    fn coupling(&self) -> Coupling {
        Coupling::Decoupled
    }

    fn contains(&self, x: &DVector<f64>) -> bool {
        classify_region(x, &self.params) != RegionLabel::Outside
    }

    fn project(&self, x: &mut DVector<f64>) -> bool {
        let hi = 6.0 * self.params.tau;
        let mut changed = false;
        for v in x.iter_mut() {
            let c = v.clamp(0.0, hi);
            if c != *v {
                *v = c;
                changed = true;
            }
        }
        changed
    }

    fn closed_form(&self) -> Option<&dyn ClosedFormEnvelope> {
        Some(self)
    }
}

impl ClosedFormEnvelope for SaddleChain {
    fn y_star(&self, _x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(DVector::zeros(self.params.m))
    }

    fn envelope_value(&self, x: &DVector<f64>) -> Result<f64> {
        saddle_chain_value(x, &self.params)
    }

    fn envelope_grad(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        saddle_chain_grad(x, &self.params)
    }

    fn envelope_hess(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        saddle_chain_hess(x, &self.params)
    }

    fn optimal_value(&self) -> Option<f64> {
        Some(self.params.optimal_value())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: usize) -> SaddleChainParams {
        SaddleChainParams::new(n, 5, 1.0, 1.0).unwrap()
    }

    #[test]
    fn classifies_reference_points() {
        let p = params(10);
        let t = p.tau;
        assert_eq!(
            classify_region(&DVector::from_element(10, 1e-3), &p),
            RegionLabel::Type1(1)
        );
        assert_eq!(
            classify_region(&DVector::from_element(10, 4.0 * t), &p),
            RegionLabel::Final
        );
        let mut x = DVector::zeros(10);
        x[0] = 4.0 * t;
        x[1] = 1.5 * t;
        assert_eq!(classify_region(&x, &p), RegionLabel::Type2(2));
    }

    #[test]
    fn boundary_tie_breaks() {
        let p = params(3);
        let t = p.tau;
        let x = DVector::from_vec(vec![t, 0.5 * t, 0.0]);
        assert_eq!(classify_region(&x, &p), RegionLabel::Type2(1));
        let x = DVector::from_vec(vec![2.0 * t, 0.5 * t, 0.0]);
        assert_eq!(classify_region(&x, &p), RegionLabel::Type1(2));
        let x = DVector::from_vec(vec![2.0 * t, 2.0 * t, 2.0 * t]);
        assert_eq!(classify_region(&x, &p), RegionLabel::Final);
    }

    #[test]
    fn outside_points() {
        let p = params(3);
        let t = p.tau;
        for v in [
            vec![-0.1, 0.0, 0.0],
            vec![0.5 * t, 1.5 * t, 0.0],
            vec![7.0 * t, 0.0, 0.0],
            vec![1.5 * t, 0.0, 1.1 * t],
            vec![f64::NAN, 0.0, 0.0],
        ] {
            let x = DVector::from_vec(v);
            assert_eq!(classify_region(&x, &p), RegionLabel::Outside, "{x}");
            assert_eq!(saddle_chain_value(&x, &p), Err(Error::OutsideDomain));
        }
    }

    #[test]
    fn value_at_origin_is_zero() {
        let p = params(10);
        assert_eq!(saddle_chain_value(&DVector::zeros(10), &p).unwrap(), 0.0);
    }

    #[test]
    fn nu_and_optimum_match_symbolic_values() {
        let p = params(10);
        let t2 = p.tau * p.tau;
        // h₁(2τ) = −4τ² − (4/3)τ² + τ² = −(13/3)τ² when L = γ = 1.
        assert!((p.h1(2.0 * p.tau) + 13.0 / 3.0 * t2).abs() < 1e-12 * t2);
        assert!((p.nu() - 25.0 / 3.0 * t2).abs() < 1e-12 * t2);
        let opt = saddle_chain_value(&DVector::from_element(10, 4.0 * p.tau), &p).unwrap();
        assert!((opt + 10.0 * 25.0 / 3.0 * t2).abs() < 1e-10);
        assert!((opt + 615.754_674_910_887).abs() < 1e-9);
    }

    #[test]
    fn gluing_polynomials_at_their_anchors() {
        let p = SaddleChainParams::new(2, 1, 1.5, 0.7).unwrap();
        let t = p.tau;
        assert!((p.h1(t) + p.gamma * t * t).abs() < 1e-12);
        assert!((p.h2(2.0 * t) + p.gamma).abs() < 1e-12);
        assert!((p.h2(t) - p.l).abs() < 1e-12);
    }

    #[test]
    fn sampled_bounds_are_reasonable() {
        let p = params(4);
        let (ell, rho) = estimate_derivative_bounds(&p, 200, 0).unwrap();
        assert!(ell >= 2.0);
        assert!(rho > 0.0 && rho.is_finite());
        assert_eq!(estimate_derivative_bounds(&p, 200, 0).unwrap(), (ell, rho));
    }

    #[test]
    fn projection_clamps_to_box() {
        let sc = SaddleChain::with_bounds(params(3), 15.0, 15.0).unwrap();
        let mut x = DVector::from_vec(vec![-1.0, 0.5, 100.0]);
        assert!(sc.project(&mut x));
        assert_eq!(x[0], 0.0);
        assert_eq!(x[2], 6.0 * sc.params().tau);
        assert!(!sc.project(&mut x));
    }
}
