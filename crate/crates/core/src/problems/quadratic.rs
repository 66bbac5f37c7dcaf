//! `f(x, y) = ½xᵀAx + xᵀBy − ½yᵀCy` with `C ≻ 0`, whose envelope is the
//! quadratic `P(x) = ½xᵀ(A + BC⁻¹Bᵀ)x`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result, check_dim};
use crate::linalg::{sorted_eigen, std_normal, sym_spectral_norm, symmetrize};
use crate::oracle::{ClosedFormEnvelope, MinimaxProblem, ProblemConstants};

#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    c_chol: Cholesky<f64, Dyn>,
    schur: DMatrix<f64>,
    constants: ProblemConstants,
}

impl QuadraticProblem {
    /// Builds the fixture; `ℓ` is the spectral norm of the full Hessian and
    /// `μ = λ_min(C)`. Third derivatives vanish, so `ρ` defaults to 1.
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        let m = c.nrows();
        check_dim("A cols", n, a.ncols())?;
        check_dim("B rows", n, b.nrows())?;
        check_dim("B cols", m, b.ncols())?;
        check_dim("C cols", m, c.ncols())?;
        let a = symmetrize(&a);
        let c = symmetrize(&c);
        let c_chol = c
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite("C"))?;
        let mu = if m == 0 { 1.0 } else { sorted_eigen(&c)?.values[0] };
        if !(mu > 0.0) {
            return Err(Error::NotPositiveDefinite("C"));
        }
        let schur = symmetrize(&(&a + &b * c_chol.solve(&b.transpose())));
        let mut full = DMatrix::zeros(n + m, n + m);
        full.view_mut((0, 0), (n, n)).copy_from(&a);
        full.view_mut((0, n), (n, m)).copy_from(&b);
        full.view_mut((n, 0), (m, n)).copy_from(&b.transpose());
        full.view_mut((n, n), (m, m)).copy_from(&(-&c));
        let ell = sym_spectral_norm(&full)?.max(mu);
        let constants = ProblemConstants::new(ell, mu, 1.0)?;
        Ok(Self {
            a,
            b,
            c,
            c_chol,
            schur,
            constants,
        })
    }

    /// Random instance: `A` symmetric Gaussian, `B` Gaussian scaled by
    /// `1/√m`, `C = GGᵀ/m + I`.
    pub fn random(seed: u64, n: usize, m: usize) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut normal = || std_normal(&mut rng);
        let a = DMatrix::from_fn(n, n, |_, _| normal());
        let scale = 1.0 / (m.max(1) as f64).sqrt();
        let b = DMatrix::from_fn(n, m, |_, _| scale * normal());
        let g = DMatrix::from_fn(m, m, |_, _| normal());
        let c = &g * g.transpose() / (m.max(1) as f64) + DMatrix::identity(m, m);
        Self::new(a, b, c)
    }

    pub fn with_rho(mut self, rho: f64) -> Result<Self> {
        self.constants = ProblemConstants::new(self.constants.ell, self.constants.mu, rho)?;
        Ok(self)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    /// `A + BC⁻¹Bᵀ`.
    pub fn envelope_matrix(&self) -> &DMatrix<f64> {
        &self.schur
    }
}

impl MinimaxProblem for QuadraticProblem {
    fn dim_x(&self) -> usize {
        self.a.nrows()
    }

    fn dim_y(&self) -> usize {
        self.c.nrows()
    }

    fn value(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        Ok(0.5 * x.dot(&(&self.a * x)) + x.dot(&(&self.b * y)) - 0.5 * y.dot(&(&self.c * y)))
    }

    fn grad_x(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(&self.a * x + &self.b * y)
    }

    fn grad_y(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.b.tr_mul(x) - &self.c * y)
    }

    fn hess_xx(&self, _x: &DVector<f64>, _y: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.a.clone())
    }

    fn hess_xy(&self, _x: &DVector<f64>, _y: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.b.clone())
    }

    fn hess_yy(&self, _x: &DVector<f64>, _y: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(-&self.c)
    }

    fn constants(&self) -> ProblemConstants {
        self.constants
    }

    fn closed_form(&self) -> Option<&dyn ClosedFormEnvelope> {
        Some(self)
    }
}

impl ClosedFormEnvelope for QuadraticProblem {
    fn y_star(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.c_chol.solve(&self.b.tr_mul(x)))
    }

    fn envelope_value(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(0.5 * x.dot(&(&self.schur * x)))
    }

    fn envelope_grad(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(&self.schur * x)
    }

    fn envelope_hess(&self, _x: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.schur.clone())
    }

    fn optimal_value(&self) -> Option<f64> {
        let n = self.schur.nrows();
        if n == 0 {
            return Some(0.0);
        }
        let lo = sorted_eigen(&self.schur).ok()?.values[0];
        (lo >= 0.0).then_some(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_bilinear_fixture() {
        let p = QuadraticProblem::new(
            DMatrix::zeros(1, 1),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        let x = DVector::from_vec(vec![2.0]);
        assert_eq!(p.envelope_value(&x).unwrap(), 2.0);
        assert_eq!(p.y_star(&x).unwrap()[0], 2.0);
        assert_eq!(p.optimal_value(), Some(0.0));
    }

    #[test]
    fn decoupled_fixture_has_hessian_a() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, -2.0]);
        let p = QuadraticProblem::new(a.clone(), DMatrix::zeros(2, 3), DMatrix::identity(3, 3))
            .unwrap();
        assert_eq!(p.envelope_hess(&DVector::zeros(2)).unwrap(), a);
        assert_eq!(p.optimal_value(), None);
    }

    #[test]
    fn rejects_indefinite_c() {
        let err = QuadraticProblem::new(
            DMatrix::zeros(1, 1),
            DMatrix::zeros(1, 1),
            DMatrix::from_element(1, 1, -1.0),
        )
        .unwrap_err();
        assert_eq!(err, Error::NotPositiveDefinite("C"));
    }

    #[test]
    fn random_is_deterministic() {
        let p = QuadraticProblem::random(5, 3, 2).unwrap();
        let q = QuadraticProblem::random(5, 3, 2).unwrap();
        assert_eq!(p.a(), q.a());
        assert_eq!(p.c(), q.c());
        assert!(p.constants().mu >= 1.0);
    }
}
