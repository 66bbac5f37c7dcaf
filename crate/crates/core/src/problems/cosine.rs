//! Quadratic-plus-saddle fixture
//! `f(x, y) = a·cos(x₁) + ½ Σ_{i≥2} dᵢxᵢ² + x̃ᵀBy − ½yᵀCy`, where `x̃` drops
//! the first coordinate. The origin is a strict saddle of the envelope with
//! curvature `−a` along `e₁`, and `P` attains its minimum `−a` at `x = πe₁`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::{Error, Result, check_dim};
use crate::linalg::{std_normal, sym_spectral_norm, symmetrize};
use crate::oracle::{ClosedFormEnvelope, MinimaxProblem, ProblemConstants};

#[derive(Debug, Clone)]
pub struct CosineSaddle {
    amplitude: f64,
    diag: DVector<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    c_chol: Cholesky<f64, Dyn>,
    /// `diag(d) + BC⁻¹Bᵀ` on the trailing `n − 1` coordinates.
    tail_schur: DMatrix<f64>,
    constants: ProblemConstants,
}

impl CosineSaddle {
    /// `diag` and `b` act on `x₂..x_n`; `b` is `(n−1) × m`.
    pub fn new(amplitude: f64, diag: DVector<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return Err(Error::InvalidConfig("amplitude must be positive".into()));
        }
        if diag.iter().any(|&d| !(d > 0.0)) {
            return Err(Error::NotPositiveDefinite("diag"));
        }
        let k = diag.len();
        let m = c.nrows();
        check_dim("B rows", k, b.nrows())?;
        check_dim("B cols", m, b.ncols())?;
        check_dim("C cols", m, c.ncols())?;
        let c = symmetrize(&c);
        let c_chol = c.clone().cholesky().ok_or(Error::NotPositiveDefinite("C"))?;
        let mu = crate::linalg::sorted_eigen(&c)?.values[0];
        let tail_schur =
            symmetrize(&(DMatrix::from_diagonal(&diag) + &b * c_chol.solve(&b.transpose())));

        // The Hessian is affine in cos(x₁) ∈ [−1, 1]; its spectral norm is
        // convex in that scalar, so the endpoints bound it.
        let n = k + 1;
        let mut ell: f64 = mu;
        for s in [-1.0, 1.0] {
            let mut full = DMatrix::zeros(n + m, n + m);
            full[(0, 0)] = s * amplitude;
            for i in 0..k {
                full[(1 + i, 1 + i)] = diag[i];
            }
            full.view_mut((1, n), (k, m)).copy_from(&b);
            full.view_mut((n, 1), (m, k)).copy_from(&b.transpose());
            full.view_mut((n, n), (m, m)).copy_from(&(-&c));
            ell = ell.max(sym_spectral_norm(&full)?);
        }
        let constants = ProblemConstants::new(ell, mu, amplitude)?;
        Ok(Self {
            amplitude,
            diag,
            b,
            c,
            c_chol,
            tail_schur,
            constants,
        })
    }

    /// Random member of the family: `dᵢ ~ U[1, 2]`, `B` Gaussian scaled by
    /// `0.5/√m`, `C = GGᵀ/m + I`.
    pub fn random(seed: u64, n: usize, m: usize, amplitude: f64) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidConfig("cosine saddle needs n >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = n - 1;
        let unif = Uniform::new(1.0, 2.0).expect("valid range");
        let diag = DVector::from_fn(k, |_, _| unif.sample(&mut rng));
        let scale = 0.5 / (m.max(1) as f64).sqrt();
        let b = DMatrix::from_fn(k, m, |_, _| scale * std_normal(&mut rng));
        let g: DMatrix<f64> = DMatrix::from_fn(m, m, |_, _| std_normal(&mut rng));
        let c = &g * g.transpose() / (m.max(1) as f64) + DMatrix::identity(m, m);
        Self::new(amplitude, diag, b, c)
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    fn tail(x: &DVector<f64>) -> DVector<f64> {
        x.rows(1, x.len() - 1).into_owned()
    }

    fn check(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<()> {
        check_dim("x", self.dim_x(), x.len())?;
        check_dim("y", self.dim_y(), y.len())
    }
}

impl MinimaxProblem for CosineSaddle {
    fn dim_x(&self) -> usize {
        self.diag.len() + 1
    }

    fn dim_y(&self) -> usize {
        self.c.nrows()
    }

    fn value(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        self.check(x, y)?;
        let t = Self::tail(x);
        let quad: f64 = t.iter().zip(self.diag.iter()).map(|(v, d)| 0.5 * d * v * v).sum();
        Ok(self.amplitude * x[0].cos() + quad + t.dot(&(&self.b * y))
            - 0.5 * y.dot(&(&self.c * y)))
    }

    fn grad_x(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(x, y)?;
        let t = Self::tail(x);
        let gt = t.component_mul(&self.diag) + &self.b * y;
        let mut g = DVector::zeros(self.dim_x());
        g[0] = -self.amplitude * x[0].sin();
        g.rows_mut(1, gt.len()).copy_from(&gt);
        Ok(g)
    }

    fn grad_y(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(x, y)?;
        Ok(self.b.tr_mul(&Self::tail(x)) - &self.c * y)
    }

    fn hess_xx(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check(x, y)?;
        let mut h = DMatrix::zeros(self.dim_x(), self.dim_x());
        h[(0, 0)] = -self.amplitude * x[0].cos();
        for (i, d) in self.diag.iter().enumerate() {
            h[(i + 1, i + 1)] = *d;
        }
        Ok(h)
    }

    fn hess_xy(&self, _x: &DVector<f64>, _y: &DVector<f64>) -> Result<DMatrix<f64>> {
        let mut h = DMatrix::zeros(self.dim_x(), self.dim_y());
        h.view_mut((1, 0), (self.diag.len(), self.dim_y())).copy_from(&self.b);
        Ok(h)
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

impl ClosedFormEnvelope for CosineSaddle {
    fn y_star(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("x", self.dim_x(), x.len())?;
        Ok(self.c_chol.solve(&self.b.tr_mul(&Self::tail(x))))
    }

    fn envelope_value(&self, x: &DVector<f64>) -> Result<f64> {
        check_dim("x", self.dim_x(), x.len())?;
        let t = Self::tail(x);
        Ok(self.amplitude * x[0].cos() + 0.5 * t.dot(&(&self.tail_schur * &t)))
    }

    fn envelope_grad(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("x", self.dim_x(), x.len())?;
        let gt = &self.tail_schur * Self::tail(x);
        let mut g = DVector::zeros(self.dim_x());
        g[0] = -self.amplitude * x[0].sin();
        g.rows_mut(1, gt.len()).copy_from(&gt);
        Ok(g)
    }

    fn envelope_hess(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_dim("x", self.dim_x(), x.len())?;
        let k = self.diag.len();
        let mut h = DMatrix::zeros(k + 1, k + 1);
        h[(0, 0)] = -self.amplitude * x[0].cos();
        h.view_mut((1, 1), (k, k)).copy_from(&self.tail_schur);
        Ok(h)
    }

    fn optimal_value(&self) -> Option<f64> {
        Some(-self.amplitude)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_is_a_saddle_and_pi_is_the_minimum() {
        let p = CosineSaddle::random(1, 4, 2, 1.0).unwrap();
        let h0 = p.envelope_hess(&DVector::zeros(4)).unwrap();
        assert_eq!(h0[(0, 0)], -1.0);
        let mut xmin = DVector::zeros(4);
        xmin[0] = std::f64::consts::PI;
        assert!((p.envelope_value(&xmin).unwrap() + 1.0).abs() < 1e-15);
        assert!(p.envelope_grad(&xmin).unwrap().norm() < 1e-15);
        assert_eq!(p.constants().rho, 1.0);
    }

    #[test]
    fn envelope_gradient_is_grad_x_at_y_star() {
        let p = CosineSaddle::random(2, 3, 3, 2.0).unwrap();
        let x = DVector::from_vec(vec![0.3, -0.7, 1.1]);
        let ys = p.y_star(&x).unwrap();
        assert!(p.grad_y(&x, &ys).unwrap().norm() < 1e-12);
        let diff = p.grad_x(&x, &ys).unwrap() - p.envelope_grad(&x).unwrap();
        assert!(diff.norm() < 1e-12);
    }
}
