//! Small dense linear-algebra helpers shared by the oracle and subproblem solvers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Eigen-decomposition with eigenvalues sorted in ascending order.
#[derive(Debug, Clone)]
pub struct SortedEigen {
    pub values: DVector<f64>,
    /// Column `i` is the unit eigenvector for `values[i]`.
    pub vectors: DMatrix<f64>,
}

/// One standard normal draw.
pub fn std_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Returns `(m + mᵀ)/2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn sorted_eigen(m: &DMatrix<f64>) -> Result<SortedEigen> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteIterate("matrix passed to eigensolver"));
    }
    let n = m.nrows();
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::ConvergenceFailure("dense symmetric QR iteration".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(SortedEigen { values, vectors })
}

/// Spectral norm of a symmetric matrix (largest absolute eigenvalue).
pub fn sym_spectral_norm(m: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    let e = sorted_eigen(m)?;
    Ok(e.values[0].abs().max(e.values[e.values.len() - 1].abs()))
}

/// Smallest eigenpair of a symmetric matrix by Lanczos with full
/// reorthogonalization. Breakdowns restart from a fresh vector orthogonal to
/// the current basis, so at most `n` steps always reach the exact spectrum.
pub fn lanczos_smallest(m: &DMatrix<f64>, seed: u64, tol: f64) -> Result<(f64, DVector<f64>)> {
    let n = m.nrows();
    if n == 0 {
        return Err(Error::ConvergenceFailure("empty matrix".into()));
    }
    let scale = 1.0 + m.norm();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut random_unit = |basis: &[DVector<f64>]| -> Option<DVector<f64>> {
        for _ in 0..8 {
            let mut v = DVector::from_fn(n, |_, _| std_normal(&mut rng));
            orthogonalize(&mut v, basis);
            let nv = v.norm();
            if nv > 1e-8 {
                return Some(v / nv);
            }
        }
        None
    };

    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut alpha: Vec<f64> = Vec::with_capacity(n);
    let mut beta: Vec<f64> = Vec::with_capacity(n);
    let mut q = random_unit(&basis).ok_or_else(|| Error::ConvergenceFailure("start vector".into()))?;

    loop {
        let mut w = m * &q;
        let a = q.dot(&w);
        w.axpy(-a, &q, 1.0);
        if let Some(prev) = basis.last() {
            let b: f64 = *beta.last().unwrap_or(&0.0);
            w.axpy(-b, prev, 1.0);
        }
        basis.push(q.clone());
        alpha.push(a);
        orthogonalize(&mut w, &basis);
        orthogonalize(&mut w, &basis);
        let b = w.norm();
        let k = basis.len();

        let t = tridiagonal(&alpha, &beta);
        let te = sorted_eigen(&t)?;
        let ritz = te.values[0];
        let residual = b * te.vectors[(k - 1, 0)].abs();

        if k == n || (residual <= tol * scale && k >= 2.min(n)) {
            let mut u = DVector::zeros(n);
            for (j, qj) in basis.iter().enumerate() {
                u.axpy(te.vectors[(j, 0)], qj, 1.0);
            }
            let nu = u.norm();
            return Ok((ritz, u / nu));
        }

        if b <= 1e-12 * scale {
            q = random_unit(&basis)
                .ok_or_else(|| Error::ConvergenceFailure("restart vector after breakdown".into()))?;
            beta.push(0.0);
        } else {
            q = w / b;
            beta.push(b);
        }
    }
}

fn orthogonalize(v: &mut DVector<f64>, basis: &[DVector<f64>]) {
    for q in basis {
        let c = q.dot(v);
        v.axpy(-c, q, 1.0);
    }
}

fn tridiagonal(alpha: &[f64], beta: &[f64]) -> DMatrix<f64> {
    let k = alpha.len();
    let mut t = DMatrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alpha[i];
        if i + 1 < k {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    t
}

/// Cholesky solve of `a x = b` for symmetric positive definite `a`.
pub fn spd_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    a.clone().cholesky().map(|c| c.solve(b))
}
