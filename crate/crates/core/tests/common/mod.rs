//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
}

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    Uniform::new(lo, hi).unwrap().sample(rng)
}

/// Random orthogonal matrix from the QR factorization of a Gaussian matrix.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| normal(rng));
    g.qr().q()
}

/// Symmetric matrix with prescribed eigenvalues and random eigenvectors.
pub fn with_spectrum(rng: &mut ChaCha8Rng, eigs: &[f64]) -> DMatrix<f64> {
    let q = random_orthogonal(rng, eigs.len());
    let d = DMatrix::from_diagonal(&DVector::from_row_slice(eigs));
    let m = &q * d * q.transpose();
    (&m + m.transpose()) * 0.5
}

pub fn random_direction(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(n, |_, _| normal(rng));
        let nv = v.norm();
        if nv > 1e-8 {
            return v / nv;
        }
    }
}

/// `gᵀs + ½sᵀ(H + reg·I)s`.
pub fn tr_objective(h: &DMatrix<f64>, g: &DVector<f64>, reg: f64, s: &DVector<f64>) -> f64 {
    g.dot(s) + 0.5 * (s.dot(&(h * s)) + reg * s.norm_squared())
}

/// Brute-force trust-region solution: eigendecomposition, then plain
/// bisection of `‖(M + λI)⁻¹g‖ − radius` on `(λ_lo, λ_lo + 10⁶]`, with the
/// hard case handled explicitly. Returns `(s, λ)`.
pub fn tr_oracle(h: &DMatrix<f64>, g: &DVector<f64>, reg: f64, radius: f64) -> (DVector<f64>, f64) {
    let n = g.len();
    let m = (h + h.transpose()) * 0.5 + DMatrix::identity(n, n) * reg;
    let eig = m.symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let w: Vec<f64> = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let v: Vec<DVector<f64>> = idx.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
    let b: Vec<f64> = v.iter().map(|vi| vi.dot(g)).collect();
    let gn = g.norm();
    let assemble = |coef: &dyn Fn(usize) -> f64| -> DVector<f64> {
        let mut s = DVector::zeros(n);
        for i in 0..n {
            s += &v[i] * coef(i);
        }
        s
    };
    let norm_at = |lam: f64| -> f64 {
        (0..n)
            .map(|i| {
                if b[i] == 0.0 {
                    0.0
                } else {
                    (b[i] / (w[i] + lam)).powi(2)
                }
            })
            .sum::<f64>()
            .sqrt()
    };
    if w[0] > 0.0 && norm_at(0.0) <= radius {
        return (assemble(&|i| -b[i] / w[i]), 0.0);
    }
    let lam_lo = (-w[0]).max(0.0);
    let bottom: Vec<usize> = (0..n).filter(|&i| w[i] - w[0] <= 1e-10).collect();
    let bottom_proj = bottom.iter().map(|&i| b[i] * b[i]).sum::<f64>().sqrt();
    if bottom_proj <= 1e-12 * gn {
        let rest = assemble(&|i| {
            if bottom.contains(&i) { 0.0 } else { -b[i] / (w[i] + lam_lo) }
        });
        if rest.norm() <= radius {
            if lam_lo == 0.0 {
                return (rest, 0.0);
            }
            let tau = (radius * radius - rest.norm_squared()).max(0.0).sqrt();
            return (rest + &v[0] * tau, lam_lo);
        }
    }
    let mut lo = lam_lo;
    let mut hi = lam_lo + 1e6;
    while norm_at(hi) > radius {
        hi *= 2.0;
    }
    for _ in 0..10_000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if norm_at(mid) > radius {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lam = hi;
    (assemble(&|i| if b[i] == 0.0 { 0.0 } else { -b[i] / (w[i] + lam) }), lam)
}

/// Central-difference gradient of a scalar function.
pub fn fd_gradient(f: &dyn Fn(&DVector<f64>) -> f64, x: &DVector<f64>, h: f64) -> DVector<f64> {
    DVector::from_fn(x.len(), |i, _| {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        (f(&xp) - f(&xm)) / (2.0 * h)
    })
}

/// Central-difference Jacobian of a vector function (column `j` is `∂/∂x_j`).
pub fn fd_jacobian(
    f: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    x: &DVector<f64>,
    h: f64,
) -> DMatrix<f64> {
    let cols: Vec<DVector<f64>> = (0..x.len())
        .map(|j| {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            (f(&xp) - f(&xm)) / (2.0 * h)
        })
        .collect();
    DMatrix::from_columns(&cols)
}

/// Smallest eigenvalue via nalgebra's symmetric eigensolver.
pub fn lambda_min(m: &DMatrix<f64>) -> f64 {
    let s = (m + m.transpose()) * 0.5;
    s.symmetric_eigen().eigenvalues.min()
}

/// `A + BC⁻¹Bᵀ` through an explicit LU inverse of `C`.
pub fn schur_reference(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> DMatrix<f64> {
    let cinv = c.clone().try_inverse().expect("C invertible");
    a + b * cinv * b.transpose()
}

/// One closed-form piece of the saddle chain, evaluated on its own formula
/// regardless of which region `x` lies in. Block indices are 1-based.
#[derive(Debug, Clone, Copy)]
pub enum ChainPiece {
    Quadratic(usize),
    Glue(usize),
    Final,
}

pub struct ChainRef {
    pub n: usize,
    pub l: f64,
    pub gamma: f64,
    pub tau: f64,
}

impl ChainRef {
    pub fn new(n: usize, l: f64, gamma: f64, tau: f64) -> Self {
        Self { n, l, gamma, tau }
    }

    fn h1(&self, x: f64) -> (f64, f64) {
        let (l, g, t) = (self.l, self.gamma, self.tau);
        let a = (10.0 * g - 14.0 * l) / (3.0 * t);
        let b = (5.0 * l - 3.0 * g) / (2.0 * t * t);
        let d = x - t;
        (
            -g * x * x + a * d * d * d + b * d * d * d * d,
            -2.0 * g * x + 3.0 * a * d * d + 4.0 * b * d * d * d,
        )
    }

    fn h2(&self, x: f64) -> (f64, f64) {
        let k = self.l + self.gamma;
        let u = (x - 2.0 * self.tau) / self.tau;
        (
            -self.gamma - k * (10.0 * u.powi(3) + 15.0 * u.powi(4) + 6.0 * u.powi(5)),
            -k * (30.0 * u * u + 60.0 * u.powi(3) + 30.0 * u.powi(4)) / self.tau,
        )
    }

    pub fn nu(&self) -> f64 {
        -self.h1(2.0 * self.tau).0 + 4.0 * self.l * self.tau * self.tau
    }

    /// `(value, gradient)` of the requested piece.
    pub fn piece(&self, x: &DVector<f64>, piece: ChainPiece) -> (f64, DVector<f64>) {
        let (l, t, n) = (self.l, self.tau, self.n);
        let mut v = 0.0;
        let mut g = DVector::zeros(n);
        let lead = |k: usize, v: &mut f64, g: &mut DVector<f64>| {
            for j in 0..k {
                *v += l * (x[j] - 4.0 * t).powi(2);
                g[j] = 2.0 * l * (x[j] - 4.0 * t);
            }
        };
        let tail = |from: usize, v: &mut f64, g: &mut DVector<f64>| {
            for j in from..n {
                *v += l * x[j] * x[j];
                g[j] = 2.0 * l * x[j];
            }
        };
        match piece {
            ChainPiece::Quadratic(i) => {
                lead(i - 1, &mut v, &mut g);
                v += -self.gamma * x[i - 1].powi(2);
                g[i - 1] = -2.0 * self.gamma * x[i - 1];
                tail(i, &mut v, &mut g);
                v -= (i - 1) as f64 * self.nu();
            }
            ChainPiece::Glue(i) => {
                lead(i - 1, &mut v, &mut g);
                let (a, da) = self.h1(x[i - 1]);
                v += a;
                g[i - 1] = da;
                if i < n {
                    let (b, db) = self.h2(x[i - 1]);
                    v += b * x[i].powi(2);
                    g[i - 1] += db * x[i].powi(2);
                    g[i] = 2.0 * b * x[i];
                    tail(i + 1, &mut v, &mut g);
                }
                v -= (i - 1) as f64 * self.nu();
            }
            ChainPiece::Final => {
                lead(n, &mut v, &mut g);
                v -= n as f64 * self.nu();
            }
        }
        (v, g)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs().max(b.abs()))
}

fn rel_vec(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / (1.0 + a.norm().max(b.norm()))
}

/// Worst relative disagreement, at points with one coordinate on a region
/// boundary (`τ` or `2τ`), between the two adjoining pieces and between each
/// piece and the library's value/gradient.
pub fn chain_boundary_mismatch(p: &minimax_core::problems::SaddleChainParams, trials: usize, seed: u64) -> f64 {
    use minimax_core::problems::{saddle_chain_grad, saddle_chain_value};
    let reference = ChainRef::new(p.n, p.l, p.gamma, p.tau);
    let t = p.tau;
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for i in 1..=p.n {
        let boundaries = [
            (t, ChainPiece::Quadratic(i), ChainPiece::Glue(i)),
            (
                2.0 * t,
                ChainPiece::Glue(i),
                if i < p.n { ChainPiece::Quadratic(i + 1) } else { ChainPiece::Final },
            ),
        ];
        for (b, left, right) in boundaries {
            for _ in 0..trials {
                let x = DVector::from_fn(p.n, |j, _| {
                    if j + 1 < i {
                        uniform(&mut r, 2.0 * t, 6.0 * t)
                    } else if j + 1 == i {
                        b
                    } else {
                        uniform(&mut r, 0.0, t)
                    }
                });
                let (vl, gl) = reference.piece(&x, left);
                let (vr, gr) = reference.piece(&x, right);
                let v = saddle_chain_value(&x, p).unwrap();
                let g = saddle_chain_grad(&x, p).unwrap();
                worst = worst
                    .max(rel(vl, vr))
                    .max(rel_vec(&gl, &gr))
                    .max(rel(v, vl))
                    .max(rel_vec(&g, &gl));
            }
        }
    }
    worst
}

/// Max `‖∇g‖` over the `n` saddle points and the minimizer.
pub fn chain_stationary_residual(sc: &minimax_core::problems::SaddleChain) -> f64 {
    use minimax_core::problems::saddle_chain_grad;
    let mut pts = sc.saddle_points();
    pts.push(sc.minimizer());
    assert_eq!(pts.len(), sc.params().n + 1);
    pts.iter()
        .map(|x| saddle_chain_grad(x, sc.params()).unwrap().norm())
        .fold(0.0, f64::max)
}

/// `(‖∇²g(x*) − 2L·I‖_max, every saddle has exactly one eigenvalue at −2γ
/// and no other eigenvalue ≤ 0)`.
pub fn chain_eigenstructure(sc: &minimax_core::problems::SaddleChain, tol: f64) -> (f64, bool) {
    use minimax_core::problems::saddle_chain_hess;
    let p = sc.params();
    let h = saddle_chain_hess(&sc.minimizer(), p).unwrap();
    let dev = (h - DMatrix::identity(p.n, p.n) * (2.0 * p.l)).amax();
    let saddles_ok = sc.saddle_points().iter().all(|x| {
        let eig = saddle_chain_hess(x, p).unwrap().symmetric_eigen().eigenvalues;
        let at = eig.iter().filter(|&&e| (e + 2.0 * p.gamma).abs() <= tol).count();
        let nonpos = eig.iter().filter(|&&e| e <= tol).count();
        at == 1 && nonpos == 1
    });
    (dev, saddles_ok)
}
