mod common;

use common::*;
use minimax_core::Error;
use minimax_core::inner::{InnerConfig, ascend};
use minimax_core::oracle::{
    ClosedFormEnvelope, MinimaxProblem, ProblemConstants, assemble_reduced_hessian,
    sample_assumption_violations, validate_derivatives,
};
use minimax_core::problems::{CosineSaddle, QuadraticProblem, SaddleChain, SaddleChainParams};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn dv(v: &[f64]) -> DVector<f64> {
    DVector::from_row_slice(v)
}

fn m1(v: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, v)
}

fn stack(x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(x.len() + y.len(), x.iter().chain(y.iter()).copied())
}

#[test]
fn reduced_hessian_closed_form_examples() {
    // f = x·y − y²/2 → H = 1.
    let q = QuadraticProblem::new(m1(0.0), m1(1.0), m1(1.0)).unwrap();
    let h = assemble_reduced_hessian(&q, &dv(&[0.3]), &dv(&[-2.0])).unwrap();
    assert_eq!(h[(0, 0)], 1.0);
    // f = −‖y‖²/2 with no coupling → H = 0.
    let q = QuadraticProblem::new(DMatrix::zeros(2, 2), DMatrix::zeros(2, 3), DMatrix::identity(3, 3)).unwrap();
    let h = assemble_reduced_hessian(&q, &dv(&[1.0, 2.0]), &dv(&[0.0, 1.0, 0.0])).unwrap();
    assert_eq!(h, DMatrix::zeros(2, 2));
}

#[test]
fn reduced_hessian_errors() {
    let q = QuadraticProblem::random(1, 3, 2).unwrap();
    assert!(matches!(
        assemble_reduced_hessian(&q, &dv(&[1.0]), &dv(&[0.0, 0.0])),
        Err(Error::DimensionMismatch { .. })
    ));

    /// yy-block with a zero eigenvalue.
    struct Flat;
    impl MinimaxProblem for Flat {
        fn dim_x(&self) -> usize { 1 }
        fn dim_y(&self) -> usize { 1 }
        fn value(&self, _: &DVector<f64>, _: &DVector<f64>) -> minimax_core::Result<f64> { Ok(0.0) }
        fn grad_x(&self, _: &DVector<f64>, _: &DVector<f64>) -> minimax_core::Result<DVector<f64>> { Ok(dv(&[0.0])) }
        fn grad_y(&self, _: &DVector<f64>, _: &DVector<f64>) -> minimax_core::Result<DVector<f64>> { Ok(dv(&[0.0])) }
        fn hess_xx(&self, _: &DVector<f64>, _: &DVector<f64>) -> minimax_core::Result<DMatrix<f64>> { Ok(m1(0.0)) }
        fn hess_xy(&self, _: &DVector<f64>, _: &DVector<f64>) -> minimax_core::Result<DMatrix<f64>> { Ok(m1(1.0)) }
        fn hess_yy(&self, _: &DVector<f64>, _: &DVector<f64>) -> minimax_core::Result<DMatrix<f64>> { Ok(m1(0.0)) }
        fn constants(&self) -> ProblemConstants { ProblemConstants::new(1.0, 1.0, 1.0).unwrap() }
    }
    assert_eq!(
        assemble_reduced_hessian(&Flat, &dv(&[0.0]), &dv(&[0.0])),
        Err(Error::SingularYYBlock)
    );
}

#[test]
fn random_quadratic_matches_independent_schur_complement() {
    for seed in 0..20 {
        let q = QuadraticProblem::random(seed, 3, 2).unwrap();
        let s_ref = schur_reference(q.a(), q.b(), q.c());
        let mut r = rng(seed);
        let x = DVector::from_fn(3, |_, _| normal(&mut r));
        let ys = q.y_star(&x).unwrap();
        let h = assemble_reduced_hessian(&q, &x, &ys).unwrap();
        assert!((&h - &s_ref).amax() <= 1e-10);
        assert_eq!(h, h.transpose());
        let g = q.grad_x(&x, &ys).unwrap();
        assert!((&g - &s_ref * &x).amax() <= 1e-10);
        let p_ref = 0.5 * x.dot(&(&s_ref * &x));
        assert!((q.envelope_value(&x).unwrap() - p_ref).abs() <= 1e-10 * (1.0 + p_ref.abs()));
    }
}

/// `∇P = ∇ₓf(x, y*(x))` and `∇²P = H(x, y*(x))` against finite differences
/// of the closed-form envelope.
fn check_envelope_identities(p: &dyn MinimaxProblem, cf: &dyn ClosedFormEnvelope, x: &DVector<f64>) {
    let ys = cf.y_star(x).unwrap();
    let g = p.grad_x(x, &ys).unwrap();
    let fd_g = fd_gradient(&|z| cf.envelope_value(z).unwrap(), x, 1e-5);
    assert!((&g - &fd_g).norm() <= 1e-5 * (1.0 + g.norm()), "{g} vs {fd_g}");
    let h = assemble_reduced_hessian(p, x, &ys).unwrap();
    let fd_h = fd_jacobian(&|z| cf.envelope_grad(z).unwrap(), x, 1e-5);
    assert!((&h - &fd_h).norm() <= 1e-4 * (1.0 + h.norm()), "{h} vs {fd_h}");
}

#[test]
fn envelope_identities_hold_on_all_closed_form_families() {
    let mut r = rng(3);
    for seed in 0..10 {
        let q = QuadraticProblem::random(seed, 4, 3).unwrap();
        let x = DVector::from_fn(4, |_, _| normal(&mut r));
        check_envelope_identities(&q, &q, &x);
        let c = CosineSaddle::random(seed, 4, 2, 1.5).unwrap();
        let x = DVector::from_fn(4, |_, _| normal(&mut r));
        check_envelope_identities(&c, &c, &x);
    }
}

#[test]
fn derivative_checks() {
    let q = QuadraticProblem::random(9, 4, 3).unwrap();
    let mut r = rng(9);
    let z = DVector::from_fn(7, |_, _| normal(&mut r));
    let rep = validate_derivatives(&q, &z, 1e-6 * (1.0 + z.norm())).unwrap();
    assert!(rep.max() <= 1e-6, "{rep:?}");

    let sc = SaddleChain::new(SaddleChainParams::new(10, 5, 1.0, 1.0).unwrap()).unwrap();
    // Interior of region type1(1).
    let mut x = DVector::from_element(10, 0.5);
    x[0] = 1.3;
    let y = DVector::from_fn(5, |_, _| normal(&mut r));
    let rep = validate_derivatives(&sc, &stack(&x, &y), 1e-5).unwrap();
    assert!(rep.max() <= 1e-4, "{rep:?}");
    assert!(validate_derivatives(&q, &z, 0.0).is_err());
}

#[test]
fn corrupted_gradient_is_detected() {
    struct Corrupt(QuadraticProblem);
    impl MinimaxProblem for Corrupt {
        fn dim_x(&self) -> usize { self.0.dim_x() }
        fn dim_y(&self) -> usize { self.0.dim_y() }
        fn value(&self, x: &DVector<f64>, y: &DVector<f64>) -> minimax_core::Result<f64> { self.0.value(x, y) }
        fn grad_x(&self, x: &DVector<f64>, y: &DVector<f64>) -> minimax_core::Result<DVector<f64>> {
            let mut g = self.0.grad_x(x, y)?;
            g[0] += 1.0;
            Ok(g)
        }
        fn grad_y(&self, x: &DVector<f64>, y: &DVector<f64>) -> minimax_core::Result<DVector<f64>> { self.0.grad_y(x, y) }
        fn hess_xx(&self, x: &DVector<f64>, y: &DVector<f64>) -> minimax_core::Result<DMatrix<f64>> { self.0.hess_xx(x, y) }
        fn hess_xy(&self, x: &DVector<f64>, y: &DVector<f64>) -> minimax_core::Result<DMatrix<f64>> { self.0.hess_xy(x, y) }
        fn hess_yy(&self, x: &DVector<f64>, y: &DVector<f64>) -> minimax_core::Result<DMatrix<f64>> { self.0.hess_yy(x, y) }
        fn constants(&self) -> ProblemConstants { self.0.constants() }
    }
    let p = Corrupt(QuadraticProblem::random(2, 3, 2).unwrap());
    // At the origin ∇ₓf = 0, so the relative error is the full offset.
    let z = DVector::zeros(5);
    let rep = validate_derivatives(&p, &z, 1e-6).unwrap();
    assert!(rep.grad_x >= 0.5, "{rep:?}");
}

#[test]
fn declared_constants_hold_under_sampling() {
    for seed in 0..5 {
        let q = QuadraticProblem::random(seed, 4, 3).unwrap();
        let v = sample_assumption_violations(&q, &DVector::zeros(4), &DVector::zeros(3), 1.0, 50, seed).unwrap();
        assert!(v.is_empty(), "{v:?}");
    }
    let sc = SaddleChain::new(SaddleChainParams::new(4, 2, 1.0, 1.0).unwrap()).unwrap();
    let v = sample_assumption_violations(&sc, &DVector::from_element(4, 0.5), &DVector::zeros(2), 0.5, 50, 1).unwrap();
    assert!(v.is_empty(), "{v:?}");
}

/// `f(x, y) = −½ Σ cᵢ(yᵢ − xᵢ)²`: `y*(x) = x`.
struct Diag {
    c: Vec<f64>,
}

impl MinimaxProblem for Diag {
    fn dim_x(&self) -> usize { self.c.len() }
    fn dim_y(&self) -> usize { self.c.len() }
    fn value(&self, x: &DVector<f64>, y: &DVector<f64>) -> minimax_core::Result<f64> {
        Ok(-0.5 * (0..self.c.len()).map(|i| self.c[i] * (y[i] - x[i]).powi(2)).sum::<f64>())
    }
    fn grad_x(&self, x: &DVector<f64>, y: &DVector<f64>) -> minimax_core::Result<DVector<f64>> {
        Ok(DVector::from_fn(self.c.len(), |i, _| self.c[i] * (y[i] - x[i])))
    }
    fn grad_y(&self, x: &DVector<f64>, y: &DVector<f64>) -> minimax_core::Result<DVector<f64>> {
        Ok(DVector::from_fn(self.c.len(), |i, _| -self.c[i] * (y[i] - x[i])))
    }
    fn hess_xx(&self, _: &DVector<f64>, _: &DVector<f64>) -> minimax_core::Result<DMatrix<f64>> {
        Ok(-DMatrix::from_diagonal(&DVector::from_vec(self.c.clone())))
    }
    fn hess_xy(&self, _: &DVector<f64>, _: &DVector<f64>) -> minimax_core::Result<DMatrix<f64>> {
        Ok(DMatrix::from_diagonal(&DVector::from_vec(self.c.clone())))
    }
    fn hess_yy(&self, _: &DVector<f64>, _: &DVector<f64>) -> minimax_core::Result<DMatrix<f64>> {
        Ok(-DMatrix::from_diagonal(&DVector::from_vec(self.c.clone())))
    }
    fn constants(&self) -> ProblemConstants {
        let hi = self.c.iter().cloned().fold(0.0, f64::max);
        let lo = self.c.iter().cloned().fold(f64::INFINITY, f64::min);
        ProblemConstants::new(2.0 * hi, lo, 1.0).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ascent_is_monotone_and_linear(
        c in prop::collection::vec(0.5f64..4.0, 1..6),
        seed in any::<u64>(),
    ) {
        let p = Diag { c: c.clone() };
        let k = c.len();
        let mut r = rng(seed);
        let x = DVector::from_fn(k, |_, _| normal(&mut r));
        let y0 = DVector::from_fn(k, |_, _| 3.0 * normal(&mut r));
        let pc = p.constants();
        let mut cfg = InnerConfig::new(&pc, 1e-12, 1e-12);
        let rate = c.iter().map(|ci| (1.0 - cfg.eta_y * ci).abs()).fold(0.0, f64::max);
        let mut y = y0.clone();
        let mut prev = p.value(&x, &y).unwrap();
        for k in 1..30 {
            cfg.max_iters = 1;
            let res = ascend(&p, &x, &y, &cfg).unwrap();
            if res.iters == 0 {
                // Residual target reached; no further steps are taken.
                break;
            }
            y = res.y;
            let v = p.value(&x, &y).unwrap();
            prop_assert!(v >= prev - 1e-12 * (1.0 + prev.abs()));
            prev = v;
            let floor = 1e-14 * (1.0 + x.norm() + y0.norm());
            let bound = rate.powi(k) * (&y0 - &x).norm() * (1.0 + 1e-10) + floor;
            prop_assert!((&y - &x).norm() <= bound, "k={} d={} bound={} iters={} rate={}", k, (&y - &x).norm(), bound, res.iters, rate);
        }
    }

    #[test]
    fn untruncated_inner_solve_is_within_a(seed in 0u64..1000, eps in 1e-6f64..1e-2) {
        let q = QuadraticProblem::random(seed, 3, 3).unwrap();
        let mut r = rng(seed);
        let x = DVector::from_fn(3, |_, _| normal(&mut r));
        let cfg = InnerConfig::new(&q.constants(), eps, eps);
        let res = ascend(&q, &x, &DVector::zeros(3), &cfg).unwrap();
        prop_assert!(!res.truncated);
        let a = cfg.accuracy_radius(&q.constants(), &q.derived_constants());
        let dist = (&res.y - q.y_star(&x).unwrap()).norm();
        prop_assert!(dist <= res.residual / q.constants().mu * (1.0 + 1e-9));
        prop_assert!(dist <= a * (1.0 + 1e-9));
    }

    #[test]
    fn reduced_hessian_is_symmetric(seed in any::<u64>(), n in 1usize..6, m in 1usize..5) {
        let q = QuadraticProblem::random(seed, n, m).unwrap();
        let mut r = rng(seed);
        let x = DVector::from_fn(n, |_, _| normal(&mut r));
        let y = DVector::from_fn(m, |_, _| normal(&mut r));
        let h = assemble_reduced_hessian(&q, &x, &y).unwrap();
        prop_assert_eq!(&h, &h.transpose());
    }
}
