//! Python bindings for `minimax-core`: problem instances, the four outer
//! solvers, second-order certificates and the trust-region subproblem.
//!
//! Vectors and matrices are accepted as anything sequence-like (lists or
//! NumPy arrays) and returned as NumPy arrays.

use minimax_core::drivers::{
    Algorithm, SolverConfig, SolverOutcome, StationarityReport, certify as certify_point,
    default_certify_tol, run_algorithm, seeded_y0,
};
use minimax_core::oracle::{MinimaxProblem, assemble_reduced_hessian, validate_derivatives};
use minimax_core::problems::{AnyProblem, ProblemSpec};
use minimax_core::trsub::{self, TRProblem};
use nalgebra::{DMatrix, DVector};
use numpy::ndarray::Array2;
use numpy::{IntoPyArray, PyArray1, PyArray2};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyFloat, PyInt, PyList, PyString, PyTuple};

fn to_py_err(e: minimax_core::Error) -> PyErr {
    use minimax_core::Error as E;
    match e {
        E::InvalidConfig(_) | E::InvalidAccuracy(_) | E::DimensionMismatch { .. } | E::OutsideDomain => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn vector(v: Vec<f64>) -> DVector<f64> {
    DVector::from_vec(v)
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(PyValueError::new_err("matrix rows have different lengths"));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

fn vec_out<'py>(py: Python<'py>, v: &DVector<f64>) -> Bound<'py, PyArray1<f64>> {
    PyArray1::from_slice(py, v.as_slice())
}

fn mat_out<'py>(py: Python<'py>, m: &DMatrix<f64>) -> Bound<'py, PyArray2<f64>> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)]).into_pyarray(py)
}

fn parse_algorithm(name: &str) -> PyResult<Algorithm> {
    name.parse().map_err(to_py_err)
}

/// Converts keyword options into a TOML value so they go through the same
/// validation as experiment config files.
fn toml_value(obj: &Bound<'_, PyAny>) -> PyResult<toml::Value> {
    if obj.is_instance_of::<PyBool>() {
        Ok(toml::Value::Boolean(obj.extract()?))
    } else if obj.is_instance_of::<PyInt>() {
        Ok(toml::Value::Integer(obj.extract()?))
    } else if obj.is_instance_of::<PyFloat>() {
        Ok(toml::Value::Float(obj.extract()?))
    } else if obj.is_instance_of::<PyString>() {
        Ok(toml::Value::String(obj.extract()?))
    } else if let Ok(d) = obj.cast::<PyDict>() {
        Ok(toml::Value::Table(toml_table(d)?))
    } else if obj.is_instance_of::<PyList>() || obj.is_instance_of::<PyTuple>() {
        obj.try_iter()?
            .map(|item| toml_value(&item?))
            .collect::<PyResult<Vec<_>>>()
            .map(toml::Value::Array)
    } else {
        Err(PyValueError::new_err(format!(
            "unsupported option value {}",
            obj.repr()?
        )))
    }
}

fn toml_table(d: &Bound<'_, PyDict>) -> PyResult<toml::Table> {
    d.iter()
        .map(|(k, v)| Ok((k.extract::<String>()?, toml_value(&v)?)))
        .collect()
}

/// Solver settings from defaults, `epsilon` and keyword overrides.
fn solver_config(epsilon: f64, seed: u64, options: toml::Table) -> Result<SolverConfig, String> {
    let mut table = toml::Table::try_from(SolverConfig::default()).map_err(|e| e.to_string())?;
    table.insert("epsilon".into(), epsilon.into());
    for (k, v) in options {
        match (table.get_mut(&k), v) {
            (Some(toml::Value::Table(base)), toml::Value::Table(over)) => base.extend(over),
            (_, v) => {
                table.insert(k, v);
            }
        }
    }
    let mut cfg: SolverConfig = table.try_into().map_err(|e: toml::de::Error| e.message().to_string())?;
    cfg.seed = seed;
    Ok(cfg)
}

fn report_dict<'py>(py: Python<'py>, r: &StationarityReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("grad_norm", r.grad_norm)?;
    d.set_item("min_eig", r.min_eig)?;
    d.set_item("xi_bound", r.xi_bound)?;
    d.set_item("theta_bound", r.theta_bound)?;
    d.set_item("satisfied", r.satisfied)?;
    d.set_item("grad_slack", r.grad_slack)?;
    d.set_item("eig_slack", r.eig_slack)?;
    d.set_item("inner_residual", r.inner_residual)?;
    Ok(d)
}

fn outcome_dict<'py>(py: Python<'py>, out: &SolverOutcome) -> PyResult<Bound<'py, PyDict>> {
    let col = |f: &dyn Fn(&minimax_core::drivers::IterationRecord) -> f64| -> Bound<'py, PyArray1<f64>> {
        PyArray1::from_vec(py, out.trace.iter().map(f).collect())
    };
    let trace = PyDict::new(py);
    trace.set_item("t", col(&|r| r.t as f64))?;
    trace.set_item("x_norm", col(&|r| r.x_norm))?;
    trace.set_item("g_norm", col(&|r| r.g_norm))?;
    trace.set_item("lambda", col(&|r| r.lambda.unwrap_or(f64::NAN)))?;
    trace.set_item("lambda_min_H", col(&|r| r.lambda_min_h.unwrap_or(f64::NAN)))?;
    trace.set_item("step_norm", col(&|r| r.step_norm))?;
    trace.set_item(
        "step_kind",
        out.trace.iter().map(|r| r.step_kind.name()).collect::<Vec<_>>(),
    )?;
    trace.set_item("P_estimate", col(&|r| r.p_estimate))?;
    trace.set_item("inner_iters", col(&|r| r.inner_iters as f64))?;
    trace.set_item("backtracks", col(&|r| r.backtracks as f64))?;
    trace.set_item("projected", out.trace.iter().map(|r| r.projected).collect::<Vec<_>>())?;
    trace.set_item("wall_time_s", col(&|r| r.wall_time_s))?;

    let d = PyDict::new(py);
    d.set_item("algorithm", out.algorithm.name())?;
    d.set_item("x", vec_out(py, &out.x))?;
    d.set_item("y", vec_out(py, &out.y))?;
    d.set_item("iterations", out.iterations())?;
    d.set_item("converged", out.converged())?;
    d.set_item("termination", out.termination.name())?;
    d.set_item("inner_iters_total", out.inner_iters_total)?;
    d.set_item("inner_truncations", out.inner_truncations)?;
    d.set_item("wall_time_s", out.wall_time_s)?;
    d.set_item("report", report_dict(py, &out.report)?)?;
    d.set_item("trace", trace)?;
    if !out.iterates.is_empty() {
        let n = out.x.len();
        let rows = Array2::from_shape_fn((out.iterates.len(), n), |(i, j)| out.iterates[i][j]);
        d.set_item("iterates", rows.into_pyarray(py))?;
    }
    Ok(d)
}

/// `(P(x), ∇P(x), ∇²P(x))`.
type Envelope<'py> = (f64, Bound<'py, PyArray1<f64>>, Bound<'py, PyArray2<f64>>);

/// A benchmark problem instance.
#[pyclass(name = "Problem", frozen)]
struct PyProblem {
    spec: ProblemSpec,
    inner: AnyProblem,
}

impl PyProblem {
    fn build(spec: ProblemSpec) -> PyResult<Self> {
        let inner = spec.build().map_err(to_py_err)?;
        let spec = spec.resolved(&inner);
        Ok(Self { spec, inner })
    }

    fn check_x(&self, x: &DVector<f64>) -> PyResult<()> {
        if x.len() != self.inner.dim_x() {
            return Err(PyValueError::new_err(format!(
                "x has length {}, problem has n = {}",
                x.len(),
                self.inner.dim_x()
            )));
        }
        Ok(())
    }
}

#[pymethods]
impl PyProblem {
    /// Saddle chain with `n` sequential saddle points, lifted with `−½‖y‖²`.
    #[staticmethod]
    #[pyo3(signature = (n, m, l = 1.0, gamma = 1.0, tau = std::f64::consts::E))]
    fn saddle_chain(n: usize, m: usize, l: f64, gamma: f64, tau: f64) -> PyResult<Self> {
        let ProblemSpec::SaddleChain { n, m, l, gamma, nu, ell, mu, rho, coupling, .. } =
            ProblemSpec::saddle_chain(n, m, l, gamma)
        else {
            unreachable!()
        };
        Self::build(ProblemSpec::SaddleChain { n, m, l, gamma, tau, nu, ell, mu, rho, coupling })
    }

    /// Random quadratic `½xᵀAx + xᵀBy − ½yᵀCy`.
    #[staticmethod]
    #[pyo3(signature = (seed, n, m, rho = None))]
    fn quadratic(seed: u64, n: usize, m: usize, rho: Option<f64>) -> PyResult<Self> {
        Self::build(ProblemSpec::Quadratic { seed, n, m, rho })
    }

    /// Random member of the cosine-plus-quadratic family with a saddle at 0.
    #[staticmethod]
    #[pyo3(signature = (seed, n, m, amplitude = 1.0))]
    fn cosine_saddle(seed: u64, n: usize, m: usize, amplitude: f64) -> PyResult<Self> {
        Self::build(ProblemSpec::CosineSaddle { seed, n, m, amplitude })
    }

    /// Parses an instance file, or an experiment config's `[problem]` table.
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let table: toml::Table = toml::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let table = match table.get("problem") {
            Some(toml::Value::Table(t)) => t.clone(),
            _ => table,
        };
        let spec: ProblemSpec = table
            .try_into()
            .map_err(|e: toml::de::Error| PyValueError::new_err(e.message().to_string()))?;
        Self::build(spec)
    }

    /// Instance file text with every derived constant filled in.
    fn to_toml(&self) -> String {
        self.spec.to_toml()
    }

    #[getter]
    fn dim_x(&self) -> usize {
        self.inner.dim_x()
    }

    #[getter]
    fn dim_y(&self) -> usize {
        self.inner.dim_y()
    }

    /// `ℓ, μ, ρ, κ` and the derived envelope constants `L1, L_H, L2`.
    fn constants<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let c = self.inner.constants();
        let d = self.inner.derived_constants();
        let out = PyDict::new(py);
        out.set_item("ell", c.ell)?;
        out.set_item("mu", c.mu)?;
        out.set_item("rho", c.rho)?;
        out.set_item("kappa", c.kappa())?;
        out.set_item("l1", d.l1)?;
        out.set_item("l_h", d.l_h)?;
        out.set_item("l2", d.l2)?;
        Ok(out)
    }

    fn value(&self, x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
        self.inner.value(&vector(x), &vector(y)).map_err(to_py_err)
    }

    fn grad_x<'py>(&self, py: Python<'py>, x: Vec<f64>, y: Vec<f64>) -> PyResult<Bound<'py, PyArray1<f64>>> {
        let g = self.inner.grad_x(&vector(x), &vector(y)).map_err(to_py_err)?;
        Ok(vec_out(py, &g))
    }

    fn grad_y<'py>(&self, py: Python<'py>, x: Vec<f64>, y: Vec<f64>) -> PyResult<Bound<'py, PyArray1<f64>>> {
        let g = self.inner.grad_y(&vector(x), &vector(y)).map_err(to_py_err)?;
        Ok(vec_out(py, &g))
    }

    /// `∇²ₓₓf − ∇²ₓᵧf(∇²ᵧᵧf)⁻¹∇²ᵧₓf` at `(x, y)`.
    fn reduced_hessian<'py>(&self, py: Python<'py>, x: Vec<f64>, y: Vec<f64>) -> PyResult<Bound<'py, PyArray2<f64>>> {
        let h = assemble_reduced_hessian(&self.inner, &vector(x), &vector(y)).map_err(to_py_err)?;
        Ok(mat_out(py, &h))
    }

    /// `(P(x), ∇P(x), ∇²P(x))` from the closed form, or `None`.
    fn envelope<'py>(
        &self,
        py: Python<'py>,
        x: Vec<f64>,
    ) -> PyResult<Option<Envelope<'py>>> {
        let x = vector(x);
        self.check_x(&x)?;
        let Some(cf) = self.inner.closed_form() else { return Ok(None) };
        let v = cf.envelope_value(&x).map_err(to_py_err)?;
        let g = cf.envelope_grad(&x).map_err(to_py_err)?;
        let h = cf.envelope_hess(&x).map_err(to_py_err)?;
        Ok(Some((v, vec_out(py, &g), mat_out(py, &h))))
    }

    /// `min P` when known in closed form.
    fn optimal_value(&self) -> Option<f64> {
        self.inner.closed_form().and_then(|c| c.optimal_value())
    }

    fn known_minimizer<'py>(&self, py: Python<'py>) -> Option<Bound<'py, PyArray1<f64>>> {
        self.inner.known_minimizer().map(|x| vec_out(py, &x))
    }

    fn default_x0<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray1<f64>> {
        vec_out(py, &self.inner.default_x0())
    }

    fn __repr__(&self) -> String {
        format!("Problem({})", self.spec.to_toml().trim().replace('\n', ", "))
    }
}

/// Runs one solver. Extra keyword arguments are solver settings, e.g.
/// `max_outer_iters=500`, `sigma=0.0`, `radius_rule="fixed"`,
/// `subproblem={"cg": 20}` or `inner={"tighten": 100.0}`.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (problem, algorithm = "grtr", x0 = None, y0 = None, epsilon = 1e-2, seed = 0, **options))]
fn solve<'py>(
    py: Python<'py>,
    problem: &PyProblem,
    algorithm: &str,
    x0: Option<Vec<f64>>,
    y0: Option<Vec<f64>>,
    epsilon: f64,
    seed: u64,
    options: Option<&Bound<'py, PyDict>>,
) -> PyResult<Bound<'py, PyDict>> {
    let alg = parse_algorithm(algorithm)?;
    let options = options.map(toml_table).transpose()?.unwrap_or_default();
    let cfg = solver_config(epsilon, seed, options).map_err(PyValueError::new_err)?;
    let p = &problem.inner;
    let x0 = x0.map(vector).unwrap_or_else(|| p.default_x0());
    let y0 = y0.map(vector).unwrap_or_else(|| seeded_y0(p.dim_y(), seed));
    let out = py
        .detach(|| run_algorithm(alg, p, &x0, &y0, &cfg))
        .map_err(to_py_err)?;
    outcome_dict(py, &out)
}

/// Second-order stationarity certificate at `x`.
#[pyfunction]
#[pyo3(signature = (problem, x, epsilon, algorithm = "grtr", inner_tol = None))]
fn certify<'py>(
    py: Python<'py>,
    problem: &PyProblem,
    x: Vec<f64>,
    epsilon: f64,
    algorithm: &str,
    inner_tol: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let alg = parse_algorithm(algorithm)?;
    let x = vector(x);
    problem.check_x(&x)?;
    let p = &problem.inner;
    let tol = inner_tol.unwrap_or_else(|| default_certify_tol(p, epsilon));
    let r = certify_point(p, &x, epsilon, tol, alg).map_err(to_py_err)?;
    report_dict(py, &r)
}

/// Trust-region subproblem `min gᵀs + ½sᵀ(H + reg·I)s, ‖s‖ ≤ radius`.
///
/// `method` is `"exact"` or `"cg"`; `max_iters` only applies to CG.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (h, g, radius, reg = 0.0, method = "exact", tol = 1e-12, max_iters = None))]
fn solve_tr<'py>(
    py: Python<'py>,
    h: Vec<Vec<f64>>,
    g: Vec<f64>,
    radius: f64,
    reg: f64,
    method: &str,
    tol: f64,
    max_iters: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let g = vector(g);
    let p = TRProblem::new(matrix(h)?, g.clone(), reg, radius).map_err(to_py_err)?;
    let sol = match method {
        "exact" => trsub::solve_tr_exact(&p, tol),
        "cg" => trsub::solve_tr_cg(&p, max_iters.unwrap_or(g.len()), tol),
        other => return Err(PyValueError::new_err(format!("unknown method '{other}'"))),
    }
    .map_err(to_py_err)?;
    let d = PyDict::new(py);
    d.set_item("s", vec_out(py, &sol.s))?;
    d.set_item("lambda", sol.lambda)?;
    d.set_item("model", p.model(&sol.s))?;
    d.set_item("on_boundary", sol.on_boundary)?;
    d.set_item("hard_case", sol.hard_case)?;
    d.set_item("kkt_residual", sol.kkt_residual)?;
    Ok(d)
}

/// Smallest eigenpair of a symmetric matrix; the vector is oriented so
/// that `orient·v ≤ 0`.
#[pyfunction]
#[pyo3(signature = (h, orient = None))]
fn min_eigpair<'py>(
    py: Python<'py>,
    h: Vec<Vec<f64>>,
    orient: Option<Vec<f64>>,
) -> PyResult<(f64, Bound<'py, PyArray1<f64>>)> {
    let h = matrix(h)?;
    let orient = orient.map(vector).unwrap_or_else(|| DVector::zeros(h.nrows()));
    let e = trsub::min_eigpair(&h, &orient).map_err(to_py_err)?;
    Ok((e.value, vec_out(py, &e.vector)))
}

/// Worst relative finite-difference error of each derivative block at `(x, y)`.
#[pyfunction]
#[pyo3(signature = (problem, x, y, step = 1e-6))]
fn check_derivatives<'py>(
    py: Python<'py>,
    problem: &PyProblem,
    x: Vec<f64>,
    y: Vec<f64>,
    step: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let z = DVector::from_iterator(x.len() + y.len(), x.into_iter().chain(y));
    let r = validate_derivatives(&problem.inner, &z, step).map_err(to_py_err)?;
    let d = PyDict::new(py);
    d.set_item("grad_x", r.grad_x)?;
    d.set_item("grad_y", r.grad_y)?;
    d.set_item("hess_xx", r.hess_xx)?;
    d.set_item("hess_xy", r.hess_xy)?;
    d.set_item("hess_yx", r.hess_yx)?;
    d.set_item("hess_yy", r.hess_yy)?;
    Ok(d)
}

#[pymodule]
fn minimax_sosp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProblem>()?;
    m.add("ALGORITHMS", Algorithm::ALL.iter().map(|a| a.name()).collect::<Vec<_>>())?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(certify, m)?)?;
    m.add_function(wrap_pyfunction!(solve_tr, m)?)?;
    m.add_function(wrap_pyfunction!(min_eigpair, m)?)?;
    m.add_function(wrap_pyfunction!(check_derivatives, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use minimax_core::drivers::{RadiusRule, SubproblemMode};

    #[test]
    fn keyword_options_merge_over_defaults() {
        let mut opts = toml::Table::new();
        opts.insert("radius_rule".into(), "fixed".into());
        opts.insert("max_outer_iters".into(), 50.into());
        let mut sub = toml::Table::new();
        sub.insert("cg".into(), 7.into());
        opts.insert("subproblem".into(), sub.into());
        let mut inner = toml::Table::new();
        inner.insert("tighten".into(), 100.0.into());
        opts.insert("inner".into(), inner.into());
        let cfg = solver_config(1e-3, 4, opts).unwrap();
        assert_eq!(cfg.epsilon, 1e-3);
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.radius_rule, RadiusRule::Fixed);
        assert_eq!(cfg.max_outer_iters, Some(50));
        assert_eq!(cfg.subproblem, SubproblemMode::Cg(7));
        assert_eq!(cfg.inner.tighten, 100.0);
        // Untouched inner fields keep their defaults.
        assert_eq!(cfg.inner.max_iters, SolverConfig::default().inner.max_iters);
    }

    #[test]
    fn unknown_options_are_rejected() {
        let mut opts = toml::Table::new();
        opts.insert("sigmaa".into(), 1.0.into());
        assert!(solver_config(1e-2, 0, opts).is_err());
    }

    #[test]
    fn ragged_matrices_are_rejected() {
        assert!(matrix(vec![vec![1.0, 2.0], vec![3.0]]).is_err());
        assert_eq!(matrix(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap()[(1, 0)], 3.0);
    }
}
