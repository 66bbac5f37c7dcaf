//! Benchmark problem instances and their instance-file description.

mod cosine;
mod quadratic;
mod saddle_chain;

pub use cosine::CosineSaddle;
pub use quadratic::QuadraticProblem;
pub use saddle_chain::{
    CONSTANT_SAFETY, RegionLabel, SaddleChain, SaddleChainParams, classify_region,
    estimate_derivative_bounds, sample_interior_point, saddle_chain_grad, saddle_chain_hess, saddle_chain_value,
};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::std_normal;
use crate::oracle::{ClosedFormEnvelope, Coupling, MinimaxProblem, ProblemConstants};

/// Key-value description of a problem instance, as stored in instance files
/// and in the `[problem]` table of experiment configs.
///
/// Derived fields (`nu`, `ell`, `mu`, `rho`, `coupling`) are optional on input
/// and always present in files written by [`ProblemSpec::resolved`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    SaddleChain {
        n: usize,
        m: usize,
        #[serde(rename = "L")]
        l: f64,
        gamma: f64,
        #[serde(default = "default_tau")]
        tau: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        nu: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ell: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mu: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rho: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        coupling: Option<Coupling>,
    },
    Quadratic {
        seed: u64,
        n: usize,
        m: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rho: Option<f64>,
    },
    CosineSaddle {
        seed: u64,
        n: usize,
        m: usize,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
    },
}

fn default_tau() -> f64 {
    std::f64::consts::E
}

fn default_amplitude() -> f64 {
    1.0
}

impl ProblemSpec {
    pub fn saddle_chain(n: usize, m: usize, l: f64, gamma: f64) -> Self {
        ProblemSpec::SaddleChain {
            n,
            m,
            l,
            gamma,
            tau: default_tau(),
            nu: None,
            ell: None,
            mu: None,
            rho: None,
            coupling: None,
        }
    }

    pub fn build(&self) -> Result<AnyProblem> {
        match *self {
            ProblemSpec::SaddleChain {
                n,
                m,
                l,
                gamma,
                tau,
                nu,
                ell,
                mu,
                rho,
                coupling,
            } => {
                let params = SaddleChainParams::with_tau(n, m, l, gamma, tau)?;
                if let Some(nu) = nu {
                    let expect = params.nu();
                    if (nu - expect).abs() > 1e-9 * (1.0 + expect.abs()) {
                        return Err(Error::InvalidConfig(format!(
                            "nu = {nu} does not match -h1(2 tau) + 4 L tau^2 = {expect}"
                        )));
                    }
                }
                if let Some(mu) = mu
                    && mu != 1.0
                {
                    return Err(Error::InvalidConfig(format!(
                        "saddle chain has mu = 1 (got {mu})"
                    )));
                }
                if coupling == Some(Coupling::General) {
                    return Err(Error::InvalidConfig(
                        "saddle chain is decoupled: y*(x) = 0".into(),
                    ));
                }
                let sc = match (ell, rho) {
                    (Some(ell), Some(rho)) => SaddleChain::with_bounds(params, ell, rho)?,
                    (None, None) => SaddleChain::new(params)?,
                    _ => {
                        return Err(Error::InvalidConfig(
                            "supply both ell and rho, or neither".into(),
                        ));
                    }
                };
                Ok(AnyProblem::SaddleChain(sc))
            }
            ProblemSpec::Quadratic { seed, n, m, rho } => {
                let mut q = QuadraticProblem::random(seed, n, m)?;
                if let Some(rho) = rho {
                    q = q.with_rho(rho)?;
                }
                Ok(AnyProblem::Quadratic(q))
            }
            ProblemSpec::CosineSaddle {
                seed,
                n,
                m,
                amplitude,
            } => Ok(AnyProblem::CosineSaddle(CosineSaddle::random(
                seed, n, m, amplitude,
            )?)),
        }
    }

    /// Same instance with every derived field filled in from `built`.
    pub fn resolved(&self, built: &AnyProblem) -> Self {
        match (self, built) {
            (ProblemSpec::SaddleChain { .. }, AnyProblem::SaddleChain(sc)) => {
                let p = sc.params();
                let c = sc.constants();
                ProblemSpec::SaddleChain {
                    n: p.n,
                    m: p.m,
                    l: p.l,
                    gamma: p.gamma,
                    tau: p.tau,
                    nu: Some(sc.nu()),
                    ell: Some(sc.ell_g()),
                    mu: Some(c.mu),
                    rho: Some(sc.rho_g()),
                    coupling: Some(Coupling::Decoupled),
                }
            }
            (ProblemSpec::Quadratic { seed, n, m, .. }, AnyProblem::Quadratic(q)) => {
                ProblemSpec::Quadratic {
                    seed: *seed,
                    n: *n,
                    m: *m,
                    rho: Some(q.constants().rho),
                }
            }
            _ => self.clone(),
        }
    }

    pub fn from_toml(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("problem spec serializes")
    }
}

/// Any of the built-in problems.
#[derive(Debug, Clone)]
pub enum AnyProblem {
    SaddleChain(SaddleChain),
    Quadratic(QuadraticProblem),
    CosineSaddle(CosineSaddle),
}

impl AnyProblem {
    /// Starting point used by experiments: `(10⁻³, …, 10⁻³)`, next to the
    /// saddle at the origin.
    pub fn default_x0(&self) -> DVector<f64> {
        DVector::from_element(self.dim_x(), 1e-3)
    }

    /// Seeded random point `(x, y)` in the interior of the domain: region
    /// interiors for the saddle chain, standard normal otherwise; `y` is
    /// always standard normal.
    pub fn sample_point(&self, seed: u64) -> (DVector<f64>, DVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = match self {
            AnyProblem::SaddleChain(sc) => {
                let p = sc.params();
                sample_interior_point(p, 1e-3 * p.tau, &mut rng)
            }
            _ => DVector::from_fn(self.dim_x(), |_, _| std_normal(&mut rng)),
        };
        let y = DVector::from_fn(self.dim_y(), |_, _| std_normal(&mut rng));
        (x, y)
    }

    /// Minimizer of `P`, when known in closed form.
    pub fn known_minimizer(&self) -> Option<DVector<f64>> {
        match self {
            AnyProblem::SaddleChain(sc) => Some(sc.minimizer()),
            AnyProblem::CosineSaddle(c) => {
                let mut x = DVector::zeros(c.dim_x());
                x[0] = std::f64::consts::PI;
                Some(x)
            }
            AnyProblem::Quadratic(q) => {
                q.optimal_value().map(|_| DVector::zeros(q.dim_x()))
            }
        }
    }
}

macro_rules! delegate {
    ($self:ident, $p:ident => $e:expr) => {
        match $self {
            AnyProblem::SaddleChain($p) => $e,
            AnyProblem::Quadratic($p) => $e,
            AnyProblem::CosineSaddle($p) => $e,
        }
    };
}

impl MinimaxProblem for AnyProblem {
    fn dim_x(&self) -> usize {
        delegate!(self, p => p.dim_x())
    }
    fn dim_y(&self) -> usize {
        delegate!(self, p => p.dim_y())
    }
    fn value(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        delegate!(self, p => p.value(x, y))
    }
    fn grad_x(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
        delegate!(self, p => p.grad_x(x, y))
    }
    fn grad_y(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
        delegate!(self, p => p.grad_y(x, y))
    }
    fn hess_xx(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DMatrix<f64>> {
        delegate!(self, p => p.hess_xx(x, y))
    }
    fn hess_xy(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DMatrix<f64>> {
        delegate!(self, p => p.hess_xy(x, y))
    }
    fn hess_yy(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DMatrix<f64>> {
        delegate!(self, p => p.hess_yy(x, y))
    }
    fn constants(&self) -> ProblemConstants {
        delegate!(self, p => p.constants())
    }
    fn coupling(&self) -> Coupling {
        delegate!(self, p => p.coupling())
    }
    fn contains(&self, x: &DVector<f64>) -> bool {
        delegate!(self, p => p.contains(x))
    }
    fn project(&self, x: &mut DVector<f64>) -> bool {
        delegate!(self, p => p.project(x))
    }
    fn closed_form(&self) -> Option<&dyn ClosedFormEnvelope> {
        delegate!(self, p => p.closed_form())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instance_file_round_trip() {
        let spec = ProblemSpec::saddle_chain(3, 2, 1.0, 1.0);
        let built = spec.build().unwrap();
        let resolved = spec.resolved(&built);
        let text = resolved.to_toml();
        assert!(text.contains("kind = \"saddle_chain\""));
        assert!(text.contains("coupling = \"decoupled\""));
        let back = ProblemSpec::from_toml(&text).unwrap();
        assert_eq!(back, resolved);
        let rebuilt = back.build().unwrap();
        assert_eq!(rebuilt.constants(), built.constants());
    }

    #[test]
    fn rejects_inconsistent_nu() {
        let text = "kind = \"saddle_chain\"\nn = 2\nm = 1\nL = 1.0\ngamma = 1.0\nnu = 3.0\n";
        let spec = ProblemSpec::from_toml(text).unwrap();
        assert!(matches!(spec.build(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = "kind = \"quadratic\"\nseed = 1\nn = 2\nm = 1\nbogus = 3\n";
        assert!(ProblemSpec::from_toml(text).is_err());
    }
}
