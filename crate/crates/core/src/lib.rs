//! Second-order solvers for nonconvex–strongly-concave minimax problems
//! `min_x max_y f(x, y)`.
//!
//! The outer loops work on the envelope `P(x) = max_y f(x, y)` through
//! inexact gradients and reduced Hessians produced by an inner gradient
//! ascent on `y`:
//!
//! - [`drivers::run_grtr`]: trust region with a gradient-norm regularized
//!   model and gradient-norm scaled radius,
//! - [`drivers::run_lmnegcur`]: Levenberg–Marquardt steps with shift
//!   `√(L₂‖g‖)`, corrected by negative-curvature steps,
//! - [`drivers::run_minimax_tr`] and [`drivers::run_gda`] as baselines.
//!
//! Every run ends with a [`drivers::StationarityReport`] that re-derives the
//! gradient norm and smallest Hessian eigenvalue of `P` to certified accuracy.

pub mod cli;
pub mod drivers;
pub mod error;
pub mod inner;
pub mod linalg;
pub mod oracle;
pub mod problems;
pub mod trsub;

pub use error::{Error, Result};
