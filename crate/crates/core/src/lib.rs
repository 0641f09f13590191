//! Payoff-based (zero-order) learning of Nash equilibria in convex games
//! whose pseudo-gradient is strongly monotone.
//!
//! Each player keeps a state `mu`, plays a Gaussian perturbation of it
//! projected onto its action set, observes only its own cost, and forms a
//! one-point or two-point gradient estimate from that cost. The state then
//! takes a projected step onto a shrunk copy of the action set.
//!
//! Modules:
//! - [`geometry`]: boxes and balls with exact projection and shrinkage.
//! - [`games`]: quadratic games with affine pseudo-gradients (canonical,
//!   general affine, Cournot) and consistency checks.
//! - [`estimators`]: keyed Gaussian sampling, gradient estimates, and Monte
//!   Carlo probes of bias, variance and escape probability.
//! - [`learner`]: step-size / smoothing / shrinkage schedules and the
//!   learning iteration itself.
//! - [`solvers`]: projected fixed-point solver for strongly monotone
//!   variational inequalities, used for ground-truth equilibria.
//! - [`harness`]: experiment runner, rate fitting, diagnostics and CSV.

// `!(x > 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimators;
pub mod games;
pub mod geometry;
pub mod harness;
pub mod learner;
pub mod linalg;
pub mod solvers;
pub mod stats;

pub use error::{Error, Result};
