//! Robust risk minimization.
//!
//! Parameters are learned by jointly minimizing the weighted empirical risk
//! over the model parameters and over sample weights whose entropy is bounded
//! below by `ln((1 - eps_tilde) n)`, where `eps_tilde` is an upper bound on
//! the fraction of corrupted training samples. The weights concentrate on
//! low-loss samples, so corrupted points receive little influence.
//!
//! - [`simplex`]: the exact weight step for fixed losses.
//! - [`models`]: losses and weighted fitters (least squares, logistic
//!   regression, one-dimensional PCA, Gaussian mean and covariance).
//! - [`solver`]: the alternating `theta`/weights iteration and the ERM baseline.
//! - [`datagen`]: seeded contaminated-data generators.
//! - [`experiments`]: Monte Carlo benchmarks, metrics and the label-flip evaluation.

pub mod datagen;
pub mod error;
pub mod experiments;
pub mod models;
pub mod simplex;
pub mod solver;

pub use error::{ErrorKind, Result, RrmError};
pub use models::ModelFamily;
pub use simplex::{
    concentrated_objective, entropy, solve_inner, weights_at_lambda, InnerSolution,
    RobustnessBound, Weights,
};
pub use solver::{erm_fit, rrm_fit, RrmConfig, RrmResult, TraceEntry};
