//! Approximating binary Bayesian networks by mixtures of factorized
//! Bernoulli "scenarios".
//!
//! The crate fits mixtures under four criteria: KL by EM, backward KL through
//! mean-field fixed points, squared error, and expected squared error. The
//! exact machinery behind them is variable elimination over
//! `sum_x P(x)^A prod_j f_j(x_j)`.

pub mod error;
pub mod exact;
pub mod fit;
pub mod fit_kl;
pub mod fit_meanfield;
pub mod fit_quadratic;
pub mod fixtures;
pub mod metrics;
pub mod mixture;
pub mod network;
pub mod parallel;
pub mod random;
pub mod report;
pub mod reproduce;
pub mod serde_float;
pub mod simplex;

pub use error::{Error, Result};
pub use exact::{Evidence, FactorSumQuery};
pub use fit::{run_fit, FitMethod, FitOutcome, FitSettings};
pub use mixture::MixtureModel;
pub use network::{Assignment, BayesNet};
