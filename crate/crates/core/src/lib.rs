//! Structure learning for high-dimensional linear Bayesian networks.
//!
//! The library is organized around a backward ordering-recovery algorithm:
//! a spike-and-slab MAP estimate of the precision matrix is fitted on a
//! shrinking variable set, the node with the smallest fitted precision
//! diagonal is placed last in the ordering, and its parents are read off
//! the posterior inclusion probabilities of its precision row.
//!
//! Modules:
//! - [`model`]: linear SEM data model, DAGs and exact covariance/precision algebra.
//! - [`bagus`]: the spike-and-slab precision MAP solver (EM over a weighted
//!   graphical-lasso inner problem) and inclusion probabilities.
//! - [`learner`]: backward element-wise ordering and parent recovery.
//! - [`datagen`]: synthetic scenario generation (random DAGs, weights, error laws).
//! - [`eval`]: metrics, identifiability/assumption checkers, theory quantities
//!   and the replication sweep harness.
//! - [`io`]: file formats (dataset CSV, model/learn-result/report JSON).

pub mod bagus;
pub mod datagen;
pub mod eval;
pub mod io;
pub mod learner;
pub mod model;

// Downstream crates build inputs out of the same matrix types.
pub use nalgebra;

use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("graph contains a directed cycle")]
    Cyclic,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix not positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
