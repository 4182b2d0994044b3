//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by construction, fitting, and reporting routines.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Vector or matrix dimensions do not agree.
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// A covariance matrix is not symmetric within tolerance.
    #[error("matrix is not symmetric (max relative asymmetry {max_asymmetry:.3e})")]
    NotSymmetric { max_asymmetry: f64 },

    /// A covariance matrix is not positive definite.
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    /// A parameter is outside its valid range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// A mixture component lost essentially all of its posterior mass.
    #[error("component {component} died (effective size {size:.3e})")]
    ComponentDeath { component: usize, size: f64 },

    /// The mixture density underflowed at an observation even in log space.
    #[error("density underflow at row {row}: no component assigns finite log-density")]
    Underflow { row: usize },

    /// Repeated regularization failed to produce a factorizable covariance.
    #[error("persistent factorization failure for component {component}")]
    FactorizationFailure { component: usize },

    /// Scatter matrices too degenerate to update the requested structure.
    #[error("degenerate scatter matrix for component {component}")]
    DegenerateScatter { component: usize },

    /// The data matrix has no rows or no columns.
    #[error("empty data: an n x p matrix with n >= 1 and p >= 1 is required")]
    EmptyData,

    /// Not enough observations for the requested number of components.
    #[error("too few observations: n = {n} but G = {g} components requested")]
    TooFewObservations { n: usize, g: usize },

    /// Every random restart of the initializer failed.
    #[error("initialization failed: all {restarts} restarts were unusable")]
    InitializationFailed { restarts: usize },

    /// Every (structure, G) pair in a sweep failed.
    #[error("model sweep failed: none of the {attempted} fits succeeded")]
    AllFitsFailed { attempted: usize },

    /// A row or column index is out of range.
    #[error("index {index} out of range for axis of length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    /// Two label vectors that must be paired differ in length.
    #[error("label length mismatch: {left} vs {right}")]
    LabelLengthMismatch { left: usize, right: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
