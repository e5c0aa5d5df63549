// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("invalid probability {0}: must lie in [0, 1]")]
    InvalidProbability(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },

    #[error(
        "lattice of {sites} sites exceeds the dense superoperator limit of {limit}; \
         use the classical propagator for transport-only runs"
    )]
    Capacity { sites: usize, limit: usize },

    #[error("steady state is not unique: {count} eigenvalues within {tol:e} of zero")]
    DegenerateSteadyState { count: usize, tol: f64 },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("linear solve failed: {0}")]
    Solve(String),

    #[error("time evolution failed at t = {t}: {reason}")]
    Evolution { t: f64, reason: String },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("fit domain error: {0}")]
    FitDomain(String),

    #[error("insufficient fit range: {0}")]
    InsufficientRange(String),

    #[error("construction error: {0}")]
    Construction(String),

    #[error("experiment invalid: {0}")]
    ExperimentInvalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
