//! Error types shared across the crate.

use thiserror::Error;

/// Errors raised by graph construction and graph queries.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("invalid vertex name `{0}`")]
    InvalidName(String),
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("duplicate vertex `{0}`")]
    DuplicateVertex(String),
    #[error("duplicate edge between `{0}` and `{1}`")]
    DuplicateEdge(String, String),
    #[error("self-loop at `{0}`")]
    SelfLoop(String),
    #[error("directed edges contain a cycle")]
    Cycle,
    #[error("missing edge `{0}` -> `{1}`")]
    MissingEdge(String, String),
    #[error("query sets overlap at `{0}`")]
    OverlappingSets(String),
}

/// Errors raised by covariance algebra.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CovError {
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("matrix dimension {rows}x{cols} does not match {labels} labels")]
    DimensionMismatch {
        rows: usize,
        cols: usize,
        labels: usize,
    },
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("conditioning block is singular or ill-conditioned (cond {0:e})")]
    IllConditioned(f64),
    #[error("degenerate conditional variance for `{0}`")]
    DegenerateVariance(String),
}

/// Errors raised by model construction and simulation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SemError {
    #[error("graph error: {0}")]
    Graph(#[from] GraphError),
    #[error("missing coefficient for edge `{0}` -> `{1}`")]
    MissingCoefficient(String, String),
    #[error("zero path coefficient on edge `{0}` -> `{1}`")]
    ZeroCoefficient(String, String),
    #[error("coefficient for nonexistent edge `{0}` -> `{1}`")]
    UnknownEdge(String, String),
    #[error("error covariance for pair without a bidirected edge: `{0}`, `{1}`")]
    UnknownErrorCovariance(String, String),
    #[error("error covariance matrix is not positive definite")]
    ErrorCovNotPositiveDefinite,
    #[error("unit-variance constraint infeasible at `{0}` (error variance {1})")]
    InfeasibleVariance(String, f64),
    #[error("sample size {0} too small for dimension {1}")]
    SampleTooSmall(usize, usize),
    #[error("covariance error: {0}")]
    Cov(#[from] CovError),
}

/// Errors raised by criterion checks and the identification pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum IdentifyError {
    #[error("malformed role assignment: {0}")]
    MalformedRoles(String),
    #[error("criterion not satisfied: {0}")]
    CriterionNotSatisfied(String),
    #[error("covariance is not standardized: {0}")]
    NotStandardized(String),
    #[error("lambda recovery is not factorizable: -K_xu*K_xw/K_uw is not positive")]
    NonFactorizable,
    #[error("near-zero concentration entry: {0}")]
    NearZeroConcentration(String),
    #[error("model misfit: {0}")]
    ModelMisfit(String),
    #[error("no usable pivot row: {0}")]
    EmptyPivot(String),
    #[error("degenerate denominator: {0}")]
    DegenerateDenominator(String),
    #[error("graph error: {0}")]
    Graph(#[from] GraphError),
    #[error("covariance error: {0}")]
    Cov(#[from] CovError),
}
