use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("row {row}: expected {expected} features, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("dimension mismatch: dataset has d={expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("K must be odd and at most n={n}, got {k}")]
    InvalidK { k: usize, n: usize },

    #[error("class {0} has no points")]
    EmptyClass(u32),

    #[error("target point {0} carries the query's label")]
    SameClassTarget(usize),

    #[error("points {same} and {other} coincide but carry different labels")]
    DegeneratePair { same: usize, other: usize },

    #[error("target set mixes labels or is empty")]
    MixedTargetLabels,

    #[error("excluded index {0} is not a same-class point")]
    InvalidExclusion(usize),

    #[error("non-finite value encountered in the dual solver")]
    NonFinite,

    #[error("subproblem too large for subset enumeration (m={m}, d={d})")]
    OracleTooLarge { m: usize, d: usize },

    #[error("no KKT point found; the subproblem looks infeasible")]
    OracleInfeasible,

    #[error("not enough points for order statistic k={k}: {same} same-class, {other} other-class")]
    InsufficientPoints { k: usize, same: usize, other: usize },

    #[error("no feasible target set found within {budget} candidates")]
    NoFeasibleTarget { budget: usize },

    #[error("no search direction changed the prediction")]
    NoFlip,

    #[error("recovered perturbation violates a constraint by {violation:e}")]
    NotConverged { violation: f64 },

    #[error("linear program is infeasible")]
    LpInfeasible,

    #[error("linear program is unbounded")]
    LpUnbounded,

    #[error("simplex iteration limit reached")]
    LpIterationLimit,

    #[error("certification violation: {0}")]
    CertificationViolation(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}
