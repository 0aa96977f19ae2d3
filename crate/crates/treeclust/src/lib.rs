//! Fully dynamic metric clustering built on an augmented cover tree.
//!
//! Points are inserted and deleted in polylogarithmic time; at any moment a
//! small weighted coreset can be extracted from the tree and handed to one of
//! the bundled solvers:
//!
//! - k-center (Gonzalez on the coreset, or an ensemble of rescaled trees)
//! - k-center with z outliers (greedy weighted clustering + radius-guess loop)
//! - matroid center (pivot selection + matroid intersection feasibility)
//! - diversity maximization (remote-edge / clique / tree / cycle)
//!
//! The tree maintains, per node, the subtree cardinality and a maximal
//! independent set of the subtree under a configurable matroid oracle, which
//! is what makes the matroid-center and clique/tree diversity coresets cheap
//! to extract.
//!
//! The `oracle` module holds exhaustive reference solvers used by the test
//! and acceptance suites; they are exponential and only meant for small
//! instances.

pub mod cli;
pub mod coreset;
pub mod covertree;
pub mod matroid;
pub mod metric;
pub mod oracle;
pub mod solvers;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("operation requires a non-empty set")]
    EmptySet,

    #[error("dataset needs at least two points")]
    TooFewPoints,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point id {0} already present")]
    DuplicateId(u64),

    #[error("coordinates of point {0} duplicate an existing point")]
    DuplicatePoint(u64),

    #[error("unknown point id {0}")]
    UnknownId(u64),

    #[error("tree is empty")]
    EmptyTree,

    #[error("level {level} above tree top {ell_max}")]
    LevelOutOfRange { level: i32, ell_max: i32 },

    #[error("operation requires a matroid oracle other than `none`")]
    NullOracle,

    #[error("point {0} has no category label, required by the partition matroid")]
    UnlabeledPoint(u64),

    #[error("requested {requested} exceeds configured rank {rank}")]
    RankExceeded { requested: usize, rank: usize },

    #[error("unsupported tree parameters: {0}")]
    UnsupportedParameters(String),

    #[error("oracle budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
