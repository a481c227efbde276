//! Crate-wide error type and exit-code mapping.

use thiserror::Error;

use crate::model::{CorrelationReport, TreeReport};
use crate::star::StarRejection;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {rows} rows, {cols} columns")]
    NonSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("variable {index} is degenerate (non-positive variance)")]
    DegenerateVariable { index: usize },

    #[error("correlation ({i},{j}) = {value} outside [-1, 1]")]
    CorrelationOutOfRange { i: usize, j: usize, value: f64 },

    #[error("correlation ({i},{j}) = {value} below dependency floor {floor}")]
    BelowDependencyFloor {
        i: usize,
        j: usize,
        value: f64,
        floor: f64,
    },

    #[error("triplet ({},{},{}) is not star-decomposable: {reason}", triplet[0], triplet[1], triplet[2])]
    NotStarDecomposable {
        triplet: [usize; 3],
        reason: StarRejection,
    },

    #[error("quartet ({},{},{},{}) is not tree-decomposable: {detail}", quartet[0], quartet[1], quartet[2], quartet[3])]
    NotTreeDecomposable { quartet: [usize; 4], detail: String },

    #[error("recovered internal edge correlation {value} has magnitude outside (0, 1); topology or input is not tree-consistent")]
    InconsistentInternalEdge { value: f64 },

    #[error("correlation matrix failed validation:\n{report}")]
    InvalidCorrelationMatrix { report: CorrelationReport },

    #[error("tree model failed validation:\n{report}")]
    InvalidTree { report: TreeReport },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("duplicate index {index}")]
    DuplicateIndex { index: usize },

    #[error("leaf sets do not match: {detail}")]
    LeafSetMismatch { detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for the CLI: 1 for input/IO problems, 2 for
    /// mathematical rejection (data that parses but does not admit a tree).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::DegenerateVariable { .. }
            | Error::CorrelationOutOfRange { .. }
            | Error::BelowDependencyFloor { .. }
            | Error::NotStarDecomposable { .. }
            | Error::NotTreeDecomposable { .. }
            | Error::InconsistentInternalEdge { .. }
            | Error::InvalidCorrelationMatrix { .. }
            | Error::InvalidTree { .. } => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
