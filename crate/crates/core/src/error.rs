use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the preconditioner toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid sparse matrix: {0}")]
    InvalidMatrix(String),

    #[error("singular pivot at row {row} while factoring {matrix}")]
    SingularMatrix { matrix: String, row: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("dense oracle limited to n <= {limit}, requested n = {n}")]
    DenseTooLarge { n: usize, limit: usize },

    #[error("eigenvalue iteration did not converge for n = {0}")]
    EigenFailure(usize),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid problem specification: {0}")]
    InvalidProblem(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("graph node {node} is unreachable from every center")]
    Disconnected { node: usize },

    #[error("center set is empty")]
    NoCenters,

    #[error("subdomain {subdomain}: matrix is singular (pivot at local row {row})")]
    SingularSubdomain { subdomain: usize, row: usize },

    #[error("interface matrix for subdomain {subdomain}: {message}")]
    InvalidInterface { subdomain: usize, message: String },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("weight file: {0}")]
    Weights(String),

    #[error("weight manifest mismatch: expected {expected}, found {found}")]
    ManifestMismatch { expected: String, found: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
