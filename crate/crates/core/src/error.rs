use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("degenerate cell {cell}: det J = {det:e}")]
    DegenerateCell { cell: usize, det: f64 },

    #[error("unsupported quadrature degree {0} (supported: 1..=10)")]
    UnsupportedDegree(usize),

    #[error("index ({row}, {col}) out of range for a {nrows}x{ncols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },

    #[error("numerically singular pivot at row {row}")]
    SingularPivot { row: usize },

    #[error("linear solve failed: {0}")]
    Solver(String),

    #[error("space mismatch: {0}")]
    SpaceMismatch(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("essential boundary conditions are not defined on {0}")]
    UnsupportedBoundaryCondition(String),

    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{0}")]
    InsufficientData(String),

    #[error("problem too large for a dense solve: {size} > {cap}")]
    SizeCap { size: usize, cap: usize },

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}
