use thiserror::Error;

use crate::mesh::CellRef;

pub type Result<T> = std::result::Result<T, DdrError>;

#[derive(Debug, Error)]
pub enum DdrError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unknown face id {face} in cell {cell}")]
    UnknownFace { cell: CellRef, face: usize },

    #[error("invariant violated in cell {cell}: {what}")]
    Invariant { cell: CellRef, what: String },

    #[error("degenerate or inverted simplex in decomposition of cell {cell} (signed measure {measure:e})")]
    Degenerate { cell: CellRef, measure: f64 },

    #[error("{face} is not a face of {cell}")]
    NotAFace { cell: CellRef, face: CellRef },

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("degree mismatch: {0}")]
    Degree(String),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("singular system (estimated nullspace dimension {nullity})")]
    Singular { nullity: usize },

    #[error("ambiguous numerical rank: singular value {sigma:e} lies within a factor 10 of threshold {threshold:e}; use a finer tolerance")]
    AmbiguousRank { sigma: f64, threshold: f64 },

    #[error("invalid argument: {0}")]
    Invalid(String),
}

impl From<serde_json::Error> for DdrError {
    fn from(e: serde_json::Error) -> Self {
        DdrError::Parse(e.to_string())
    }
}
