use std::path::PathBuf;

use thiserror::Error;

/// Triple invariants checked at construction and load time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Invariant {
    MeasurePositivity,
    MeasureNormalization,
    GeneratorPositivity,
    RowSum,
    DetailedBalance,
    Connectivity,
    EdgeLength,
    Finiteness,
}

impl Invariant {
    pub fn name(self) -> &'static str {
        match self {
            Invariant::MeasurePositivity => "measure positivity",
            Invariant::MeasureNormalization => "measure normalization",
            Invariant::GeneratorPositivity => "generator positivity",
            Invariant::RowSum => "row sum",
            Invariant::DetailedBalance => "detailed balance",
            Invariant::Connectivity => "connectivity",
            Invariant::EdgeLength => "edge length",
            Invariant::Finiteness => "finiteness",
        }
    }
}

impl std::fmt::Display for Invariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} states, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{invariant} violated: {context}")]
    InvalidTriple { invariant: Invariant, context: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid state index {index} (state count {n})")]
    InvalidState { index: usize, n: usize },

    #[error("eigensolver did not converge: {0}")]
    EigenNonConvergence(String),

    #[error("spectral invariant violated: {0}")]
    Spectral(String),

    #[error("heat kernel entry ({row}, {col}) = {value:e} below the clipping floor")]
    NegativeKernelEntry { row: usize, col: usize, value: f64 },

    #[error("curvature is unbounded below (-inf); dependent check refused")]
    UnboundedCurvature,

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("invalid space specification: {0}")]
    Space(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
