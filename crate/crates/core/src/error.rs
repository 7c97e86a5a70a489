use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("expected {expected} values for the lattice, got {got}")]
    ValueCount { expected: usize, got: usize },

    #[error("non-finite sample at index {0}")]
    NonFinite(usize),

    #[error("invalid rectangle: {0}")]
    InvalidRect(String),

    #[error("invalid exponent: {0}")]
    InvalidExponent(String),

    #[error("invalid shear: {0}")]
    InvalidShear(String),

    #[error("rectangle list is empty")]
    EmptyRectList,

    #[error("no family rectangle exceeds lambda = {lambda} at point {point:?}")]
    NoWitness { point: Vec<usize>, lambda: f64 },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("{kind} parse error at line {line}: {msg}")]
    Parse {
        kind: &'static str,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn parse(kind: &'static str, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            kind,
            line,
            msg: msg.into(),
        }
    }
}
