use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the collocation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("LGR degree {0} is outside the supported range 1..=64")]
    DegreeOutOfRange(usize),

    #[error("support points must be distinct (duplicate at index {0})")]
    DuplicateSupport(usize),

    #[error("final time {tf} must exceed initial time {t0}")]
    InvalidTimeInterval { t0: f64, tf: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("decision vector has length {got}, layout expects {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("unknown problem `{0}` (known: robot-arm, min-time-di, min-energy-di)")]
    UnknownProblem(String),

    #[error("evaluator returned a non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
