use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Which side of the error band a root-finding failure refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Minus,
    Plus,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::Minus => f.write_str("eps-"),
            Side::Plus => f.write_str("eps+"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),
    #[error("output dimension {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("vector is not unit norm (norm = {0})")]
    NotUnitNorm(f64),
    #[error("code length mismatch: {0} vs {1}")]
    CodeLengthMismatch(usize, usize),
    #[error("invalid code: {0}")]
    InvalidCode(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("correlation {0} is degenerate (|lambda| = 1)")]
    DegenerateCorrelation(f64),
    #[error("lambda = {lambda} is outside the phase region ({lo}, 1)")]
    OutOfPhaseRegion { lambda: f64, lo: f64 },
    #[error("no solution for {side} (m too small for eta, or the band leaves [-1, 1])")]
    NoSolution { side: Side },
    #[error("sigma vanishes at lambda = {0}")]
    DegenerateSigma(f64),
    #[error("duplicate document id {0:?}")]
    DuplicateDocId(String),
    #[error("unknown document id {0:?}")]
    UnknownDocId(String),
    #[error("invalid cutoff: {0}")]
    InvalidCutoff(String),
    #[error("corrupt index stream: {0}")]
    CorruptStream(String),
    #[error("unsupported index format version {0:?}")]
    VersionMismatch(u8),
    #[error("invalid lambda {0}")]
    InvalidLambda(f64),
    #[error("parse error at record {record}: {message}")]
    Parse { record: usize, message: String },
    #[error("zero vector for id {0:?}")]
    ZeroVector(String),
    #[error("ragged dimensions: record {record} has {got} values, expected {expected}")]
    RaggedDimensions {
        record: usize,
        expected: usize,
        got: usize,
    },
    #[error("series too short: need at least {need} points, got {got}")]
    SeriesTooShort { need: usize, got: usize },
    #[error("non-positive price {price} at {date}")]
    NonPositivePrice { date: String, price: f64 },
    #[error("bad histogram edges: {0}")]
    BadEdges(String),
    #[error("experiment not applicable: {0}")]
    WrongRegime(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidDimensions(_) => "InvalidDimensions",
            Error::NotPowerOfTwo(_) => "NotPowerOfTwo",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::EmptyInput => "EmptyInput",
            Error::NotUnitNorm(_) => "NotUnitNorm",
            Error::CodeLengthMismatch(..) => "CodeLengthMismatch",
            Error::InvalidCode(_) => "InvalidCode",
            Error::InvalidParams(_) => "InvalidParams",
            Error::DegenerateCorrelation(_) => "DegenerateCorrelation",
            Error::OutOfPhaseRegion { .. } => "OutOfPhaseRegion",
            Error::NoSolution { .. } => "NoSolution",
            Error::DegenerateSigma(_) => "DegenerateSigma",
            Error::DuplicateDocId(_) => "DuplicateDocId",
            Error::UnknownDocId(_) => "UnknownDocId",
            Error::InvalidCutoff(_) => "InvalidCutoff",
            Error::CorruptStream(_) => "CorruptStream",
            Error::VersionMismatch(_) => "VersionMismatch",
            Error::InvalidLambda(_) => "InvalidLambda",
            Error::Parse { .. } => "ParseError",
            Error::ZeroVector(_) => "ZeroVector",
            Error::RaggedDimensions { .. } => "RaggedDimensions",
            Error::SeriesTooShort { .. } => "SeriesTooShort",
            Error::NonPositivePrice { .. } => "NonPositivePrice",
            Error::BadEdges(_) => "BadEdges",
            Error::WrongRegime(_) => "WrongRegime",
            Error::Io(_) => "Io",
        }
    }
}

