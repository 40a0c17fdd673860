use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },

    #[error("genome length mismatch: expected {expected} bits, got {actual}")]
    GenomeLength { expected: usize, actual: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("point ({x}, {y}) lies outside the {w}x{h} image domain")]
    OutOfDomain { x: f64, y: f64, w: usize, h: usize },

    #[error("basis index {0} outside 0..=3")]
    BasisIndex(usize),

    #[error("objective returned a non-finite value ({value}) for individual {index}")]
    NonFiniteObjective { index: usize, value: f64 },

    #[error("image of {w}x{h} is too small for a {levels}-level pyramid")]
    PyramidTooDeep { w: usize, h: usize, levels: usize },

    #[error("population of {0} individuals is too small (need at least 2)")]
    PopulationTooSmall(usize),

    #[error("genome of {0} bits is too long to enumerate (limit 20)")]
    TooLongToEnumerate(usize),

    #[error("landmark list is empty")]
    NoLandmarks,

    #[error("malformed lattice: {0}")]
    Lattice(String),

    #[error("malformed landmarks (line {line}): {reason}")]
    Landmarks { line: u64, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            field,
            reason: reason.into(),
        }
    }
}
