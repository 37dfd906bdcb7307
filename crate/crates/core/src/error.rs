use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QdError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("insufficient parents: need at least 2 individuals, population has {0}")]
    InsufficientParents(usize),

    #[error("non-finite task output for genome {index}")]
    NonFiniteEvaluation { index: usize },

    #[error("NaN in {0}")]
    NotANumber(&'static str),

    #[error("cannot select {requested} individuals from a population of {available}")]
    SelectionTooLarge { requested: usize, available: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("fitness offset {offset} leaves a negative QD score addend for elite fitness {fitness}")]
    NegativeAddend { fitness: f64, offset: f64 },

    #[error("empty sample")]
    EmptySample,

    #[error("invalid p-value {0}")]
    InvalidPValue(f64),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for QdError {
    fn from(err: std::io::Error) -> Self {
        QdError::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, QdError>;
