use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("value {value} out of bounds in dimension {dim}")]
    OutOfBounds { dim: usize, value: f64 },

    #[error("value {value} outside the unit interval in dimension {dim}")]
    OutOfUnitCube { dim: usize, value: f64 },

    #[error("nominal point lies outside the parameter space (dimension {dim}, value {value})")]
    OutOfBoundsNominal { dim: usize, value: f64 },

    #[error("invalid parameter space: {0}")]
    InvalidSpace(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("sample count must be at least 1")]
    ZeroSamples,

    #[error("too few points: need at least {needed}, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("singular kriging system: {0}")]
    SingularSystem(String),

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    NonFiniteLoss { epoch: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input vectors")]
    EmptyVectors,

    #[error("no values to summarize")]
    EmptyValues,

    #[error("missing responses for figure of merit `{0}`")]
    MissingResponses(String),

    #[error("figure of merit `{0}` not available")]
    MissingFoM(String),

    #[error("simulator failed on row {row} (input {input:?}): {reason}")]
    SimulatorFailure { row: usize, input: Vec<f64>, reason: String },

    #[error("malformed CSV at line {line}: {reason}")]
    MalformedCsv { line: usize, reason: String },

    #[error("unknown CSV column `{0}`")]
    UnknownColumn(String),

    #[error("non-numeric cell at line {line}, column `{column}`")]
    NonNumericCell { line: usize, column: String },

    #[error("unsupported format version `{found}` (this build reads major version {supported})")]
    UnsupportedFormatVersion { found: String, supported: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics (singular systems, divergence) as
    /// opposed to bad input or I/O.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::SingularSystem(_) | Error::NonFiniteLoss { .. })
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }
}
