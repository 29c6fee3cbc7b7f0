use std::path::PathBuf;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid duration {value} at position {index}")]
    InvalidDuration { index: usize, value: u32 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("unit id {unit} out of range for codebook of size {k}")]
    UnitOutOfRange { unit: u32, k: usize },

    #[error("no voiced speech for speaker {0:?}")]
    NoVoicedSpeech(String),

    #[error("unknown speaker {0:?}")]
    UnknownSpeaker(String),

    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("unaligned streams: {left} vs {right} items")]
    UnalignedStreams { left: usize, right: usize },

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("degenerate groups: {0}")]
    DegenerateGroups(String),

    #[error("zero variance in {0}")]
    ZeroVariance(&'static str),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("malformed {what} at line {line}: {message}")]
    Parse {
        what: &'static str,
        line: usize,
        message: String,
    },

    #[error("malformed {what}: {message}")]
    Format { what: &'static str, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("wav: {0}")]
    Wav(#[from] hound::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error class: 2 for configuration errors,
    /// 3 for I/O errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io { .. } | Error::Wav(_) => 3,
            _ => 1,
        }
    }

    /// Stable short name of the variant, used as a machine-readable prefix.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InsufficientData(_) => "insufficient-data",
            Error::InvalidDuration { .. } => "invalid-duration",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::UnitOutOfRange { .. } => "unit-out-of-range",
            Error::NoVoicedSpeech(_) => "no-voiced-speech",
            Error::UnknownSpeaker(_) => "unknown-speaker",
            Error::Diverged { .. } => "diverged",
            Error::UnalignedStreams { .. } => "unaligned-streams",
            Error::DegenerateDesign(_) => "degenerate-design",
            Error::DegenerateGroups(_) => "degenerate-groups",
            Error::ZeroVariance(_) => "zero-variance",
            Error::InvalidInput(_) => "invalid-input",
            Error::Parse { .. } => "parse",
            Error::Format { .. } => "format",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Wav(_) => "wav",
        }
    }
}
