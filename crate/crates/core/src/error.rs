//! Error type shared across the whole laboratory.

use thiserror::Error;

pub type EbmResult<T> = Result<T, EbmError>;

#[derive(Debug, Error)]
pub enum EbmError {
    #[error("shape mismatch in {op}: left shape {left:?} vs right shape {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("domain error in {op}: {msg}")]
    Domain { op: &'static str, msg: String },

    #[error("invalid {what}: {msg}")]
    InvalidArgument { what: String, msg: String },

    #[error("loss must be a scalar, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },

    #[error("gradient descent diverged ({increases} consecutive energy increases); last iterate {last:?} with energy {energy}")]
    DivergentDescent {
        increases: usize,
        last: Vec<f64>,
        energy: f64,
    },

    #[error("{what} = {got} exceeds the exact-mode limit {limit}")]
    SizeLimit {
        what: &'static str,
        got: usize,
        limit: usize,
    },

    #[error("empty input: {what}")]
    Empty { what: &'static str },

    #[error("state is not {expected}: found {found} at index {index}")]
    NonBinaryState {
        expected: &'static str,
        found: f64,
        index: usize,
    },

    #[error("contrastive sample search collapsed onto the data point after {retries} restarts")]
    SamplerCollapse { retries: usize },

    #[error("parse error at byte {offset}: {msg}")]
    Parse { offset: usize, msg: String },

    #[error("unsupported archive version {found}; this build reads version {supported}")]
    ArchiveVersion { found: u64, supported: u64 },

    #[error("model kind mismatch: archive holds '{found}', expected '{expected}'")]
    KindMismatch { found: String, expected: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl EbmError {
    pub fn invalid(what: impl Into<String>, msg: impl Into<String>) -> Self {
        EbmError::InvalidArgument {
            what: what.into(),
            msg: msg.into(),
        }
    }

    pub fn domain(op: &'static str, msg: impl Into<String>) -> Self {
        EbmError::Domain {
            op,
            msg: msg.into(),
        }
    }
}
