use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("Newton iteration failed to converge at integration step {step} (residual {residual:.3e})")]
    NewtonDiverged { step: usize, residual: f64 },

    #[error("eigensolver did not converge within {0} sweeps")]
    EigenNoConvergence(usize),

    #[error("sample {index}: {source}")]
    SampleFailed {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("bad magic bytes: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {0}")]
    VersionMismatch(u32),

    #[error("truncated or inconsistent payload: {0}")]
    Truncated(String),

    #[error("batch normalization population statistics not finalized")]
    BnNotFinalized,

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
