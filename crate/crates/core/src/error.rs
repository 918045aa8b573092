use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("index {index} out of range {lo}..={hi}")]
    Index { index: usize, lo: usize, hi: usize },

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    Shape {
        expected: (usize, usize, usize),
        got: (usize, usize, usize),
    },

    #[error("degenerate schedule: eta_{0} is zero")]
    DegenerateSchedule(usize),

    #[error("non-finite values at step {step}")]
    Numeric { step: usize },

    #[error("training diverged at step {step}: loss {loss}")]
    Training { step: usize, loss: f64 },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("checkpoint format version {found} is newer than supported version {supported}")]
    Version { found: u32, supported: u32 },

    #[error("malformed image: {0}")]
    Codec(String),

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("degenerate fit: all expected mass falls in excluded bins")]
    DegenerateFit,

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
