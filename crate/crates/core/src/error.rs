use thiserror::Error;

/// Errors produced by parsing, encoding, and decoding stages.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed PLY header or structurally invalid input text.
    #[error("parse error: {0}")]
    Parse(String),

    /// Input vertex schema does not match the 62-property 3DGS layout.
    #[error("schema error: {0}")]
    Schema(String),

    /// Non-finite or otherwise invalid field values in the data payload.
    #[error("data error: {0}")]
    Data(String),

    /// Invalid argument to an in-process operation (e.g. empty index set).
    #[error("input error: {0}")]
    Input(String),

    /// Corrupt or truncated binary stream.
    #[error("format error at byte {offset}: {msg}")]
    Format { offset: usize, msg: String },

    /// Container version not understood by this reader.
    #[error("version error: unsupported version {0}")]
    Version(u16),

    /// Prefix does not cover the requested layers.
    #[error("incomplete input: need {needed} bytes, have {have}")]
    Incomplete { needed: u64, have: u64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn format(offset: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            offset,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
