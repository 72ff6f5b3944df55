use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller supplied an invalid argument (mode index, rank, shape, tag).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Dimension mismatch between operands; `mode` names the offending mode when known.
    #[error("shape mismatch{}: {msg}", .mode.map(|m| format!(" at mode {m}")).unwrap_or_default())]
    Shape { mode: Option<usize>, msg: String },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("missing image for view {view}, exposure {exposure} in {dir}")]
    MissingImage {
        dir: PathBuf,
        view: String,
        exposure: usize,
    },

    #[error("bad magic: expected TMC1")]
    BadMagic,

    #[error("unsupported stream version {0}")]
    UnsupportedVersion(u8),

    #[error("unknown entropy stage tag {0}")]
    UnknownEntropyTag(u8),

    #[error("truncated or corrupt payload: {0}")]
    Corrupt(String),

    #[error("backend `{command}` failed: {reason}")]
    Backend { command: String, reason: String },

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn shape(mode: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Shape {
            mode,
            msg: msg.into(),
        }
    }
}
