//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Tensor/vector dimensions do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Invalid configuration value or combination.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A number that must be finite is NaN or infinite.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// A backward pass was attempted with a tape recorded before the
    /// network's parameters were mutated.
    #[error("stale tape: network parameters changed since the forward pass")]
    StaleTape,

    /// Diffusion step index outside `1..=N`.
    #[error("diffusion step index {index} out of range 1..={max}")]
    StepIndex { index: usize, max: usize },

    /// `step` was called on a world whose episode already terminated.
    #[error("episode already terminated ({reason}); call reset")]
    EpisodeOver { reason: String },

    /// An operation that needs at least one sample got none.
    #[error("empty batch")]
    EmptyBatch,

    /// Invalid argument outside the config/dimension categories.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Dataset or checkpoint file is structurally broken.
    #[error("corrupt file {path}: {detail}")]
    Corrupt { path: String, detail: String },

    /// A record in a container file is cut short.
    #[error("truncated file {path}: record {index} incomplete")]
    Truncated { path: String, index: usize },

    /// Stored checksum does not match the file contents.
    #[error("checksum mismatch in {path}: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum {
        path: String,
        stored: u32,
        computed: u32,
    },

    /// File schema version this build does not understand.
    #[error("unsupported schema version {found} in {path} (supported: {supported})")]
    SchemaVersion {
        path: String,
        found: u32,
        supported: u32,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Training diverged: a loss became non-finite.
    #[error("non-finite loss `{loss}` at epoch {epoch}")]
    DivergedLoss { epoch: usize, loss: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
