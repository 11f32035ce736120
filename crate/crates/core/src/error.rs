use thiserror::Error;

/// Errors produced by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or combination of parameters is outside the model's domain.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The configuration is well formed but asks for something the model does not cover.
    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// The transmit correlation construction produced an indefinite matrix.
    #[error("correlation matrix is indefinite: most negative eigenvalue {min_eigenvalue:e}")]
    Indefinite { min_eigenvalue: f64 },

    /// The CSI estimate has zero energy, so the precoder cannot be normalized.
    #[error("degenerate channel: precoder normalization is zero")]
    DegenerateChannel,

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    /// Whether this is a user-facing configuration problem (as opposed to a
    /// numerical or I/O failure during a run).
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::InvalidConfig(_) | Error::Unsupported(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
