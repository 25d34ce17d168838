use thiserror::Error;

/// Errors produced by the simulator and the Fock-space oracle.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The channel violates `G + iΣ_out − iAᵀΣ_in A ⪰ 0` and is not a physical map.
    #[error("channel is not completely positive (min eigenvalue {min_eigenvalue:.3e})")]
    RejectedChannel { min_eigenvalue: f64 },

    #[error("state is unphysical (min eigenvalue of γ + iΣ is {min_eigenvalue:.3e})")]
    Unphysical { min_eigenvalue: f64 },

    #[error("degenerate measurement: outcome covariance is singular")]
    DegenerateMeasurement,

    #[error("impossible outcome (log probability {log_probability:.3e})")]
    ImpossibleOutcome { log_probability: f64 },

    /// Conditioning on photon absorption leaves the Gaussian family. The payload carries the
    /// probability of the rejected branch so callers can account for it.
    #[error(
        "absorption outcome on mode {mode} is not a Gaussian CP map (absorption probability {absorption_probability:.6e})"
    )]
    NonGaussianOutcome {
        mode: usize,
        absorption_probability: f64,
    },

    #[error("Fock cutoff too small (norm deficit {norm_deficit:.3e})")]
    CutoffTooSmall { norm_deficit: f64 },

    #[error("outcome has zero probability")]
    ZeroProbability,

    #[error("unsupported by the Fock oracle: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Parse(#[from] crate::circuit::ParseError),

    #[error("instruction {index}: {source}")]
    AtInstruction {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("json: {0}")]
    Json(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Strips any instruction-index wrapping.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtInstruction { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn instruction_index(&self) -> Option<usize> {
        match self {
            Error::AtInstruction { index, .. } => Some(*index),
            _ => None,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
