use thiserror::Error;

pub type Result<T, E = DrpiError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DrpiError {
    #[error("unknown model family `{0}`")]
    UnknownModel(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite state in rollout trajectory {trajectory} at step {step}")]
    NonFiniteRollout { trajectory: usize, step: usize },

    #[error("no scalar theta linearizes the HJB equation (relative residual {residual:e})")]
    NoLinearizingTheta { residual: f64 },

    #[error("theta {theta} is at or below the pole theta*(1+1e-6) = {limit}")]
    SingularTheta { theta: f64, limit: f64 },

    #[error("actuated projection is singular (condition number {condition:e})")]
    SingularProjection { condition: f64 },

    #[error("risk-sensitive Riccati recursion breaks down at step {step} (theta too small)")]
    RiskBreakdown { step: usize },

    #[error("at timestep {timestep}: {source}")]
    AtTimestep {
        timestep: usize,
        #[source]
        source: Box<DrpiError>,
    },

    #[error("in episode {episode}: {source}")]
    InEpisode {
        episode: u64,
        #[source]
        source: Box<DrpiError>,
    },

    #[error("config `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("i/o error on {path}: {reason}")]
    Io { path: String, reason: String },
}

impl DrpiError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        DrpiError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn at_timestep(self, timestep: usize) -> Self {
        DrpiError::AtTimestep {
            timestep,
            source: Box::new(self),
        }
    }

    pub(crate) fn in_episode(self, episode: u64) -> Self {
        DrpiError::InEpisode {
            episode,
            source: Box::new(self),
        }
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(DrpiError::DimensionMismatch {
            what,
            expected,
            got,
        })
    }
}

pub(crate) fn check_finite(what: &'static str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(DrpiError::NonFinite(what))
    }
}
