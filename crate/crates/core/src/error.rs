use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape vector: {0}")]
    InvalidShape(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid skeleton: {0}")]
    InvalidSkeleton(String),
    #[error("invalid pose: {0}")]
    InvalidPose(String),
    #[error("simulation diverged at frame {frame}, agent {agent}: {reason}")]
    SimDiverged {
        frame: usize,
        agent: usize,
        reason: String,
    },
    #[error("degenerate alignment: {0}")]
    DegenerateAlignment(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("sequence too short: need at least {needed} frames, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("empty sequence")]
    EmptySequence,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("unknown scenario '{0}'")]
    UnknownScenario(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
