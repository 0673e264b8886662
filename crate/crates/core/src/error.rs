use thiserror::Error;

/// Errors surfaced by the simulation and analysis layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The discretization is too coarse for the requested scale.
    #[error("resolution policy violated: {0}")]
    Resolution(String),

    #[error("path never reaches the circle of radius {radius}")]
    NoCrossing { radius: f64 },

    #[error("path never visits {0}")]
    NotVisited(String),

    #[error("target ring of disc (center ({cx}, {cy}), radius {radius}) leaves the grid frame")]
    TargetOutsideFrame { cx: f64, cy: f64, radius: f64 },

    #[error("need at least {needed} usable levels, found {found}")]
    InsufficientLevels { needed: usize, found: usize },

    #[error("degenerate regression input: {0}")]
    Degenerate(String),

    /// Every trial in a batch was rejected (conditioning budget or truncation).
    #[error("no accepted trials out of {attempted} (rejected {rejected})")]
    ZeroAccepted { attempted: u64, rejected: u64 },
}

pub type Result<T> = std::result::Result<T, LabError>;
