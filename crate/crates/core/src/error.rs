use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("no value falls inside the binning range")]
    EmptyInput,

    #[error("degenerate selection: {0}")]
    DegenerateSelection(String),

    #[error("infeasible constraints: multiplier norm {lambda_norm:.3e} after {iterations} iterations (max gradient {max_gradient:.3e})")]
    Infeasible {
        iterations: usize,
        lambda_norm: f64,
        max_gradient: f64,
    },

    #[error("solver did not converge in {iterations} iterations (max gradient {max_gradient:.3e})")]
    NotConverged { iterations: usize, max_gradient: f64 },

    #[error("no individual selected into the sample")]
    EmptySample,

    #[error("fewer than {required} users pass the document filter ({found} found)")]
    InsufficientUsers { required: usize, found: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable tag, used in diagnostics records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) => "invalid_grid",
            Error::InvalidDistribution(_) => "invalid_distribution",
            Error::GridMismatch(_) => "grid_mismatch",
            Error::EmptyInput => "empty_input",
            Error::DegenerateSelection(_) => "degenerate_selection",
            Error::Infeasible { .. } => "infeasible",
            Error::NotConverged { .. } => "not_converged",
            Error::EmptySample => "empty_sample",
            Error::InsufficientUsers { .. } => "insufficient_users",
            Error::Config(_) => "config",
            Error::Parse(_) => "parse",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
            Error::Io(_) => "io",
        }
    }
}
