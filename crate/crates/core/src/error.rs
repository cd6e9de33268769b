use crate::dynamics::Trajectory;

/// Errors produced across the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("integration failed at t = {time}: {message}")]
    IntegrationFailure {
        time: f64,
        message: String,
        partial: Box<Trajectory>,
    },

    #[error("unsupported parameter: {0}")]
    UnsupportedParameter(String),

    #[error("degenerate signal: {0}")]
    DegenerateSignal(String),

    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    #[error("parameters not yet identified: {0}")]
    NotYetIdentified(String),

    #[error("training failed at episode {episode}: {message}")]
    TrainingFailure {
        episode: usize,
        message: String,
        log: Vec<crate::rl::EpisodeLog>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} contains non-finite values")))
    }
}
