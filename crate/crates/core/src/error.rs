use thiserror::Error;

/// Errors raised by the models, simulators and configuration loader.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid parameter `{key}`: {reason}")]
    Parameter { key: String, reason: String },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("fidelity undefined: {0}")]
    UndefinedFidelity(String),

    #[error("empty search space: {0}")]
    EmptySearch(String),

    #[error("causality violation: event at {event_ps} ps scheduled while clock is at {now_ps} ps")]
    Causality { now_ps: u64, event_ps: u64 },

    #[error("event queue starved at {now_ps} ps: {diagnostic}")]
    Starvation { now_ps: u64, diagnostic: String },

    #[error("logic error: {0}")]
    Logic(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_probability(key: &str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) || value.is_nan() {
        return Err(Error::Parameter {
            key: key.to_string(),
            reason: format!("{value} is not in [0, 1]"),
        });
    }
    Ok(())
}

pub(crate) fn check_positive(key: &str, value: f64) -> Result<()> {
    if !(value > 0.0) {
        return Err(Error::Parameter {
            key: key.to_string(),
            reason: format!("{value} must be > 0"),
        });
    }
    Ok(())
}
