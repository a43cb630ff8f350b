use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    #[error(
        "clothoid fit did not converge after {iterations} iterations (residual {residual:.3e})"
    )]
    Fit { iterations: usize, residual: f64 },

    #[error("path is discontinuous at junction {junction}: position gap {gap:.3e} m, heading gap {heading_gap:.3e} rad")]
    Continuity {
        junction: usize,
        gap: f64,
        heading_gap: f64,
    },

    #[error("geometry error: {0}")]
    Geometry(String),

    /// Fitting failed while building the table for waypoint set `set`.
    #[error("waypoint set {set}, segment {segment}: {source}")]
    SetFit {
        set: usize,
        segment: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("image point ({u:.2}, {v:.2}) lies above the horizon")]
    AboveHorizon { u: f64, v: f64 },

    #[error("no lane reference could be extracted from the image")]
    NoReference,

    #[error("QP stopped after {iterations} iterations with KKT residual {residual:.3e}")]
    Infeasible { iterations: usize, residual: f64 },

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("episode already finished")]
    EpisodeDone,

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("malformed {what} in {path}: {message}")]
    Parse {
        what: &'static str,
        path: PathBuf,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
