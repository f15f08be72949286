use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    Parameter { field: &'static str, reason: String },

    #[error("{what} = {value} is outside the valid range {range}")]
    Range {
        what: &'static str,
        value: f64,
        range: String,
    },

    #[error("cannot build hyperbolic segment on [{t_start}, {t_end}]: {reason}")]
    Segment {
        t_start: u64,
        t_end: u64,
        reason: String,
    },

    #[error("n0 exceeds cap {cap}: step size {eta} is still above the threshold {threshold}")]
    NExceedsCap { cap: u64, eta: f64, threshold: f64 },

    #[error("theorem hypotheses not met ({theorem}): {hypothesis}")]
    Hypothesis {
        theorem: &'static str,
        hypothesis: String,
    },

    #[error("{what} is unavailable for tabulated boundaries")]
    Unavailable { what: String },

    #[error("parse error on line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("optimum certificate failed: best gradient norm {best_grad_norm:e} after {iterations} iterations (tolerance {tol:e})")]
    Certificate {
        best_grad_norm: f64,
        iterations: usize,
        tol: f64,
    },

    #[error("missing optimum certificate for {0}")]
    MissingCertificate(&'static str),

    #[error("iterate diverged at t = {t} with |x| = {norm:e}")]
    Divergence { t: u64, norm: f64 },

    #[error("run of schedule `{schedule}` with seed {seed} failed: {source}")]
    Experiment {
        schedule: String,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("rate fit failed: {0}")]
    Fit(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn param(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn hypothesis(theorem: &'static str, hypothesis: impl Into<String>) -> Self {
        Error::Hypothesis {
            theorem,
            hypothesis: hypothesis.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad inputs rather than by a failing computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parameter { .. }
                | Error::Range { .. }
                | Error::Segment { .. }
                | Error::Hypothesis { .. }
                | Error::Unavailable { .. }
                | Error::Parse { .. }
                | Error::Dimension { .. }
                | Error::MissingCertificate(_)
                | Error::GridMismatch(_)
                | Error::Fit(_)
                | Error::Json(_)
                | Error::Csv(_)
        )
    }
}
