use std::path::PathBuf;

use thiserror::Error;

use crate::primal::PowerAllocation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Zero-forcing needs at least as many APs as users in the group.
    #[error("zero-forcing precoder undefined for group {group}: {users} users but only {aps} APs")]
    InfeasiblePrecoder { group: usize, users: usize, aps: usize },

    #[error("user {user}: pilot length {pilot_len} does not fit coherence interval {coherence_len}")]
    FrameOverflow {
        user: usize,
        pilot_len: f64,
        coherence_len: usize,
    },

    #[error("solver failed after {iterations} iterations (residual {residual:.3e}): {message}")]
    NumericalFailure {
        message: String,
        iterations: usize,
        residual: f64,
        best: Option<Box<PowerAllocation>>,
    },

    #[error("loop does not match the grouping it is applied to: {0}")]
    StaleLoop(String),

    #[error("master problem infeasible: feasibility cut {cut} stuck at {value:.3e} after {rejected} rejected loops")]
    MasterInfeasible {
        cut: usize,
        value: f64,
        rejected: usize,
    },

    #[error("master search exceeded {0} moves")]
    MasterMoveCap(usize),

    #[error("enumeration of {groupings} groupings exceeds the limit of {limit}")]
    Guardrail { groupings: f64, limit: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }
}
