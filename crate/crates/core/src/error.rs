use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid strip parameters: {0}")]
    InvalidParams(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("simulation diverged at step {step} (substep {substep}): non-finite state in sphere {sphere}")]
    Divergence {
        step: u64,
        substep: usize,
        sphere: usize,
    },

    #[error("path run diverged at arc length {arc_length:.4} m: {source}")]
    PathDivergence {
        arc_length: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid policy weights: {0}")]
    InvalidWeights(String),

    #[error("homography estimation needs at least 4 correspondences, got {0}")]
    TooFewCorrespondences(usize),

    #[error("degenerate point configuration (rank deficient design matrix)")]
    RankDeficient,

    #[error("homography is singular or ill-conditioned")]
    SingularHomography,

    #[error("search line endpoint outside the image: ({0}, {1})")]
    OutsideImage(f64, f64),

    #[error("training aborted in generation {generation}: {failed}/{total} rollouts failed")]
    TrainingAborted {
        generation: usize,
        failed: usize,
        total: usize,
    },

    #[error("parse error in {what}: {msg}")]
    Parse { what: String, msg: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(what: impl Into<String>, msg: impl ToString) -> Self {
        Error::Parse {
            what: what.into(),
            msg: msg.to_string(),
        }
    }
}
