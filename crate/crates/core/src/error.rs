use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by generation, inference, evaluation and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dense probability matrix limited to n <= {limit}, got n = {n}")]
    TooLarge { n: usize, limit: usize },

    #[error("eigensolver did not converge (best residual {best_residual:.3e})")]
    ConvergenceFailure { best_residual: f64 },

    #[error("rank deficiency: eigenvalue {index} = {value:.3e} is at or below the positivity floor {floor:.3e}")]
    RankDeficiency { index: usize, value: f64, floor: f64 },

    #[error("embedding has no non-zero row, candidate pure set is empty")]
    EmptyCandidates,

    #[error("degenerate degrees on the candidate pure set")]
    DegenerateDegrees,

    #[error("pure set is ill-conditioned (kappa = {kappa:.3e} > {kappa_max:.3e})")]
    IllConditioned { kappa: f64, kappa_max: f64 },

    #[error("no eps0 on the grid produced exactly {k} pure-node representatives")]
    PureSetNotFound { k: usize },

    #[error("could not align communities between the two halves")]
    MergeFailure,

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("config: {0}")]
    Config(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping stage labels.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }

    /// Short status label used in experiment result rows.
    pub fn status(&self) -> &'static str {
        match self.root() {
            Error::PureSetNotFound { .. } | Error::EmptyCandidates | Error::DegenerateDegrees => {
                "pure-set-not-found"
            }
            Error::MergeFailure => "merge-failure",
            Error::RankDeficiency { .. } | Error::IllConditioned { .. } => "rank-deficiency",
            Error::ConvergenceFailure { .. } => "convergence-failure",
            _ => "error",
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.in_stage(stage))
    }
}
