//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("schema invalid: {0}")]
    Schema(String),

    #[error("label {label} out of range for schema with {classes} classes")]
    LabelOutOfRange { label: u8, classes: usize },

    #[error("mask dimensions {0}x{1} do not match {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),

    #[error("degenerate point correspondence: {0}")]
    DegenerateCorrespondence(String),

    #[error("homography is singular (|det| = {0:e})")]
    SingularHomography(f64),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("destination cell ({0}, {1}) is not traversable")]
    DestinationNotTraversable(usize, usize),

    #[error("no safe local destination in mask")]
    NoDestination,

    #[error("destination unreachable from start through traversable cells")]
    NoPath,

    #[error("sensor pose ({0:.1}, {1:.1}) is not on a traversable cell")]
    PoseNotTraversable(f64, f64),

    #[error("scenario infeasible: {0}")]
    InfeasibleScenario(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wrap an error with the pipeline stage it occurred in. Outcome errors
    /// that map to dedicated exit codes are passed through untouched.
    pub fn at_stage(self, stage: &'static str) -> Error {
        match self {
            Error::NoDestination | Error::NoPath => self,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
