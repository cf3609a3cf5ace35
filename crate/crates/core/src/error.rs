use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("point is at or behind the camera plane")]
    BehindCamera,
    #[error("ground homography is singular; the optical axis lies in the ground plane")]
    DegenerateView,
    #[error("back-projection lands on the line at infinity")]
    AtInfinity,
    #[error("intrinsics violate focal/principal-point bounds")]
    InvalidIntrinsics,
    #[error("matrix is not a proper rotation")]
    NotARotation,
    #[error("grid needs a positive cell size and at least one cell per axis")]
    InvalidGrid,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibError {
    #[error("degenerate correspondence set: {0}")]
    Degenerate(&'static str),
    #[error("pose refinement did not converge (rms {rms:.3} px)")]
    NoConvergence { rms: f64 },
    #[error("cold start failure: drone {drone} could not be calibrated at its first frame {frame}")]
    ColdStartFailure { frame: usize, drone: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegisterError {
    #[error("need at least 4 matches, got {0}")]
    InsufficientMatches(usize),
    #[error("best consensus has only {0} inliers")]
    DegenerateConsensus(usize),
    #[error("descriptor dimensions differ ({0} vs {1})")]
    DimensionMismatch(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum FuseError {
    #[error("no usable views in this frame")]
    NoUsableViews,
    #[error("occupancy maps are defined on different grids")]
    GridMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("no ground truth objects to score against")]
    NoGroundTruth,
}

/// Dataset and configuration I/O failures.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("schema error in {path}:{line}: {message}")]
    Schema { path: PathBuf, line: usize, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl DataError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    pub fn schema(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Self::Schema { path: path.into(), line, message: message.into() }
    }
}

/// Top-level error for the end-to-end pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Calib(#[from] CalibError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("frame {frame}, drone {drone}: {source}")]
    View {
        frame: usize,
        drone: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
