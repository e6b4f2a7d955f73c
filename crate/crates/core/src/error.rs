use std::path::PathBuf;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("missing depth at pixel ({u:.2}, {v:.2})")]
    MissingDepth { u: f64, v: f64 },
    #[error("pixel ({u:.2}, {v:.2}) outside {width}x{height} image")]
    OutOfBounds { u: f64, v: f64, width: u32, height: u32 },
    #[error("point is behind the camera (z = {z})")]
    BehindCamera { z: f64 },
    #[error("mask is empty")]
    EmptyMask,
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid rigid transform: {0}")]
    InvalidTransform(String),
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("too few points: need {needed}, have {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("point {index} has {found} neighbors within radius, need at least 3")]
    InsufficientNeighborhood { index: usize, found: usize },
    #[error("could not place object {object} after {attempts} attempts")]
    PlacementFailure { object: usize, attempts: usize },
    #[error("no valid depth in the window around ({u:.1}, {v:.1})")]
    NoDepth { u: f64, v: f64 },
    #[error("pose ({x:.1}, {y:.1}, {z:.1}) lies outside the workspace")]
    OutOfWorkspace { x: f64, y: f64, z: f64 },
    #[error("estimated height {0:.2} mm is not positive")]
    NegativeHeight(f64),
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("pose is outside the reachable workspace")]
    Unreachable,
    #[error("grasp missed: {points} object points in the closing region")]
    GraspMiss { points: usize },
    #[error("closing region touches {count} objects")]
    MultiObject { count: usize },
    #[error("gripper is not holding anything")]
    NothingHeld,
    #[error("gripper is already holding object {0}")]
    AlreadyHolding(usize),
    #[error("rocks are not in contact (gap {gap:.2} mm)")]
    NoContact { gap: f64 },
    #[error("illegal phase transition {from} -> {to}")]
    IllegalTransition { from: String, to: String },
    #[error("invalid config at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("empty input")]
    EmptyInput,
    #[error("malformed {what}: {message}")]
    Format { what: &'static str, message: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for errors caused by the file system rather than by inputs or tasks.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
