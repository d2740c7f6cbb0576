use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("invalid calibration: {0}")]
    InvalidCalibration(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("negative disparity offset: left start {x} is left of right start {x_bar}")]
    NegativeDisparityOffset { x: f64, x_bar: f64 },

    #[error("crop does not intersect the source raster")]
    EmptyCrop,

    #[error("non-positive total disparity: d = {disparity}, offset = {offset}")]
    NonPositiveDisparity { disparity: f64, offset: f64 },

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    Shape {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("need at least {needed} points, got {found}")]
    InsufficientPoints { needed: usize, found: usize },

    #[error("part locations are degenerate; yaw is unobservable")]
    RankDeficient,

    #[error("pose fit failed: {0}")]
    FitFailure(String),

    #[error("object not visible: {0}")]
    NotVisible(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("png: {0}")]
    Png(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
