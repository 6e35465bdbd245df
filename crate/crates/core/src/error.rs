use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the matching pipeline.
#[derive(Debug, Error)]
pub enum FilerError {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("image has zero width or height")]
    ZeroSizedImage,
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("kernel dimensions must be odd, got {width}x{height}")]
    EvenKernel { width: usize, height: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("index out of range: {index} (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },
    #[error("response stack is empty")]
    EmptyStack,
    #[error("image too small: {width}x{height}, need at least {min_width}x{min_height}")]
    ImageTooSmall {
        width: usize,
        height: usize,
        min_width: usize,
        min_height: usize,
    },
    #[error("orientation weighting needs at least 3 orientations, got {0}")]
    TooFewOrientations(usize),
    #[error("patch of radius {radius} around ({x}, {y}) leaves the image")]
    PatchOutOfBounds { x: f64, y: f64, radius: f64 },
    #[error("descriptor patch received no votes")]
    EmptyPatch,
    #[error("descriptor set is empty")]
    EmptyDescriptorSet,
    #[error("need at least 3 matches, got {0}")]
    InsufficientMatches(usize),
    #[error("every sampled triple was collinear")]
    DegenerateGeometry,
    #[error("consensus found {found} inliers, need {required}")]
    NoConsensus { found: usize, required: usize },
    #[error("affine transform is not invertible")]
    NonInvertibleAffine,
    #[error("no features detected")]
    ZeroFeatures,
    #[error("report list is empty")]
    EmptyReportList,
    #[error("need at least {required} landmarks, got {found}")]
    TooFewLandmarks { found: usize, required: usize },
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("image codec error: {0}")]
    Image(#[from] image::ImageError),
}

pub type Result<T, E = FilerError> = std::result::Result<T, E>;
