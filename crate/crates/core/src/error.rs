use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Three of the four points in `side` ("src" or "dst") are collinear, or
    /// the linear system could not be solved to the required pivot accuracy.
    #[error("degenerate correspondences: {reason}")]
    DegenerateCorrespondences {
        reason: String,
        /// Indices of the offending corners, when a collinear triple was found.
        corners: Option<[usize; 3]>,
    },

    #[error("point ({x}, {y}) lies on the vanishing line of the homography")]
    PointAtInfinity { x: f64, y: f64 },

    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    #[error("invalid homography: {0}")]
    InvalidHomography(String),

    #[error("invalid ROI: {0}")]
    InvalidRoi(String),

    #[error("ROI corner {corner} at ({x}, {y}) lies outside the {width}x{height} image")]
    RoiOutOfBounds { corner: usize, x: f64, y: f64, width: u32, height: u32 },

    #[error("invalid raster: {0}")]
    InvalidRaster(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid manifest: {0}")]
    InvalidManifest(String),

    #[error("detection {index} on image {image_id:?} has no confidence")]
    MissingConfidence { index: usize, image_id: String },

    #[error("point ({x}, {y}, {z}) is behind the camera")]
    BehindCamera { x: f64, y: f64, z: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("failed to decode image {path}: {source}")]
    ImageDecode {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("failed to encode image {path}: {source}")]
    ImageEncode {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json { path: path.into(), source }
    }
}
