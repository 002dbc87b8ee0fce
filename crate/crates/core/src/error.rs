use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid ground-plane pose: {0}")]
    InvalidPose(String),
    #[error("not visible: {0}")]
    NotVisible(String),
    #[error("pixel ({u}, {v}) is at or above the horizon")]
    NoGroundIntersection { u: f64, v: f64 },

    #[error("unknown marking class `{0}`")]
    UnknownClass(String),
    #[error("unknown parameter `{param}` for template `{template}`")]
    UnknownParam { template: String, param: String },
    #[error("parameter `{param}` = {value} outside [{min}, {max}]")]
    ParamOutOfRange { param: String, value: f64, min: f64, max: f64 },
    #[error("invalid palette: {0}")]
    InvalidPalette(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid label map: {0}")]
    InvalidLabel(String),
    #[error("scene has no road pixels")]
    UnusableScene,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("degenerate class {id}: {reason}")]
    DegenerateClass { id: u8, reason: String },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid target id {id} at pixel {pixel}")]
    InvalidTarget { id: u8, pixel: usize },
    #[error("value outside domain: {0}")]
    Domain(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("layer index {index} outside 1..={layers}")]
    LayerIndex { index: usize, layers: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: png decode: {message}")]
    PngDecode { path: PathBuf, message: String },
    #[error("{path}: png encode: {message}")]
    PngEncode { path: PathBuf, message: String },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}
