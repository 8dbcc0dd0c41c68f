use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("malformed raster {}: {reason}", path.display())]
    MalformedRaster { path: PathBuf, reason: String },

    #[error("label {value} at pixel {index} is out of range for a taxonomy with {classes} classes")]
    LabelOutOfRange { value: u8, index: usize, classes: usize },

    #[error("i/o failure on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate sample id {0:?}")]
    DuplicateId(String),

    #[error("label {0} has no entry in the class mapping")]
    UnmappedLabel(u8),

    #[error("invalid taxonomy: {0}")]
    InvalidTaxonomy(String),

    #[error("invalid mask: {0}")]
    InvalidMask(String),

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("taxonomy mismatch: {0:?} vs {1:?}")]
    TaxonomyMismatch(String, String),

    #[error("class id {0} is not part of the taxonomy")]
    UnknownClass(u8),

    #[error("no class in the averaging set has a defined value")]
    NoDefinedClasses,

    #[error("foreground is empty")]
    EmptyForeground,

    #[error("class {0} is absent from the annotation")]
    ClassAbsentInAnnotation(u8),

    #[error("invalid weighted-measure parameters: {0}")]
    InvalidParams(String),

    #[error("scale factor must be positive, got {0}")]
    NonPositiveFactor(f64),

    #[error("scale factor {factor} shrinks a {width}x{height} canvas to nothing")]
    ResizeToZero { factor: f64, width: usize, height: usize },

    #[error("taxonomy {0:?} has no object classes")]
    EmptyObjectClassSet(String),

    #[error("empty input")]
    EmptyInput,

    #[error("invalid augmentation config: {0}")]
    InvalidConfig(String),

    #[error("crop {crop:?} is larger than the scaled size {scaled:?}")]
    CropLargerThanScaled {
        crop: (usize, usize),
        scaled: (usize, usize),
    },

    #[error("invalid jitter factor: {0}")]
    InvalidFactor(String),

    #[error("noise variance must be non-negative, got {0}")]
    NegativeVariance(f64),

    #[error("sample {sample:?} has no prediction for model {model:?}")]
    MissingPrediction { sample: String, model: String },

    #[error("sample {id:?}: {source}")]
    Sample {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("manifest has no samples")]
    EmptyManifest,

    #[error("inconsistent report: {0}")]
    InvalidReport(String),

    #[error("reference key {0:?} does not match any report entry")]
    KeyMismatch(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path)
        } else {
            Error::Io { path, source }
        }
    }

    pub(crate) fn in_sample(self, id: &str) -> Self {
        match self {
            already @ Error::Sample { .. } => already,
            other => Error::Sample {
                id: id.to_string(),
                source: Box::new(other),
            },
        }
    }
}
