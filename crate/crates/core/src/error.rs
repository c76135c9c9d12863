use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    FileMissing(PathBuf),

    #[error("malformed header in {path}: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },

    #[error("unsupported bit depth in {path}: {reason}")]
    UnsupportedDepth { path: PathBuf, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("manifest parse error: {0}")]
    Parse(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("duplicate case: patient {patient_id}, cohort {cohort_id}, slice {slice_index}")]
    DuplicateCase {
        patient_id: String,
        cohort_id: String,
        slice_index: u32,
    },

    #[error("invalid manifest entry {index}: {reason}")]
    InvalidRecord { index: usize, reason: String },

    #[error("invalid target size {width}x{height}")]
    InvalidTarget { width: usize, height: usize },

    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("mask is empty")]
    EmptyMask,

    #[error("soft target requires at least one foreground pixel")]
    EmptyTarget,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("region of interest is empty")]
    EmptyRoi,

    #[error("region of interest extends outside the myocardium")]
    RoiOutsideMyocardium,

    #[error("split ratios must be positive and sum to 1, got {0:?}")]
    InvalidRatios([f64; 3]),

    #[error("cohort {0} has no patients")]
    EmptyCohort(String),

    #[error("no input to aggregate")]
    EmptyInput,

    #[error("sample is empty")]
    EmptySample,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::FileMissing(path)
        } else {
            Error::Io { path, source }
        }
    }
}

pub(crate) fn check_same_dims(left: (usize, usize), right: (usize, usize)) -> Result<()> {
    if left == right {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { left, right })
    }
}
