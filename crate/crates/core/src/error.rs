use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad header in {path}: {msg}")]
    Header { path: PathBuf, msg: String },

    #[error("payload size mismatch in {path}: header declares {expected} bytes, file holds {actual}")]
    PayloadSize {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },

    #[error("sample {value} at index {index} is not representable as {sample_type}")]
    SampleRange {
        value: f64,
        index: usize,
        sample_type: &'static str,
    },

    #[error("wavelength axis must be strictly increasing with at least 2 bands")]
    BadAxis,

    #[error("non-finite value in cube data")]
    NonFinite,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("reflectivity {0} outside (0, 1]")]
    BadReflectivity(f64),

    #[error("degenerate calibration reference at band {band}: white {white} <= dark {dark}")]
    DegenerateReference { band: usize, white: f64, dark: f64 },

    #[error("savitzky-golay width {0} must be odd")]
    EvenWindow(usize),

    #[error("savitzky-golay order {order} must be smaller than width {width}")]
    OrderTooHigh { order: usize, width: usize },

    #[error("invalid band range: lo {lo} must be < hi {hi}")]
    InvalidRange { lo: f64, hi: f64 },

    #[error("band crop [{lo} nm, {hi} nm] selects no bands")]
    EmptyBandSelection { lo: f64, hi: f64 },

    #[error("wavelength axis mismatch: {0}")]
    AxisMismatch(String),

    #[error("no regions survive segmentation")]
    NoRegions,

    #[error("class '{0}' has no training spectra")]
    EmptyClass(String),

    #[error("label '{0}' not covered by the grouping map")]
    UnknownLabel(String),

    #[error("no label supplied for region {0}")]
    MissingLabel(u32),

    #[error("class '{0}' not present in the proportion map")]
    UnknownClass(String),

    #[error("region {0} has no valid pixels")]
    EmptyRegion(u32),

    #[error("threshold training needs both classes, got only '{0}'")]
    SingleClass(String),

    #[error("model file {path} has version {found}, expected {expected}")]
    ModelVersion {
        path: PathBuf,
        found: u32,
        expected: u32,
    },

    #[error("malformed model file {path}: {msg}")]
    ModelFormat { path: PathBuf, msg: String },

    #[error("scene layout error: {0}")]
    SceneLayout(String),

    #[error("endmember separation infeasible: {0}")]
    Separation(String),

    #[error("malformed labels file {path}: {msg}")]
    LabelsFormat { path: PathBuf, msg: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
