use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error(
        "modality mismatch: mechanism `{mechanism}` cannot be applied to {modality} telemetry"
    )]
    ModalityMismatch {
        mechanism: String,
        modality: &'static str,
    },

    #[error("insufficient calibration data: need {needed:.3} s, trace covers {got:.3} s")]
    InsufficientCalibration { needed: f64, got: f64 },

    #[error("length mismatch: {left} vs {right} samples")]
    LengthMismatch { left: usize, right: usize },

    #[error("timestamp mismatch at frame {index}: {left} vs {right}")]
    TimestampMismatch { index: usize, left: f64, right: f64 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cannot parse mechanism expression `{expr}`: {reason}")]
    MechanismSyntax { expr: String, reason: String },

    #[error("identity `{0}` has no windows to enroll")]
    EmptyIdentity(String),

    #[error("dimension mismatch: probe has {probe} features, gallery has {gallery}")]
    DimensionMismatch { probe: usize, gallery: usize },

    #[error("session is missing {0} telemetry")]
    MissingModality(&'static str),

    #[error("trace ends at {trace_end:.3} s but the task runs until {task_end:.3} s")]
    TraceTooShort { trace_end: f64, task_end: f64 },

    #[error("incompatible metric {metric} for {modality} sweep")]
    IncompatibleMetric {
        metric: &'static str,
        modality: &'static str,
    },

    #[error("threshold infeasible: no point satisfies {threshold}; closest is {closest}")]
    ThresholdInfeasible { threshold: String, closest: String },

    #[error("invalid trace: {0}")]
    InvalidTrace(String),

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
