use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("near-linear dependence: smallest overlap eigenvalue {0:e} is below 1e-10")]
    LinearDependence(f64),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("invalid orbitals: orthonormality defect {0:e} exceeds 1e-8")]
    InvalidOrbitals(f64),

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("basis file {}: {reason}", path.display())]
    BasisFile { path: PathBuf, reason: String },

    #[error("config line {line}: {reason}")]
    ConfigSyntax { line: usize, reason: String },

    #[error("config field `{field}`: {reason}")]
    ConfigValue { field: String, reason: String },

    #[error("unknown scan axis `{axis}`; scannable fields: {}", scannable.join(", "))]
    UnknownAxis { axis: String, scannable: Vec<String> },

    #[error("trace format: {0}")]
    TraceFormat(String),

    #[error("stale trace: header fingerprint {recorded} does not match recomputed basis fingerprint {computed}")]
    StaleTrace { recorded: String, computed: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(field: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
