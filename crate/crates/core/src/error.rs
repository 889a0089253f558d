use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid body parameters: {0}")]
    InvalidParams(String),

    #[error("invalid body assets: {0}")]
    InvalidAssets(String),

    #[error("vertex budget {budget} too small: every bone needs at least {per_bone} vertices ({bones} bones)")]
    BudgetTooSmall {
        budget: usize,
        per_bone: usize,
        bones: usize,
    },

    #[error("point is behind the camera (z = {z})")]
    BehindCamera { z: f64 },

    #[error("dimension mismatch in {layer}: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        layer: String,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("label id {id} is not present in the legend")]
    UnknownLabel { id: u8 },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("estimation failed: {0}")]
    EstimationFailure(String),

    #[error("vector is not unit length (norm {norm})")]
    NonUnitVector { norm: f64 },

    #[error("mesh topology mismatch: {0}")]
    TopologyMismatch(String),

    #[error("mesh has no faces")]
    EmptyMesh,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed {what}: {detail}")]
    Format { what: String, detail: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(what: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Format {
            what: what.into(),
            detail: detail.into(),
        }
    }

    /// True for failures of robust estimation (no plane, degenerate floor).
    pub fn is_estimation_failure(&self) -> bool {
        matches!(self, Error::EstimationFailure(_) | Error::DegenerateGeometry(_))
    }

    /// True for failures reading or writing files.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Io { .. } | Error::Image { .. } | Error::Json { .. } | Error::Format { .. }
        )
    }
}
