use thiserror::Error;

/// Errors raised by lattice operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("incompatible grids: {0}")]
    IncompatibleGrids(String),

    #[error("non-finite value at node ({ix}, {iy})")]
    NonFinite { ix: usize, iy: usize },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("point {point:?} is off the target surface (distance {distance:e})")]
    OffManifold { point: [f64; 3], distance: f64 },

    #[error("node ({ix}, {iy}) is off the target surface (distance {distance:e})")]
    OffManifoldNode { ix: usize, iy: usize, distance: f64 },

    #[error("retraction failed at node ({ix}, {iy}): {reason}")]
    RetractionFailed { ix: usize, iy: usize, reason: String },

    #[error("point {point:?} lies outside the tubular neighborhood of the target")]
    OutsideTube { point: [f64; 3] },

    #[error("closest-point iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("target `{0}` admits no global tangent frame; build a transported frame instead")]
    NoGlobalFrame(String),

    #[error("degenerate frame transport at node ({ix}, {iy}): projected length {length:e}")]
    DegenerateTransport { ix: usize, iy: usize, length: f64 },

    #[error("kernel truncation did not converge within {limit} offsets")]
    KernelTruncation { limit: usize },

    #[error("insufficient sampling: {0}")]
    InsufficientSampling(String),

    #[error("time mesh too coarse: {0}")]
    MeshTooCoarse(String),

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for LatticeError {
    fn from(err: std::io::Error) -> Self {
        LatticeError::Io(err.to_string())
    }
}

pub type Result<T, E = LatticeError> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &str, reason: impl Into<String>) -> LatticeError {
    LatticeError::InvalidParameter {
        name: name.to_string(),
        reason: reason.into(),
    }
}
