use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration at `{path}`: {reason}")]
    Config { path: String, reason: String },

    #[error("grid does not resolve the field: {0}")]
    Resolution(String),

    #[error("array shape mismatch: expected {expected} samples, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("fields live on different grids or wavelengths")]
    GridMismatch,

    #[error("propagation distance must be non-negative, got {0}")]
    NegativeDistance(f64),

    #[error("aperture radius {radius} m outside (0, {half_extent}] m")]
    ApertureRadius { radius: f64, half_extent: f64 },

    #[error("per-step Rytov variance {step_rytov:.4} violates bound {bound} with {n_steps} steps")]
    StepBound {
        step_rytov: f64,
        bound: f64,
        n_steps: usize,
    },

    #[error("fields come from different turbulence realizations")]
    RealizationMismatch,

    #[error("mode l = {0} missing from crosstalk matrix")]
    MissingMode(i32),

    #[error("channel transmits no power into the encoding subspace (trace {0:e})")]
    LossyChannel(f64),

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("density matrix has negative eigenvalue {0:e}")]
    NegativeEigenvalue(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported dimension d = {0}")]
    UnsupportedDimension(usize),

    #[error("beacon power {0:e} too low to locate a focal spot")]
    WeakBeacon(f64),

    #[error("need at least {min} realizations, got {got}")]
    TooFewRealizations { min: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

impl Error {
    /// Stable machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config { .. } => "config",
            Error::Resolution(_) => "resolution",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::GridMismatch => "grid_mismatch",
            Error::NegativeDistance(_) => "negative_distance",
            Error::ApertureRadius { .. } => "aperture_radius",
            Error::StepBound { .. } => "step_bound",
            Error::RealizationMismatch => "realization_mismatch",
            Error::MissingMode(_) => "missing_mode",
            Error::LossyChannel(_) => "lossy_channel",
            Error::NotHermitian(_) => "not_hermitian",
            Error::NegativeEigenvalue(_) => "negative_eigenvalue",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::UnsupportedDimension(_) => "unsupported_dimension",
            Error::WeakBeacon(_) => "weak_beacon",
            Error::TooFewRealizations { .. } => "too_few_realizations",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    /// Config field path, when the error concerns one.
    pub fn path(&self) -> Option<&str> {
        match self {
            Error::Config { path, .. } => Some(path),
            _ => None,
        }
    }
}
