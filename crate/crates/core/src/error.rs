use thiserror::Error;

/// Errors raised by the numerical pipeline.
///
/// Every variant maps onto one of the CLI exit codes through [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported spatial dimension {0} (only 1 and 2 are available)")]
    UnsupportedDimension(usize),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("mesh too small: {0}")]
    MeshSize(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("spinor rank mismatch: expected {expected}, got {got}")]
    RankMismatch { expected: usize, got: usize },

    #[error("standing assumption violated: {0}")]
    Assumption(String),

    #[error("non-unit lapse (max |N - 1| = {violation:e}); conformally reduce first")]
    NonUnitLapse { violation: f64 },

    #[error(
        "adapted boundary operator on the {component} component has a kernel: \
         min |eigenvalue| = {min_abs:e} <= {threshold:e}"
    )]
    BoundaryKernel {
        component: String,
        min_abs: f64,
        threshold: f64,
    },

    #[error("constrained operator is not Hermitian: residual {residual:e} > {limit:e}")]
    NotHermitian { residual: f64, limit: f64 },

    #[error("linear solve failed: {0}")]
    Solver(String),

    #[error("Picard iteration failed: {0}")]
    Picard(String),

    #[error("time window: {0}")]
    Window(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("snapshot format: {0}")]
    Snapshot(String),

    #[error("mesh hash mismatch: snapshot was written for {found:016x}, current mesh is {expected:016x}")]
    MeshMismatch { expected: u64, found: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Data(_) | Error::Window(_) => 2,
            Error::UnsupportedDimension(_) | Error::MeshSize(_) | Error::Geometry(_) => 2,
            Error::Assumption(_) | Error::NonUnitLapse { .. } => 3,
            Error::BoundaryKernel { .. } => 4,
            Error::NotHermitian { .. } | Error::Solver(_) | Error::Picard(_) => 5,
            Error::Index(_) | Error::RankMismatch { .. } => 5,
            Error::Snapshot(_) | Error::MeshMismatch { .. } | Error::Io(_) => 5,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
