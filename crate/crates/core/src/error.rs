use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (‖A − A†‖_F = {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("singular momentum: |p| = {norm:.3e} is at or below the floor {floor:.3e}")]
    SingularMomentum { norm: f64, floor: f64 },

    #[error(
        "zero-mode guard violated: weight {weight:.3e} exceeds {guard:.3e} (singular-momentum operator on a state with k = 0 content)"
    )]
    ZeroModeGuard { weight: f64, guard: f64 },

    #[error("invalid physical parameters: {0}")]
    InvalidParams(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("Krylov propagation did not converge (error estimate {estimate:.3e}); retry with dt ≤ {suggested_dt:.3e}")]
    KrylovNotConverged { estimate: f64, suggested_dt: f64 },

    #[error("boundary flux {flux:.3e} exceeded the limit at t = {t}")]
    BoundaryFlux { flux: f64, t: f64 },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { path: path.into(), message: message.into() }
    }

    /// Process exit code: 1 for scientific failures and aborted runs, 2 for
    /// usage, configuration and precondition errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::BoundaryFlux { .. } | Error::KrylovNotConverged { .. } | Error::NonFinite(_) => 1,
            _ => 2,
        }
    }
}
