use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the geometry, integration and ladder layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("tangent vectors are attached to different base points")]
    BasePointMismatch,

    #[error("vector is not tangent at the base point (defect {defect:.3e})")]
    NonTangentInput { defect: f64 },

    #[error("point is not on the manifold (defect {defect:.3e})")]
    InvalidPoint { defect: f64 },

    #[error("points are antipodal, the logarithm is not unique")]
    AntipodalPoints,

    #[error("matrix is not symmetric (defect {defect:.3e})")]
    NonSymmetricInput { defect: f64 },

    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("anisotropy parameter must be positive, got {0}")]
    NonPositiveBeta(f64),

    #[error("closed-form SE(3) maps require beta = 1, got {0}")]
    BetaNotOne(f64),

    #[error("covariant derivative of the curvature is not available for this oracle")]
    MissingDerivativeOracle,

    #[error("integrator produced a non-finite state")]
    NonFiniteState,

    #[error("shooting did not converge after {iterations} iterations (best residual {best_residual:.3e}, target {tolerance:.3e})")]
    ShootingDiverged {
        iterations: usize,
        best_residual: f64,
        tolerance: f64,
    },

    #[error("ladder diverged at rung {rung}: |v_i| = {norm:.3e} exceeds {limit:.3e}")]
    LadderDiverged { rung: usize, norm: f64, limit: f64 },

    #[error("rung {rung}: {source}")]
    Rung {
        rung: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("degenerate least-squares fit: {0}")]
    DegenerateFit(&'static str),

    #[error("invalid experiment: {0}")]
    InvalidSpec(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    /// Attach the rung index to an error raised inside a ladder iteration.
    pub(crate) fn at_rung(self, rung: usize) -> Self {
        match self {
            e @ (Error::Rung { .. } | Error::LadderDiverged { .. }) => e,
            e => Error::Rung {
                rung,
                source: Box::new(e),
            },
        }
    }

    /// Strip rung context.
    pub fn root(&self) -> &Error {
        match self {
            Error::Rung { source, .. } => source.root(),
            e => e,
        }
    }

    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            Error::NonFiniteState
                | Error::ShootingDiverged { .. }
                | Error::LadderDiverged { .. }
                | Error::AntipodalPoints
                | Error::NotPositiveDefinite { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
