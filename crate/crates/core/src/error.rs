//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Dimensions of two objects that must agree do not.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A game failed construction-time validation.
    #[error("invalid game: {0}")]
    InvalidGame(String),

    /// A strategy profile failed validation.
    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    /// An operation that requires an interior point received a boundary one.
    #[error("boundary point: {0}")]
    Boundary(String),

    /// A computation produced or received a non-finite value.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// The linear solver failed to reach the requested residual.
    #[error("solver did not converge: residual {residual:.3e} after {iterations} iterations")]
    SolverDiverged { residual: f64, iterations: usize },

    /// The adaptive integrator could not take a step above the minimum size.
    #[error("step size underflow at t = {t:.6e} (h = {h:.3e}); system too stiff at requested tolerance")]
    StepSizeUnderflow { t: f64, h: f64 },

    /// Successive quadrature refinements failed to settle.
    #[error("quadrature did not converge: refinement delta {delta:.3e} exceeds {tol:.3e}")]
    QuadratureNotConverged { delta: f64, tol: f64 },

    /// Two routes to the same quantity disagreed beyond rounding.
    #[error("internal consistency check failed: {0}")]
    InternalCheck(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
