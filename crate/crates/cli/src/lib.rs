//! Implementation of the `harmonica` command line tool: game generation,
//! potential/harmonic decomposition, trajectory simulation with
//! diagnostics, divergence sampling, volume reports, and the interpolation
//! experiment between a potential and a harmonic game.
//!
//! Everything here is a plain function over parsed arguments so the
//! behavior is testable without spawning the binary; `main` only parses
//! flags and maps errors to exit codes.

pub mod commands;
pub mod mixture;

use harmonica_core::Error;

/// Process exit code for an error: 2 for bad input, 1 for solver or
/// integrator failures.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Json(_)
        | Error::Io(_)
        | Error::InvalidGame(_)
        | Error::InvalidProfile(_)
        | Error::ShapeMismatch(_)
        | Error::Boundary(_) => 2,
        Error::SolverDiverged { .. }
        | Error::StepSizeUnderflow { .. }
        | Error::QuadratureNotConverged { .. }
        | Error::NonFinite(_)
        | Error::InternalCheck(_) => 1,
    }
}
