//! Energy-stable, second-order-in-time, fourth-order-in-space finite difference
//! solver for the periodic Cahn-Hilliard equation
//!
//! ```text
//! phi_t = Lap mu,    mu = phi^3 - phi - eps^2 Lap phi
//! ```
//!
//! The time discretization is a modified BDF2 with explicit extrapolation of the
//! concave term and a Douglas-Dupont regularization; space uses the long
//! five-point stencil. Each step is a strictly convex minimization on the mass
//! hyperplane, solved by preconditioned steepest descent with FFT-diagonal
//! preconditioning.

pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod operators;
pub mod psd_solver;
pub mod random;
pub mod scheme;
pub mod spectral;
#[cfg(test)]
mod test_util;
pub mod verification;

pub use error::{Error, Result};
pub use grid::{Axis, Dim, Field, GridSpec};
pub use psd_solver::{InitialGuess, PsdConfig, SolveStats};
pub use scheme::{Forcing, ManufacturedSolution, SchemeParams, StepState};
pub use spectral::SpectralPlan;
