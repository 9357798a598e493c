use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("operator needs at least {required} points per axis, grid has {got}")]
    TooFewPoints { required: usize, got: usize },

    #[error("axis {axis} does not exist on a {dim}-D grid")]
    InvalidAxis { axis: usize, dim: usize },

    #[error("right-hand side has mean {mean:e}, exceeding tolerance {tol:e}; the periodic problem is not solvable")]
    NonZeroMean { mean: f64, tol: f64 },

    #[error("iterate mean {mean:e} differs from the conserved mean {expected:e}")]
    MassMismatch { mean: f64, expected: f64 },

    #[error("non-finite Fourier symbol at mode ({kx}, {ky})")]
    NonFiniteSymbol { kx: usize, ky: usize },

    #[error("search direction is identically zero")]
    DegenerateDirection,

    #[error("line search failed: {0}")]
    LineSearch(String),

    #[error("nonlinear solver did not converge in {iterations} iterations (last residual {last:e}, target {target:e})")]
    NotConverged {
        iterations: usize,
        last: f64,
        target: f64,
        history: Vec<f64>,
    },

    #[error("non-finite value in solution at step {step}")]
    NonFinite { step: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;
