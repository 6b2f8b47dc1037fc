//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("no spectral gap: collision operator is degenerate (alpha <= 1e-12)")]
    NoSpectralGap,

    #[error("macroscopic coercivity fails (beta <= 1e-12)")]
    MacroscopicCoercivityFails,

    #[error("scattering coefficient must be strictly positive everywhere")]
    NonPositiveSigma,

    #[error("scattering kernel must be strictly positive everywhere")]
    NonPositiveKernel,

    #[error("time step {dt} violates the stability bound {bound}")]
    StabilityBound { dt: f64, bound: f64 },

    #[error("decay fit needs at least 4 samples in the window, got {0}")]
    FitWindowTooSmall(usize),

    #[error("decay fit needs strictly positive norms")]
    NonPositiveNorms,

    #[error("derivative order {got} exceeds the cost guard {max}")]
    OrderGuard { got: usize, max: usize },

    #[error("kernel derivative of order {0} was not supplied")]
    MissingKernelOrder(usize),

    #[error("collocation needs at least {need} nodes, got {got}")]
    InsufficientNodes { need: usize, got: usize },

    #[error("expansion point is not a collocation node")]
    ExpansionPointNotANode,

    #[error("assumption (bounds in z) violated: non-positive coercivity constant at a z-node")]
    ZBoundsViolated,
}
