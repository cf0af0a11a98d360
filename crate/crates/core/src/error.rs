use thiserror::Error;

/// Failures raised by the numerical core.
///
/// `InvalidParameter` and `Config` describe bad input; everything else is a
/// numerical failure on otherwise valid input.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid value for `{key}`: {reason}")]
    InvalidParameter { key: String, reason: String },

    #[error("config: {0}")]
    Config(String),

    #[error("kernel range {range} is below the grid spacing {spacing}; refine the grid")]
    UnresolvedKernel { range: f64, spacing: f64 },

    #[error("kernel is not of positive type on this grid: min w^ = {min_hat:e}, w^(0) = {hat_zero:e}")]
    KernelNotPositive { min_hat: f64, hat_zero: f64 },

    #[error("grids differ")]
    GridMismatch,

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("box too small: |u| near the wall is {edge_ratio:e} of its maximum at half_width {half_width}; increase half_width")]
    BoxTooSmall { half_width: f64, edge_ratio: f64 },

    #[error("energy increased during the gradient flow ({before:e} -> {after:e})")]
    EnergyIncrease { before: f64, after: f64 },

    #[error("chemical potential routes disagree: formula {formula:e}, Rayleigh quotient {rayleigh:e}")]
    ChemicalPotentialMismatch { formula: f64, rayleigh: f64 },

    #[error("fit window holds {found} usable points, need at least {needed}")]
    FitWindow { found: usize, needed: usize },

    #[error("tunneling routes disagree: kinetic form {kinetic:e}, potential form {potential:e}; solver residual too large for this L")]
    TunnelingMismatch { kinetic: f64, potential: f64 },

    #[error("Hessian not coercive at this discretization")]
    NotCoercive,

    #[error("eigensolver failure: {0}")]
    Eigen(String),

    #[error("quasi-free constraint violated: defect {0:e}")]
    QuasiFree(f64),

    #[error("energy routes disagree: {first:e} vs {second:e}")]
    EnergyMismatch { first: f64, second: f64 },

    #[error("even split violated: argmin at n = {argmin}, expected {expected}")]
    EvenSplit { argmin: usize, expected: usize },
}

impl Error {
    pub(crate) fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { key: key.into(), reason: reason.into() }
    }

    /// True for errors caused by bad input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::InvalidParameter { .. } | Error::Config(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
