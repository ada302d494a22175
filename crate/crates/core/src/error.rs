use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("lattice too small: {0}")]
    SizeTooSmall(String),

    #[error("slot {slot} out of range for a register of {total} spins")]
    SlotOutOfRange { slot: usize, total: usize },

    #[error("invalid site index {index} (lattice has {sites} sites)")]
    InvalidSite { index: usize, sites: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    #[error("operator leaks out of the sector (norm {norm:.3e} > {tolerance:.1e})")]
    Leakage { norm: f64, tolerance: f64 },

    #[error("unsupported for this layout: {0}")]
    UnsupportedLayout(String),

    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),

    #[error("infeasible or empty charge sector: {0}")]
    EmptySector(String),

    #[error("dimension {dim} exceeds the dense cap {cap}; shrink the lattice or choose a smaller sector")]
    OverDenseCap { dim: usize, cap: usize },

    #[error("eigensolver failed: {0}")]
    Solver(String),

    #[error("Liouvillian has an empty kernel (smallest |lambda| = {0:.3e})")]
    EmptyKernel(f64),

    #[error("integrator step size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("integrator failed to reach tolerance: {0}")]
    Tolerance(String),
}
