use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("eigensolve did not converge: residual {residual:e} above {tolerance:e}")]
    NonConvergedEigensolve { residual: f64, tolerance: f64 },

    #[error("insufficient quadrature: defect {defect:e} above {tolerance:e}")]
    InsufficientQuadrature { defect: f64, tolerance: f64 },

    #[error("level index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("energy {energy} within {distance:e} of critical value {critical} (guard {guard:e})")]
    TooCloseToCritical {
        energy: f64,
        critical: f64,
        distance: f64,
        guard: f64,
    },

    #[error("transverse basis too small: need level {needed}, basis has n_max = {n_max}")]
    BasisTooSmall { needed: usize, n_max: usize },

    #[error("tabulated grid is not rectangular: {0}")]
    NonRectangularGrid(String),

    #[error("non-finite potential sample at {0}")]
    NonFiniteSample(String),

    #[error("potential does not decay like <x>^-{h}: sup grew from {inner:e} to {outer:e}")]
    DecayViolation { h: f64, inner: f64, outer: f64 },

    #[error("linear system is numerically singular (pivot {pivot:e}); embedded eigenvalue or grid too coarse")]
    SingularSystem { pivot: f64 },

    #[error("energy {energy} violates the critical-set guard")]
    GuardViolation { energy: f64 },

    #[error("matching defect {defect:e} above {tolerance:e}; increase X or n_evanescent")]
    MatchDefectTooLarge { defect: f64, tolerance: f64 },

    #[error("switch support [{lo}, {hi}] not inside the x-grid [{grid_lo}, {grid_hi}]")]
    SupportOutsideGrid {
        lo: f64,
        hi: f64,
        grid_lo: f64,
        grid_hi: f64,
    },

    #[error("energy window [{lo}, {hi}] contains critical value {critical}")]
    WindowHitsCritical { lo: f64, hi: f64, critical: f64 },

    #[error("Parseval defect does not decrease under refinement: {coarse:e} -> {fine:e}")]
    TruncationDominates { coarse: f64, fine: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("unknown {kind} strategy `{name}` (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },
}
