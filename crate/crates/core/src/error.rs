use alloc::string::String;

/// Errors produced by the core model, solvers and analysis routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("system must have at least one mechanical mode")]
    NoMechanicalModes,
    #[error("`{field}` has {found} entries, expected {expected}")]
    DimensionMismatch {
        field: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("`{field}` must be strictly positive, got {value}")]
    NonPositive { field: String, value: f64 },
    #[error("`{field}` must be nonnegative, got {value}")]
    Negative { field: String, value: f64 },
    #[error("`{field}` is not a finite number")]
    NonFinite { field: String },
    #[error("mean-field fixed point did not converge after {iterations} iterations (last update {last_update:e})")]
    FixedPointDiverged { iterations: usize, last_update: f64 },
    #[error("eigenvalue solver did not converge")]
    EigenSolverFailed,
    #[error("drift matrix is not stable (max real eigenvalue part {margin:e})")]
    Unstable { margin: f64 },
    #[error("Lyapunov solve rejected: relative residual {residual:e} exceeds tolerance")]
    IllConditioned { residual: f64 },
    #[error("covariance integration did not reach |dV/dt| < {tol:e} after {doublings} step doublings (reached {derivative_norm:e})")]
    OdeBudgetExceeded {
        doublings: usize,
        derivative_norm: f64,
        tol: f64,
    },
    #[error("matrix dimension {dim} exceeds the supported maximum {max}")]
    DimensionTooLarge { dim: usize, max: usize },
    #[error("mode index {index} out of range for {n_mech} mechanical modes")]
    ModeOutOfRange { index: usize, n_mech: usize },
    #[error("variance must be positive, got {0}")]
    NonPositiveVariance(f64),
    #[error("dark-mode census is undefined when every optomechanical coupling is zero")]
    CensusUndefined,
    #[error("matrix dimensions do not agree ({0} vs {1})")]
    ShapeMismatch(usize, usize),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
