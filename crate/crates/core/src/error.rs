use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge: estimate {estimate:e} above tolerance {tol:e}")]
    Quadrature { estimate: f64, tol: f64 },

    #[error("no sign change on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("root iteration did not converge")]
    RootNotConverged,

    #[error("integrator step size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("integrator exceeded {0} steps")]
    TooManySteps(usize),

    #[error("Frobenius tail not converged: bound {bound:e} at order {order}")]
    TailNotConverged { order: usize, bound: f64 },

    #[error("series order {0} exceeds the overflow guard (512)")]
    OrderTooLarge(usize),

    #[error("bracket failure after {0} doublings")]
    BracketFailure(usize),

    #[error("bracket [{lo}, {hi}] contains {count} sign changes")]
    MultipleRoots { lo: f64, hi: f64, count: usize },

    #[error("eigenfunction zero count {found} differs from index {expected}")]
    ZeroCountMismatch { expected: usize, found: usize },

    #[error("confluent case a = b (a = {a}, b = {b})")]
    ConfluentCase { a: f64, b: f64 },

    #[error("continued fraction outside its convergence domain (|zeta| = {zeta_abs} <= 1)")]
    OutsideCfDomain { zeta_abs: f64 },

    #[error("continued fraction depth exhausted at {depth} (last change {change:e})")]
    DepthExhausted { depth: usize, change: f64 },

    #[error("continued fraction denominator vanished at level {level}")]
    PoleHit { level: usize },

    #[error("no crossing of the vertical axis within length budget {budget}")]
    NoCrossing { budget: f64 },

    #[error("path reached the boundary before crossing the vertical axis (rho = {rho})")]
    BoundaryArrival { rho: f64 },

    #[error("tangential crossing of the vertical axis (|dx1/drho| = {slope:e})")]
    TangentialCrossing { slope: f64 },

    #[error("shot residual {residual:e} above solution tolerance {tol:e}")]
    NotASolution { residual: f64, tol: f64 },

    #[error("z_count changed from {expected} to {found} at a = {a}, s = {s}")]
    ZJump { expected: usize, found: usize, a: f64, s: f64 },

    #[error("continuation step underflow at a = {a}")]
    ContinuationUnderflow { a: f64 },

    #[error("seed root not found for m = {m}: {reason}")]
    SeedRootNotFound { m: usize, reason: String },
}
