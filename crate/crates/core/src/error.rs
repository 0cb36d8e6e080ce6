use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid frame specification: {0}")]
    InvalidSpec(String),
    #[error("point ({x}, {y}) lies on the singular set x f(x, y) = 0")]
    SingularPoint { x: f64, y: f64 },
    #[error("rho must be positive, got {0}")]
    NonPositiveRho(f64),
    #[error("tolerance {0} outside [1e-14, 1e-4]")]
    BadTolerance(f64),
    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },
    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("theta = {0} is a multiple of pi")]
    SingularTheta(f64),
    #[error("no root bracketed in [{lo}, {hi}]")]
    RootNotBracketed { lo: f64, hi: f64 },
    #[error("crossing refinement diverged for segments {seg_a} and {seg_b}")]
    RefinementDiverged { seg_a: usize, seg_b: usize },
    #[error("no cut point found on ray theta = {theta} for t <= {t_max}")]
    NoCutFound { theta: f64, t_max: f64 },
    #[error("no conjugate point on ray theta = {theta} for t <= {t_max}")]
    NoConjugatePoint { theta: f64, t_max: f64 },
    #[error("degenerate conjugate point at theta = {0} is neither fold nor cusp")]
    UnclassifiedDegeneracy(f64),
    #[error("no geodesic found from ({0}, {1}) to ({2}, {3})")]
    NoGeodesicFound(f64, f64, f64, f64),
    #[error("Newton iteration diverged: {0}")]
    NewtonDiverged(String),
    #[error("convergence slope {slope:.3} below {threshold} ({label})")]
    SlopeBelowThreshold { label: String, slope: f64, threshold: f64 },
    #[error("linear solve failed: {0}")]
    LinearSolveFailure(String),
    #[error("time {t} below stability floor {floor}")]
    StabilityFloorViolated { t: f64, floor: f64 },
    #[error("poor fit, r^2 = {0:.5}")]
    PoorFit(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
