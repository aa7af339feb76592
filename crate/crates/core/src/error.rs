use thiserror::Error;

/// Errors produced by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("conjugate gradients did not reach relative residual {tol:e} within {iterations} iterations (last {residual:e})")]
    LinearSolve { iterations: usize, residual: f64, tol: f64 },

    #[error("radius {radius} about x0 = {x0} leaves the admissible region (max {max_radius})")]
    RadiusOutOfRange { x0: f64, radius: f64, max_radius: f64 },

    #[error("weight exponent mismatch: field uses a = {field}, parameters give a = {params}")]
    WeightMismatch { field: f64, params: f64 },

    #[error("degenerate boundary mass H = {h:e} at x0 = {x0}, r = {radius} (unique-continuation alarm)")]
    DegenerateMass { x0: f64, radius: f64, h: f64 },

    #[error("step size underflow at theta = {theta}")]
    StepUnderflow { theta: f64 },

    #[error("no sign change found while bracketing {what} over [{lo}, {hi}]")]
    Bracket { what: &'static str, lo: f64, hi: f64 },

    #[error("outside the constructive regime: {0}")]
    OutOfRegime(String),

    #[error("point x0 = {x0} is not on the nodal set (|u(x0)| = {value:e})")]
    NotNodal { x0: f64, value: f64 },

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
