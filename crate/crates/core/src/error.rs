use num_complex::Complex64;
use thiserror::Error;

/// Errors produced by the numerical pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("truncation radius M = {m} must exceed the defect support radius rho = {rho}")]
    TruncationInsideSupport { m: f64, rho: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("step size underflow at x = {x} (h = {h:e})")]
    StepSizeUnderflow { x: f64, h: f64 },

    #[error("integrator exceeded {max_steps} steps before reaching x = {target} (stopped at x = {x})")]
    TooManySteps { x: f64, target: f64, max_steps: usize },

    #[error("non-finite state encountered at x = {x}")]
    NonFinite { x: f64 },

    #[error("energy {energy} lies in a band (|discriminant| = {abs_discriminant} <= 2)")]
    InBand { energy: f64, abs_discriminant: f64 },

    #[error("z = {z} lies on the branch cut of the {branch} square-root branch")]
    BranchCut { z: Complex64, branch: &'static str },

    #[error("E = 0 is not supported: the outgoing condition is not differentiable there")]
    ZeroEnergy,

    #[error("{stage} did not converge after {iterations} iterations (last step {last_step:e})")]
    NonConvergence {
        stage: &'static str,
        iterations: usize,
        last_step: f64,
    },

    #[error("singular Jacobian in the two-sided solver (|N| = {norm:e})")]
    SingularJacobian { norm: f64 },

    #[error("precondition violated: {what} (margin {margin:e}, scale {scale:e})")]
    PreconditionViolated {
        what: &'static str,
        margin: f64,
        scale: f64,
    },

    #[error("rate fit needs at least {needed} points above the noise floor, got {got}")]
    InsufficientPoints { needed: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
