use thiserror::Error;

use crate::graph::CriticalGraph;

/// Errors raised by the numerical layers.
#[derive(Debug, Error)]
pub enum EqmError {
    #[error("invalid potential: {0}")]
    InvalidPotential(String),
    #[error("invalid endpoint set: {0}")]
    InvalidEndpoints(String),
    #[error("index {index} out of range (limit {limit})")]
    OutOfRange { index: usize, limit: usize },
    #[error("point {0} is not on a cut")]
    NotOnCut(num_complex::Complex64),
    #[error("on-cut; use side-resolved boundary values")]
    OnCut,
    #[error("quadrature stalled (last difference {difference:e})")]
    QuadratureStalled { difference: f64 },
    #[error("gap path blocked between cuts {0} and {1}")]
    GapPathBlocked(usize, usize),
    #[error("no cut-avoiding path to {0}")]
    NoPath(num_complex::Complex64),
    #[error("coalescing endpoints (separation {0:e})")]
    CoalescingEndpoints(f64),
    #[error("near-singular system (condition {0:e})")]
    NearSingular(f64),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("lagrange multiplier extraction failed (radius disagreement {0:e})")]
    LagrangeExtraction(f64),
    #[error("trajectory step-size underflow at {0}")]
    StepUnderflow(num_complex::Complex64),
    #[error("trajectory runaway after arclength {0}")]
    Runaway(f64),
    #[error("graph census violation: {reason}")]
    CensusViolation {
        reason: String,
        graph: Box<CriticalGraph>,
    },
    #[error("resolution insufficient: {0}")]
    ResolutionInsufficient(String),
}

pub type Result<T> = std::result::Result<T, EqmError>;
