//! Error type shared across the crate.

use nalgebra::DVector;

use crate::solver::ConvergenceTrace;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("ground truth required for {0}")]
    MissingGroundTruth(&'static str),

    #[error(
        "schedule violation at iteration {iteration}: component {component} \
         requests delay {delay} but only {available} past iterates exist"
    )]
    ScheduleViolation {
        iteration: usize,
        component: usize,
        delay: usize,
        available: usize,
    },

    #[error("schedule kind `{0}` has no cache-mode interpretation")]
    NoCacheMode(&'static str),

    /// Non-finite iterate. Carries the last finite iterate and the trace
    /// recorded up to that point.
    #[error("divergence at iteration {iteration}: iterate became non-finite")]
    Divergence {
        iteration: usize,
        last_finite: Box<DVector<f64>>,
        trace: Box<ConvergenceTrace>,
    },

    #[error("generation error: {0}")]
    Generation(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("invalid certificate: {0}")]
    InvalidCertificate(String),

    /// The envelope check is vacuous when the trace starts on the solution
    /// set but later rows move away from it.
    #[error("degenerate start: Ψ(x₀)=0 but the trace leaves the solution set")]
    DegenerateStart,

    #[error("trace index {index} out of range ({rows} rows, step data on the first {rows}−1)")]
    TraceIndex { index: usize, rows: usize },

    #[error(
        "ground truth inconsistent at iteration {iteration}: \
         objective fell below the stated optimal value by {deficit:e}"
    )]
    InconsistentGroundTruth { iteration: usize, deficit: f64 },
}
