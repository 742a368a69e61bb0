//! Solver library for composite objectives `Φ(x) = Σ_n f_n(x) + h(x)` built
//! around the proximal incremental aggregated gradient (PIAG) iteration, with
//! an executable encoding of its linear-convergence theory under the quadratic
//! growth condition.
//!
//! The crate is organized as:
//!
//! * [`model`] — problem types (smooth components, regularizers, ground
//!   truth) and the elementary evaluations: objective, full gradient,
//!   proximal step.
//! * [`delays`] — bounded-staleness schedules: explicit delay vectors for
//!   history-mode runs, refresh sets for cache-mode runs.
//! * [`solver`] — the PIAG/FBS iteration engines and the convergence trace
//!   they record.
//! * [`rates`] — step-size bound, rate formulas, Lyapunov function,
//!   recurrence certificates, and envelope/descent-inequality checkers.
//! * [`problems`] — synthetic problem generators with exact or estimated
//!   ground truth, plus a JSON-serializable description for replay.

pub mod delays;
pub mod error;
pub mod model;
pub mod problems;
pub mod rates;
pub mod solver;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
