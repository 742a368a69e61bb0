//! PIAG iteration engines and the convergence trace they record.
//!
//! Two engines implement the same update `x_{k+1} = prox_{αh}(x_k − α·g_k)`
//! with `g_k = Σ_n ∇f_n(x_{k−τ_k^n})`:
//!
//! * **cache mode** (default) stores one gradient per component, refreshes a
//!   scheduled subset each iteration, and recomputes the aggregate sum from
//!   the cache in full every iteration — the cheap-iteration engine. The sum
//!   is never maintained incrementally, so no add/subtract drift accumulates.
//! * **history mode** keeps a ring buffer of the last `τ+1` iterates and
//!   re-evaluates all `N` gradients at delayed points every iteration — the
//!   literal reference implementation used as an oracle in tests.
//!
//! With the zero schedule both reduce to forward-backward splitting, for
//! which [`fbs_iterate`] provides an independent code path.

use std::collections::VecDeque;

use nalgebra::DVector;

use crate::delays::{DelaySchedule, RefreshCursor};
use crate::model::ProblemInstance;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    History,
    Cache,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::History => "history",
            Mode::Cache => "cache",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EngineChoice {
    /// Cache mode when the schedule supports it, history mode otherwise.
    #[default]
    Auto,
    Cache,
    History,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub engine: EngineChoice,
    /// Record an `x_k` snapshot per trace row (needed for descent-inequality
    /// probes and iterate export).
    pub record_iterates: bool,
}

/// Iteration budget plus an optional Lyapunov tolerance (requires ground
/// truth). Gradient-norm stopping is deliberately absent: it is meaningless
/// under staleness.
#[derive(Debug, Clone)]
pub struct StoppingRule {
    pub max_iterations: usize,
    pub psi_tolerance: Option<f64>,
}

impl StoppingRule {
    pub fn max_iterations(max_iterations: usize) -> Self {
        StoppingRule { max_iterations, psi_tolerance: None }
    }

    pub fn with_psi_tolerance(mut self, tol: f64) -> Self {
        self.psi_tolerance = Some(tol);
        self
    }
}

enum Engine {
    History {
        /// `window[j] = x_{k−j}`; holds exactly `min(k, τ)+1` iterates.
        window: VecDeque<DVector<f64>>,
        tau: usize,
    },
    Cache {
        grads: Vec<DVector<f64>>,
        cursor: RefreshCursor,
    },
}

/// Mutable state of one solver run: the iterate, the iteration counter, and
/// the engine-specific staleness bookkeeping.
pub struct SolverState {
    k: usize,
    x: DVector<f64>,
    engine: Engine,
}

impl SolverState {
    pub fn new_history(x0: DVector<f64>, tau: usize) -> Self {
        let mut window = VecDeque::with_capacity(tau + 2);
        window.push_front(x0.clone());
        SolverState {
            k: 0,
            x: x0,
            engine: Engine::History { window, tau },
        }
    }

    pub fn new_cache(x0: DVector<f64>, schedule: &DelaySchedule) -> Result<Self> {
        if !schedule.supports_cache_mode() {
            return Err(Error::NoCacheMode(schedule.kind().name()));
        }
        let d = x0.len();
        let grads = vec![DVector::zeros(d); schedule.n_components()];
        Ok(SolverState {
            k: 0,
            x: x0,
            engine: Engine::Cache {
                grads,
                cursor: RefreshCursor::new(schedule.clone()),
            },
        })
    }

    pub fn for_schedule(
        x0: DVector<f64>,
        schedule: &DelaySchedule,
        choice: EngineChoice,
    ) -> Result<Self> {
        match choice {
            EngineChoice::History => Ok(SolverState::new_history(x0, schedule.tau())),
            EngineChoice::Cache => SolverState::new_cache(x0, schedule),
            EngineChoice::Auto => {
                if schedule.supports_cache_mode() {
                    SolverState::new_cache(x0, schedule)
                } else {
                    Ok(SolverState::new_history(x0, schedule.tau()))
                }
            }
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn x(&self) -> &DVector<f64> {
        &self.x
    }

    pub fn mode(&self) -> Mode {
        match self.engine {
            Engine::History { .. } => Mode::History,
            Engine::Cache { .. } => Mode::Cache,
        }
    }
}

/// Per-step record returned by the iterate functions.
#[derive(Debug, Clone)]
pub struct StepInfo {
    /// `‖x_{k+1} − x_k‖²`.
    pub step_sq: f64,
    /// Realized delay per component for the gradient used in this step.
    pub delays: Vec<usize>,
}

/// `g_k = Σ_n ∇f_n(x_{k−τ_k^n})` from a history-mode state, accumulated in
/// ascending component order.
pub fn aggregated_gradient(
    state: &SolverState,
    problem: &ProblemInstance,
    delays: &[usize],
) -> Result<DVector<f64>> {
    let Engine::History { window, .. } = &state.engine else {
        return Err(Error::InvalidParameter(
            "aggregated_gradient requires a history-mode state".into(),
        ));
    };
    if delays.len() != problem.n_components() {
        return Err(Error::DimensionMismatch {
            expected: problem.n_components(),
            got: delays.len(),
        });
    }
    let mut g = DVector::zeros(problem.dimension());
    for (n, &delay) in delays.iter().enumerate() {
        if delay >= window.len() {
            return Err(Error::ScheduleViolation {
                iteration: state.k,
                component: n,
                delay,
                available: window.len() - 1,
            });
        }
        g += problem.component(n).gradient(&window[delay]);
    }
    Ok(g)
}

fn forward_backward(
    problem: &ProblemInstance,
    alpha: f64,
    x: &DVector<f64>,
    g: &DVector<f64>,
) -> Result<DVector<f64>> {
    let y = x - g * alpha;
    problem.prox_step(alpha, &y)
}

fn check_step_preconditions(
    problem: &ProblemInstance,
    state: &SolverState,
    alpha: f64,
) -> Result<()> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "step size must be positive and finite, got {alpha}"
        )));
    }
    if state.x.len() != problem.dimension() {
        return Err(Error::DimensionMismatch {
            expected: problem.dimension(),
            got: state.x.len(),
        });
    }
    Ok(())
}

/// One PIAG step: aggregate (possibly stale) gradients per the schedule,
/// take the forward step, then the backward prox step.
pub fn piag_iterate(
    state: &mut SolverState,
    problem: &ProblemInstance,
    schedule: &DelaySchedule,
    alpha: f64,
) -> Result<StepInfo> {
    check_step_preconditions(problem, state, alpha)?;
    if schedule.n_components() != problem.n_components() {
        return Err(Error::DimensionMismatch {
            expected: problem.n_components(),
            got: schedule.n_components(),
        });
    }
    let k = state.k;

    let (g, delays) = match &mut state.engine {
        Engine::History { window, .. } => {
            let delays = schedule.delays_at(k);
            let mut g = DVector::zeros(problem.dimension());
            for (n, &delay) in delays.iter().enumerate() {
                if delay >= window.len() {
                    return Err(Error::ScheduleViolation {
                        iteration: k,
                        component: n,
                        delay,
                        available: window.len() - 1,
                    });
                }
                g += problem.component(n).gradient(&window[delay]);
            }
            (g, delays)
        }
        Engine::Cache { grads, cursor } => {
            for c in cursor.advance(k)? {
                grads[c] = problem.component(c).gradient(&state.x);
            }
            let delays: Vec<usize> =
                cursor.last_refresh().iter().map(|&j| k - j).collect();
            // Full recomputation of the aggregate from the cache; no
            // incremental add/subtract drift.
            let mut g = DVector::zeros(problem.dimension());
            for cached in grads.iter() {
                g += cached;
            }
            (g, delays)
        }
    };

    let bound = schedule.tau().min(k);
    assert!(
        delays.iter().all(|&t| t <= bound),
        "realized delay exceeds the staleness bound at iteration {k}"
    );

    let x_next = forward_backward(problem, alpha, &state.x, &g)?;
    if !x_next.iter().all(|v| v.is_finite()) {
        return Err(Error::Divergence {
            iteration: k,
            last_finite: Box::new(state.x.clone()),
            trace: Box::new(ConvergenceTrace::empty()),
        });
    }

    let step_sq = (&x_next - &state.x).norm_squared();
    if let Engine::History { window, tau } = &mut state.engine {
        window.push_front(x_next.clone());
        window.truncate(*tau + 1);
    }
    state.x = x_next;
    state.k += 1;
    Ok(StepInfo { step_sq, delays })
}

/// One forward-backward splitting step — the zero-delay reduction of PIAG,
/// kept as an independent code path for equivalence testing. Requires a
/// history-mode state.
pub fn fbs_iterate(
    state: &mut SolverState,
    problem: &ProblemInstance,
    alpha: f64,
) -> Result<StepInfo> {
    check_step_preconditions(problem, state, alpha)?;
    let Engine::History { .. } = state.engine else {
        return Err(Error::InvalidParameter(
            "fbs_iterate requires a history-mode state".into(),
        ));
    };
    let g = problem.full_gradient(&state.x)?;
    let x_next = forward_backward(problem, alpha, &state.x, &g)?;
    if !x_next.iter().all(|v| v.is_finite()) {
        return Err(Error::Divergence {
            iteration: state.k,
            last_finite: Box::new(state.x.clone()),
            trace: Box::new(ConvergenceTrace::empty()),
        });
    }
    let step_sq = (&x_next - &state.x).norm_squared();
    if let Engine::History { window, tau } = &mut state.engine {
        window.push_front(x_next.clone());
        window.truncate(*tau + 1);
    }
    state.x = x_next;
    state.k += 1;
    Ok(StepInfo {
        step_sq,
        delays: vec![0; problem.n_components()],
    })
}

/// Metadata describing how a trace was produced.
#[derive(Debug, Clone)]
pub struct TraceMeta {
    pub alpha: f64,
    pub tau: usize,
    pub schedule_kind: String,
    pub mode: Mode,
    pub dimension: usize,
    pub n_components: usize,
    pub has_ground_truth: bool,
}

/// One row per visited iterate. The ground-truth columns are `NaN` when the
/// problem carries no ground truth; the step columns describe the step
/// *leaving* `x_k` and are absent on the final row.
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub k: usize,
    /// `Φ(x_k) − Φ*`.
    pub phi_err: f64,
    /// `d²(x_k, X)`.
    pub dist_sq: f64,
    /// `Ψ(x_k) = phi_err + dist_sq/(2α)`, by construction from the other
    /// two columns.
    pub psi: f64,
    /// `‖x_{k+1} − x_k‖²`; `NaN` on the final row.
    pub step_sq: f64,
    /// Realized delay vector for the step leaving this row.
    pub delays: Option<Vec<usize>>,
}

impl TraceRow {
    pub fn max_delay(&self) -> Option<usize> {
        self.delays.as_ref().map(|d| d.iter().copied().max().unwrap_or(0))
    }
}

#[derive(Debug, Clone)]
pub struct ConvergenceTrace {
    pub meta: TraceMeta,
    pub rows: Vec<TraceRow>,
    /// `x_k` snapshots, present when the run recorded iterates.
    pub iterates: Option<Vec<DVector<f64>>>,
}

impl ConvergenceTrace {
    fn empty() -> Self {
        ConvergenceTrace {
            meta: TraceMeta {
                alpha: f64::NAN,
                tau: 0,
                schedule_kind: String::new(),
                mode: Mode::History,
                dimension: 0,
                n_components: 0,
                has_ground_truth: false,
            },
            rows: Vec::new(),
            iterates: None,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Step norm squared `w_j = ‖x_{j+1} − x_j‖²`; defined for
    /// `j < len − 1`.
    pub fn step_sq(&self, j: usize) -> Result<f64> {
        if j + 1 >= self.rows.len() {
            return Err(Error::TraceIndex { index: j, rows: self.rows.len() });
        }
        Ok(self.rows[j].step_sq)
    }

    pub fn iterate(&self, k: usize) -> Result<&DVector<f64>> {
        let snapshots = self.iterates.as_ref().ok_or_else(|| {
            Error::InvalidParameter(
                "trace was recorded without iterate snapshots".into(),
            )
        })?;
        snapshots
            .get(k)
            .ok_or(Error::TraceIndex { index: k, rows: self.rows.len() })
    }
}

fn ground_truth_columns(
    problem: &ProblemInstance,
    x: &DVector<f64>,
    alpha: f64,
    k: usize,
) -> Result<(f64, f64, f64)> {
    let phi = problem.objective(x)?;
    match problem.ground_truth() {
        Some(gt) => {
            let phi_err = phi - gt.optimal_value();
            if phi_err < -1e-9 {
                return Err(Error::InconsistentGroundTruth {
                    iteration: k,
                    deficit: -phi_err,
                });
            }
            let dist_sq = gt.distance_sq(x);
            let psi = phi_err + dist_sq / (2.0 * alpha);
            Ok((phi_err, dist_sq, psi))
        }
        None => Ok((f64::NAN, f64::NAN, f64::NAN)),
    }
}

fn run_loop(
    problem: &ProblemInstance,
    schedule: Option<&DelaySchedule>,
    alpha: f64,
    mut state: SolverState,
    stop: &StoppingRule,
    options: &RunOptions,
) -> Result<ConvergenceTrace> {
    if stop.psi_tolerance.is_some() && problem.ground_truth().is_none() {
        return Err(Error::MissingGroundTruth("Ψ-based stopping"));
    }
    let meta = TraceMeta {
        alpha,
        tau: schedule.map_or(0, |s| s.tau()),
        schedule_kind: schedule.map_or_else(|| "fbs".to_string(), |s| s.kind().name().to_string()),
        mode: state.mode(),
        dimension: problem.dimension(),
        n_components: problem.n_components(),
        has_ground_truth: problem.ground_truth().is_some(),
    };
    let mut rows: Vec<TraceRow> = Vec::with_capacity(stop.max_iterations + 1);
    let mut iterates: Option<Vec<DVector<f64>>> = options
        .record_iterates
        .then(|| Vec::with_capacity(stop.max_iterations + 1));

    loop {
        let k = state.k();
        let (phi_err, dist_sq, psi) = ground_truth_columns(problem, state.x(), alpha, k)?;
        rows.push(TraceRow {
            k,
            phi_err,
            dist_sq,
            psi,
            step_sq: f64::NAN,
            delays: None,
        });
        if let Some(snaps) = iterates.as_mut() {
            snaps.push(state.x().clone());
        }

        if k >= stop.max_iterations {
            break;
        }
        if let Some(tol) = stop.psi_tolerance {
            if psi <= tol {
                break;
            }
        }

        let stepped = match schedule {
            Some(s) => piag_iterate(&mut state, problem, s, alpha),
            None => fbs_iterate(&mut state, problem, alpha),
        };
        match stepped {
            Ok(info) => {
                let row = rows.last_mut().expect("row just pushed");
                row.step_sq = info.step_sq;
                row.delays = Some(info.delays);
            }
            Err(Error::Divergence { iteration, last_finite, .. }) => {
                return Err(Error::Divergence {
                    iteration,
                    last_finite,
                    trace: Box::new(ConvergenceTrace { meta, rows, iterates }),
                });
            }
            Err(e) => return Err(e),
        }
    }

    Ok(ConvergenceTrace { meta, rows, iterates })
}

/// Drive PIAG from `x0` until the stopping rule fires. The trace includes
/// iteration 0 and is deterministic given the inputs.
pub fn run(
    problem: &ProblemInstance,
    schedule: &DelaySchedule,
    alpha: f64,
    x0: DVector<f64>,
    stop: &StoppingRule,
    options: &RunOptions,
) -> Result<ConvergenceTrace> {
    if schedule.n_components() != problem.n_components() {
        return Err(Error::DimensionMismatch {
            expected: problem.n_components(),
            got: schedule.n_components(),
        });
    }
    let state = SolverState::for_schedule(x0, schedule, options.engine)?;
    run_loop(problem, Some(schedule), alpha, state, stop, options)
}

/// Drive the independent FBS path from `x0` (always history mode).
pub fn run_fbs(
    problem: &ProblemInstance,
    alpha: f64,
    x0: DVector<f64>,
    stop: &StoppingRule,
    options: &RunOptions,
) -> Result<ConvergenceTrace> {
    let state = SolverState::new_history(x0, 0);
    run_loop(problem, None, alpha, state, stop, options)
}
