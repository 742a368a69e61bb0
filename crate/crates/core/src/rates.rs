//! Step-size bound, convergence-rate formulas, Lyapunov evaluation, and the
//! recurrence/envelope/descent-inequality checkers that make the solver's
//! convergence guarantees testable.
//!
//! All comparisons of the form `lhs ≤ rhs` use a relative slack of `1e-12`
//! and count ties as satisfied: the admissibility inequality is achieved
//! with equality exactly at the maximal step size, so the boundary case is
//! the common one.

use nalgebra::DVector;

use crate::model::ProblemInstance;
use crate::solver::ConvergenceTrace;
use crate::{Error, Result};

/// Relative slack for inequality checks (ties pass).
pub const REL_SLACK: f64 = 1e-12;

/// Relative tolerance of the measured-vs-theoretical envelope comparison.
pub const ENVELOPE_REL_TOL: f64 = 1e-8;

fn le_with_slack(lhs: f64, rhs: f64, rel: f64) -> bool {
    lhs <= rhs + rel * rhs.abs().max(lhs.abs())
}

fn require_positive(value: f64, name: &str) -> Result<()> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "{name} must be positive and finite, got {value}"
        )));
    }
    Ok(())
}

/// Largest admissible step size
/// `α_max = ((1 + (β/L)·1/(τ+1))^{1/(τ+1)} − 1) / β`.
///
/// For `τ = 0` this collapses to `1/L`. Evaluated as
/// `expm1(ln1p(x)/(τ+1))/β` so the small bracketed quantity keeps its
/// digits; the admissibility tie at `α = α_max` is checked to `1e-12`.
pub fn max_step_size(beta: f64, lipschitz: f64, tau: usize) -> Result<f64> {
    require_positive(beta, "beta")?;
    require_positive(lipschitz, "lipschitz")?;
    let t = tau as f64 + 1.0;
    let x = (beta / lipschitz) / t;
    Ok((x.ln_1p() / t).exp_m1() / beta)
}

/// Geometric decay factor `a = 1 − αβ/(1+αβ) = 1/(1+αβ) ∈ (0,1)`.
pub fn convergence_rate(alpha: f64, beta: f64) -> Result<f64> {
    require_positive(alpha, "alpha")?;
    require_positive(beta, "beta")?;
    let r = alpha * beta;
    Ok(1.0 - r / (1.0 + r))
}

/// Rate at the maximal step size expressed through the condition number:
/// `1 − 1/((τ+1)(τ+2)η)`.
pub fn rate_result4(eta: f64, tau: usize) -> Result<f64> {
    if !(eta >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "condition number must be at least 1, got {eta}"
        )));
    }
    let scale = ((tau + 1) * (tau + 2)) as f64;
    Ok(1.0 - 1.0 / (scale * eta))
}

/// Side-by-side comparison with the previously published rate
/// `1 − 1/(49η(τ+1))`, applicable for `τ ≤ 47`.
#[derive(Debug, Clone, Copy)]
pub struct RateComparison {
    pub ours: f64,
    pub prior: f64,
    pub ours_le_prior: bool,
}

pub fn rate_comparison_tau47(eta: f64, tau: usize) -> Result<RateComparison> {
    if tau > 47 {
        return Err(Error::InvalidParameter(format!(
            "rate comparison applies for tau ≤ 47, got {tau}"
        )));
    }
    if !(eta >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "condition number must be at least 1, got {eta}"
        )));
    }
    // Both gaps share the `integer product → ×η → reciprocal` evaluation
    // order so the τ = 47 boundary compares as an exact tie.
    let ours = 1.0 - 1.0 / (((tau + 1) * (tau + 2)) as f64 * eta);
    let prior = 1.0 - 1.0 / ((49 * (tau + 1)) as f64 * eta);
    Ok(RateComparison {
        ours,
        prior,
        ours_le_prior: ours <= prior,
    })
}

/// Lyapunov function `Ψ(x) = Φ(x) − Φ* + d²(x,X)/(2α)`.
pub fn lyapunov(problem: &ProblemInstance, alpha: f64, x: &DVector<f64>) -> Result<f64> {
    require_positive(alpha, "alpha")?;
    let gt = problem.ground_truth_or_err("Lyapunov evaluation")?;
    let phi = problem.objective(x)?;
    Ok(phi - gt.optimal_value() + gt.distance_sq(x) / (2.0 * alpha))
}

/// Accumulated-step term `Δ_k = (L(τ+1)/2)·Σ_{j=k−τ}^{k} ‖x_{j+1}−x_j‖²`,
/// with terms for `j < 0` contributing zero.
pub fn delta_k(trace: &ConvergenceTrace, k: usize, lipschitz: f64, tau: usize) -> Result<f64> {
    if k + 1 >= trace.len() {
        return Err(Error::TraceIndex { index: k, rows: trace.len() });
    }
    let lo = k.saturating_sub(tau);
    let mut sum = 0.0;
    for j in lo..=k {
        sum += trace.step_sq(j)?;
    }
    Ok(0.5 * lipschitz * (tau as f64 + 1.0) * sum)
}

/// Residual (RHS − LHS) of the per-iteration descent inequality
///
/// `Φ(x_{k+1}) ≤ Φ(x) + ‖x−x_k‖²/(2α) − ‖x−x_{k+1}‖²/(2α)
///              − ‖x_{k+1}−x_k‖²/(2α) + Δ_k`
///
/// at the probe point `x`. Nonnegative (up to float slack) when the
/// iteration is implemented correctly. Requires iterate snapshots in the
/// trace.
pub fn lemma2_residual(
    problem: &ProblemInstance,
    trace: &ConvergenceTrace,
    k: usize,
    probe: &DVector<f64>,
    alpha: f64,
) -> Result<f64> {
    require_positive(alpha, "alpha")?;
    let x_k = trace.iterate(k)?;
    let x_next = trace.iterate(k + 1)?;
    let delta = delta_k(trace, k, problem.total_lipschitz(), trace.meta.tau)?;
    let phi_probe = problem.objective(probe)?;
    let phi_next = problem.objective(x_next)?;
    let inv2a = 1.0 / (2.0 * alpha);
    let rhs = phi_probe + inv2a * (probe - x_k).norm_squared()
        - inv2a * (probe - x_next).norm_squared()
        - inv2a * (x_next - x_k).norm_squared()
        + delta;
    Ok(rhs - phi_next)
}

/// Geometric-decay certificate `(a, b, c, k₀)` for the recurrence
/// `V_{k+1} ≤ aV_k − bw_k + cΣ_{j=k−k₀}^k w_j`.
///
/// The contraction gap `1−a` is carried as its own field: near `a = 1`
/// (tiny `αβ`) recovering it from `a` would lose most of its digits and the
/// admissibility comparison needs them. Admissibility is recomputed from
/// the fields on every query; it is never stored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateCertificate {
    a: f64,
    gap: f64,
    b: f64,
    c: f64,
    k0: usize,
}

impl RateCertificate {
    pub fn new(a: f64, b: f64, c: f64, k0: usize) -> Result<Self> {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::InvalidCertificate(format!(
                "decay factor must lie strictly in (0,1), got {a}"
            )));
        }
        if !(b >= 0.0) || !(c >= 0.0) {
            return Err(Error::InvalidCertificate(format!(
                "certificate weights must be nonnegative, got b={b}, c={c}"
            )));
        }
        Ok(RateCertificate { a, gap: 1.0 - a, b, c, k0 })
    }

    /// Certificate produced by the convergence proof:
    /// `a = 1−αβ/(1+αβ)`, `b = 1/(2α)`, `c = L(τ+1)/2`, `k₀ = τ`.
    pub fn from_parameters(beta: f64, lipschitz: f64, alpha: f64, tau: usize) -> Result<Self> {
        require_positive(alpha, "alpha")?;
        require_positive(beta, "beta")?;
        require_positive(lipschitz, "lipschitz")?;
        let r = alpha * beta;
        let gap = r / (1.0 + r);
        Ok(RateCertificate {
            a: 1.0 - gap,
            gap,
            b: 1.0 / (2.0 * alpha),
            c: 0.5 * lipschitz * (tau as f64 + 1.0),
            k0: tau,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    /// `1 − a`, at full precision.
    pub fn gap(&self) -> f64 {
        self.gap
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn k0(&self) -> usize {
        self.k0
    }

    /// Left-hand side of the admissibility inequality
    /// `(c/(1−a))·(1−a^{k₀+1})/a^{k₀} ≤ b`, evaluated through
    /// `ln(1−gap)`/`expm1` so no digits cancel when `a` sits near 1.
    pub fn admissibility_lhs(&self) -> f64 {
        let log_a = (-self.gap).ln_1p();
        let one_minus_pow = -((self.k0 as f64 + 1.0) * log_a).exp_m1();
        let pow_k0 = ((self.k0 as f64) * log_a).exp();
        (self.c / self.gap) * one_minus_pow / pow_k0
    }

    pub fn admissible(&self) -> bool {
        le_with_slack(self.admissibility_lhs(), self.b, REL_SLACK)
    }
}

/// Certificate for a concrete problem at step size `alpha` and delay
/// parameter `tau`; requires the quadratic-growth constant from ground
/// truth.
pub fn certificate_for(
    problem: &ProblemInstance,
    alpha: f64,
    tau: usize,
) -> Result<RateCertificate> {
    let gt = problem.ground_truth_or_err("rate certificate")?;
    RateCertificate::from_parameters(gt.qg_constant(), problem.total_lipschitz(), alpha, tau)
}

/// Derived step-size and rate data for a `(β, L, τ)` triple. The condition
/// number constraint `η ≥ 1` is validated, not assumed.
#[derive(Debug, Clone, Copy)]
pub struct TheoreticalBounds {
    pub alpha_max: f64,
    pub rate_a: f64,
    pub rate_result4: f64,
    pub eta: f64,
}

impl TheoreticalBounds {
    pub fn new(beta: f64, lipschitz: f64, tau: usize) -> Result<Self> {
        require_positive(beta, "beta")?;
        require_positive(lipschitz, "lipschitz")?;
        let eta = lipschitz / beta;
        if !(eta >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "beta = {beta} exceeds L = {lipschitz}; condition number below 1"
            )));
        }
        let alpha_max = max_step_size(beta, lipschitz, tau)?;
        let rate_a = convergence_rate(alpha_max, beta)?;
        // Cross-check the two algebraic forms of the rate.
        let direct = 1.0 / (1.0 + alpha_max * beta);
        assert!(
            (rate_a - direct).abs() <= 1e-14 * direct,
            "rate forms disagree: {rate_a} vs {direct}"
        );
        let r4 = rate_result4(eta, tau)?;
        Ok(TheoreticalBounds { alpha_max, rate_a, rate_result4: r4, eta })
    }

    pub fn for_problem(problem: &ProblemInstance, tau: usize) -> Result<Self> {
        let gt = problem.ground_truth_or_err("theoretical bounds")?;
        TheoreticalBounds::new(gt.qg_constant(), problem.total_lipschitz(), tau)
    }
}

/// Outcome of checking a sequence pair against the geometric-decay
/// recurrence and its conclusion.
#[derive(Debug, Clone, Copy)]
pub struct Lemma1Verdict {
    pub recurrence_holds: bool,
    pub admissible: bool,
    pub conclusion_holds: bool,
    pub first_recurrence_violation: Option<usize>,
    pub first_conclusion_violation: Option<usize>,
}

/// Check `V_{k+1} ≤ aV_k − bw_k + cΣ_{j=k−k₀}^k w_j` (with `w_j = 0` for
/// `j < 0`), the admissibility inequality, and the conclusion
/// `V_k ≤ a^k V_0`, reporting the first violating index of each part.
pub fn check_lemma1(
    v: &[f64],
    w: &[f64],
    a: f64,
    b: f64,
    c: f64,
    k0: usize,
) -> Result<Lemma1Verdict> {
    let certificate = RateCertificate::new(a, b, c, k0)?;
    if v.len() != w.len() {
        return Err(Error::DimensionMismatch { expected: v.len(), got: w.len() });
    }
    if v.iter().chain(w.iter()).any(|&t| !(t >= 0.0)) {
        return Err(Error::InvalidParameter(
            "sequences must be nonnegative".into(),
        ));
    }

    let mut first_recurrence_violation = None;
    for k in 0..v.len().saturating_sub(1) {
        let lo = k.saturating_sub(k0);
        let tail: f64 = w[lo..=k].iter().sum();
        let rhs = a * v[k] - b * w[k] + c * tail;
        if !le_with_slack(v[k + 1], rhs, REL_SLACK) {
            first_recurrence_violation = Some(k + 1);
            break;
        }
    }

    let mut first_conclusion_violation = None;
    if !v.is_empty() {
        let v0 = v[0];
        for (k, &vk) in v.iter().enumerate() {
            if !under_geometric_envelope(vk, k, a, v0, REL_SLACK) {
                first_conclusion_violation = Some(k);
                break;
            }
        }
    }

    Ok(Lemma1Verdict {
        recurrence_holds: first_recurrence_violation.is_none(),
        admissible: certificate.admissible(),
        conclusion_holds: first_conclusion_violation.is_none(),
        first_recurrence_violation,
        first_conclusion_violation,
    })
}

/// `value ≤ a^k·v0·(1+tol)` with the envelope computed in log space for
/// large `k`, and the comparison itself done on logs when both sides sit
/// below `1e-300`.
fn under_geometric_envelope(value: f64, k: usize, a: f64, v0: f64, rel_tol: f64) -> bool {
    let envelope = if k <= 1000 {
        a.powi(k as i32) * v0
    } else {
        ((k as f64) * a.ln() + v0.ln()).exp()
    };
    if value > 1e-300 || envelope > 1e-300 {
        value <= envelope * (1.0 + rel_tol)
    } else {
        value.ln() <= (k as f64) * a.ln() + v0.ln() + rel_tol
    }
}

/// `a^k·v0` with the power taken in log space for `k > 10³` so long traces
/// do not underflow prematurely.
pub fn geometric_envelope(k: usize, a: f64, v0: f64) -> f64 {
    if k <= 1000 {
        a.powi(k as i32) * v0
    } else {
        ((k as f64) * a.ln() + v0.ln()).exp()
    }
}

/// Result of comparing a measured Ψ column against its theoretical
/// geometric envelope.
#[derive(Debug, Clone, Copy)]
pub struct EnvelopeReport {
    pub holds: bool,
    /// `max_k Ψ(x_k)/(a^k Ψ(x₀))`, with `0/0` counted as 0.
    pub worst_ratio: f64,
    pub first_violation: Option<usize>,
}

/// Check `Ψ(x_k) ≤ a^k·Ψ(x₀)·(1+1e-8)` along a trace. A trace that starts
/// with `Ψ(x₀) = 0` but still moves (`Ψ(x_k) > 1e-12` somewhere) makes the
/// bound vacuous and is reported as [`Error::DegenerateStart`] rather than
/// pass/fail.
pub fn envelope_check(trace: &ConvergenceTrace, a: f64) -> Result<EnvelopeReport> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::InvalidCertificate(format!(
            "envelope rate must lie strictly in (0,1), got {a}"
        )));
    }
    if trace.is_empty() {
        return Err(Error::TraceIndex { index: 0, rows: 0 });
    }
    let psi0 = trace.rows[0].psi;
    if psi0.is_nan() {
        return Err(Error::MissingGroundTruth("envelope check (Ψ column)"));
    }
    if psi0 == 0.0 {
        if trace.rows.iter().any(|r| r.psi > 1e-12) {
            return Err(Error::DegenerateStart);
        }
        return Ok(EnvelopeReport { holds: true, worst_ratio: 0.0, first_violation: None });
    }

    let mut worst_ratio: f64 = 0.0;
    let mut first_violation = None;
    for (k, row) in trace.rows.iter().enumerate() {
        let env = geometric_envelope(k, a, psi0);
        let ratio = if row.psi == 0.0 && env == 0.0 {
            0.0
        } else if env > 0.0 {
            row.psi / env
        } else {
            f64::INFINITY
        };
        worst_ratio = worst_ratio.max(ratio);
        if first_violation.is_none()
            && !under_geometric_envelope(row.psi, k, a, psi0, ENVELOPE_REL_TOL)
        {
            first_violation = Some(k);
        }
    }
    Ok(EnvelopeReport {
        holds: first_violation.is_none(),
        worst_ratio,
        first_violation,
    })
}
