//! Trace CSV and summary JSON emission.
//!
//! CSV columns, in fixed order: `k, phi_err, dist_sq, psi, step_norm_sq,
//! envelope, lemma2_residual_at_xk, lemma2_residual_at_proj,
//! max_realized_delay`. Floats are rendered with 17 significant digits so a
//! parsed trace reproduces the run bit for bit; fields that do not exist on
//! a row (the step data of the final row) are `NaN`, or empty for the
//! integer delay column.

use serde::Serialize;

use piag::model::ProblemInstance;
use piag::rates;
use piag::solver::ConvergenceTrace;

use crate::config::{CheckKind, ExperimentConfig};

pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.16e}")
    }
}

pub const CSV_HEADER: &str = "k,phi_err,dist_sq,psi,step_norm_sq,envelope,\
lemma2_residual_at_xk,lemma2_residual_at_proj,max_realized_delay";

/// Render the trace as CSV. `rate_a` drives the theoretical envelope
/// column; the descent-inequality residual columns are evaluated at the
/// probes `x_k` and `project(x_k)` for every row with a recorded step.
pub fn render_csv(problem: &ProblemInstance, trace: &ConvergenceTrace, rate_a: f64) -> String {
    let mut out = String::with_capacity(trace.len() * 160 + 128);
    out.push_str(CSV_HEADER);
    out.push('\n');
    let psi0 = trace.rows.first().map_or(f64::NAN, |r| r.psi);
    let alpha = trace.meta.alpha;
    let gt = problem.ground_truth();

    for (k, row) in trace.rows.iter().enumerate() {
        let envelope = if psi0.is_nan() {
            f64::NAN
        } else {
            rates::geometric_envelope(k, rate_a, psi0)
        };
        let has_step = k + 1 < trace.len();
        let (res_xk, res_proj) = if has_step && trace.iterates.is_some() {
            let xk = trace.iterate(k).expect("snapshot present");
            let at_xk =
                rates::lemma2_residual(problem, trace, k, xk, alpha).unwrap_or(f64::NAN);
            let at_proj = match gt {
                Some(gt) => {
                    let proj = gt.project(xk);
                    rates::lemma2_residual(problem, trace, k, &proj, alpha)
                        .unwrap_or(f64::NAN)
                }
                None => f64::NAN,
            };
            (at_xk, at_proj)
        } else {
            (f64::NAN, f64::NAN)
        };
        let delay = match row.max_delay() {
            Some(d) => d.to_string(),
            None => String::new(),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            row.k,
            format_float(row.phi_err),
            format_float(row.dist_sq),
            format_float(row.psi),
            format_float(row.step_sq),
            format_float(envelope),
            format_float(res_xk),
            format_float(res_proj),
            delay,
        ));
    }
    out
}

/// Iterate snapshots as their own CSV (`--trace-iterates`).
pub fn render_iterates_csv(trace: &ConvergenceTrace) -> String {
    let d = trace.meta.dimension;
    let mut out = String::new();
    out.push('k');
    for i in 0..d {
        out.push_str(&format!(",x{i}"));
    }
    out.push('\n');
    if let Some(snapshots) = &trace.iterates {
        for (k, x) in snapshots.iter().enumerate() {
            out.push_str(&k.to_string());
            for v in x.iter() {
                out.push(',');
                out.push_str(&format_float(*v));
            }
            out.push('\n');
        }
    }
    out
}

#[derive(Debug, Serialize)]
pub struct Summary {
    /// The resolved configuration: `alpha` is replaced by its numeric value.
    pub config: ExperimentConfig,
    pub status: RunStatus,
    pub problem: ProblemSummary,
    pub alpha: AlphaSummary,
    pub rate: RateSummary,
    pub certificate: CertificateSummary,
    pub checks: Vec<CheckOutcome>,
    pub all_checks_passed: bool,
    #[serde(rename = "final")]
    pub final_row: FinalSummary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Ok,
    Diverged,
}

#[derive(Debug, Serialize)]
pub struct ProblemSummary {
    pub kind: String,
    pub dimension: usize,
    pub n_components: usize,
    pub total_lipschitz: f64,
    pub phi_star: f64,
    pub beta: f64,
    pub beta_is_estimate: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_sample_min: Option<f64>,
    pub eta: f64,
}

#[derive(Debug, Serialize)]
pub struct AlphaSummary {
    pub requested: serde_json::Value,
    pub resolved: f64,
    pub max_step_size: f64,
}

#[derive(Debug, Serialize)]
pub struct RateSummary {
    /// `1 − αβ/(1+αβ)` at the resolved step size.
    pub a: f64,
    /// `1 − 1/((τ+1)(τ+2)η)`, the rate realized at the maximal step size.
    pub result4: f64,
}

#[derive(Debug, Serialize)]
pub struct CertificateSummary {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub k0: usize,
    pub admissibility_lhs: f64,
    pub admissible: bool,
}

#[derive(Debug, Serialize)]
pub struct CheckOutcome {
    pub check: CheckKind,
    pub passed: bool,
    /// `pass`, `fail`, or `degenerate-start` for a vacuous envelope.
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_violation: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_residual_at_xk: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_residual_at_proj: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct FinalSummary {
    pub iterations: usize,
    pub phi_err: Option<f64>,
    pub dist_sq: Option<f64>,
    pub psi: Option<f64>,
}

pub fn render_summary(summary: &Summary) -> String {
    let mut s = serde_json::to_string_pretty(summary).expect("summary serializes");
    s.push('\n');
    s
}
