//! Experiment configuration: one JSON document fully determines a run.

use serde::{Deserialize, Serialize};

use piag::delays::{DelaySchedule, ScheduleKind};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub schedule: ScheduleConfig,
    pub alpha: AlphaConfig,
    pub max_iters: usize,
    pub checks: Vec<CheckKind>,
    /// Path prefix for the CSV trace, JSON summary, and problem document.
    pub output: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    /// `least-squares`, `lasso`, `box-quadratic`, or `file`.
    pub kind: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Uniform box bounds `[lo, hi]` applied to every coordinate.
    #[serde(rename = "box", skip_serializing_if = "Option::is_none")]
    pub box_bounds: Option<[f64; 2]>,
    /// Rank of the random least-squares design; defaults to full rank.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    /// Problem document to replay (`kind = "file"`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub kind: String,
    pub tau: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Constant delay for the `fixed` kind; defaults to `tau`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delay: Option<usize>,
}

impl ScheduleConfig {
    pub fn build(&self, n_components: usize) -> Result<DelaySchedule, CliError> {
        let kind = match self.kind.as_str() {
            "zero" => ScheduleKind::Zero,
            "fixed" => ScheduleKind::Fixed { delay: self.delay.unwrap_or(self.tau) },
            "cyclic" => ScheduleKind::Cyclic,
            "uniform-random" => ScheduleKind::UniformRandom { seed: self.seed.unwrap_or(0) },
            "adversarial-max" => ScheduleKind::AdversarialMax,
            other => {
                return Err(CliError::Schema(format!("unknown schedule kind `{other}`")));
            }
        };
        DelaySchedule::new(kind, self.tau, n_components)
            .map_err(|e| CliError::Schema(e.to_string()))
    }
}

/// `"auto"` (maximal admissible step size) or an explicit positive number.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaConfig {
    Named(String),
    Value(f64),
}

impl AlphaConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        match self {
            AlphaConfig::Named(s) if s == "auto" => Ok(()),
            AlphaConfig::Named(s) => {
                Err(CliError::Schema(format!("alpha must be a number or \"auto\", got \"{s}\"")))
            }
            AlphaConfig::Value(v) if *v > 0.0 && v.is_finite() => Ok(()),
            AlphaConfig::Value(v) => {
                Err(CliError::Schema(format!("alpha must be positive and finite, got {v}")))
            }
        }
    }

}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Envelope,
    Lemma2,
    Certificate,
}

/// Grid for the rate-comparison table.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareRatesConfig {
    pub eta: Vec<f64>,
    pub tau: Vec<usize>,
    pub output: String,
}

pub fn parse_experiment(text: &str) -> Result<ExperimentConfig, CliError> {
    let cfg: ExperimentConfig =
        serde_json::from_str(text).map_err(|e| CliError::Schema(e.to_string()))?;
    cfg.alpha.validate()?;
    if cfg.output.is_empty() {
        return Err(CliError::Schema("output prefix must not be empty".into()));
    }
    Ok(cfg)
}

pub fn parse_compare_rates(text: &str) -> Result<CompareRatesConfig, CliError> {
    let cfg: CompareRatesConfig =
        serde_json::from_str(text).map_err(|e| CliError::Schema(e.to_string()))?;
    if cfg.eta.iter().any(|&e| !(e >= 1.0)) {
        return Err(CliError::Schema("every eta must be at least 1".into()));
    }
    Ok(cfg)
}
