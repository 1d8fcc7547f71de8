//! Run configuration: one JSON document with command-specific blocks.
//! Unknown keys are rejected everywhere; each run echoes the fully-resolved
//! configuration (defaults filled in) next to its outputs.

use baybn::bagus::BagusConfig;
use baybn::datagen::ErrorSpec;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::CliError;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bagus: Option<BagusBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learn: Option<LearnBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval: Option<EvalBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theory: Option<TheoryBlock>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioBlock {
    pub p: usize,
    pub d_m_cap: usize,
    pub n: usize,
    #[serde(default = "default_weight_min")]
    pub weight_min: f64,
    #[serde(default = "default_weight_max")]
    pub weight_max: f64,
    #[serde(default = "default_error_spec")]
    pub error_spec: String,
}

fn default_weight_min() -> f64 {
    0.5
}
fn default_weight_max() -> f64 {
    1.0
}
fn default_error_spec() -> String {
    "gaussian".into()
}

impl ScenarioBlock {
    pub fn error_spec(&self) -> Result<ErrorSpec, CliError> {
        ErrorSpec::parse(&self.error_spec).map_err(|e| CliError::Config(e.to_string()))
    }
}

/// Partial prior configuration; every absent field falls back to the
/// sample-size defaults (`nu0 = sqrt(1/(100 n))`, `nu1 = 1`, `tau = 1e-4`,
/// `T = 0.5`, `eta = 0.5`).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BagusBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold_t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectral_bound_b0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_outer_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warm_start: Option<bool>,
}

impl BagusBlock {
    /// True when no field overrides the defaults.
    pub fn is_empty(&self) -> bool {
        self.nu0.is_none()
            && self.nu1.is_none()
            && self.eta.is_none()
            && self.tau.is_none()
            && self.threshold_t.is_none()
            && self.spectral_bound_b0.is_none()
            && self.max_outer_iters.is_none()
            && self.tol.is_none()
            && self.inner_max_iters.is_none()
            && self.inner_tol.is_none()
    }

    /// Resolves against the sample-size defaults.
    pub fn resolve(&self, n: usize) -> Result<BagusConfig, CliError> {
        let d = BagusConfig::defaults_for_n(n);
        let cfg = BagusConfig {
            nu0: self.nu0.unwrap_or(d.nu0),
            nu1: self.nu1.unwrap_or(d.nu1),
            eta: self.eta.unwrap_or(d.eta),
            tau: self.tau.unwrap_or(d.tau),
            threshold_t: self.threshold_t.unwrap_or(d.threshold_t),
            spectral_bound_b0: self.spectral_bound_b0.or(d.spectral_bound_b0),
            max_outer_iters: self.max_outer_iters.unwrap_or(d.max_outer_iters),
            tol: self.tol.unwrap_or(d.tol),
            inner_max_iters: self.inner_max_iters.unwrap_or(d.inner_max_iters),
            inner_tol: self.inner_tol.unwrap_or(d.inner_tol),
        };
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnBlock {
    pub data: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalBlock {
    pub truth: String,
    pub estimate: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub p: Vec<usize>,
    pub d_m: Vec<usize>,
    pub n: Vec<usize>,
    #[serde(default = "default_error_specs")]
    pub error_specs: Vec<String>,
    pub replications: usize,
}

fn default_error_specs() -> Vec<String> {
    vec!["gaussian".into()]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryBlock {
    pub model: String,
    #[serde(default = "default_theory_n")]
    pub n: usize,
    #[serde(default = "default_epsilon1")]
    pub epsilon1: f64,
}

fn default_theory_n() -> usize {
    10_000
}
fn default_epsilon1() -> f64 {
    1.0
}
