//! Scenario configuration: one JSON document plus `--set key=value` overrides.

use std::path::Path;

use modesel_core::pump_opt::{FeedbackParams, Geometry, Method, OptimizationSpec};
use modesel_core::upconv::{matched_collection_width, CountModel, DARK_RATE_HZ, REPETITION_RATE_HZ};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: not valid JSON: {source}")]
    Syntax { path: String, source: serde_json::Error },
    #[error("config key `{key}`: {message}")]
    Key { key: String, message: String },
    #[error("override `{0}` is not of the form key=value")]
    Override(String),
}

fn key_error(key: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Key { key: key.into(), message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub sigma_p: f64,
    pub sigma_s: f64,
    /// Collection-mode width; matched to the pump and signal when absent.
    pub sigma_f: Option<f64>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self { sigma_p: 22.5, sigma_s: 20.5, sigma_f: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModeSetConfig {
    pub l_list: Vec<usize>,
    pub m_list: Vec<usize>,
}

impl Default for ModeSetConfig {
    fn default() -> Self {
        Self { l_list: vec![1, 3, 5, 7], m_list: vec![0, 1, 2, 3, 4] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CountModelConfig {
    pub eta0: f64,
    pub dark_per_pulse: f64,
    /// Optimised-pump gain; `null` calibrates it so that `O_B = G_B`.
    pub gain_opt: Option<f64>,
    pub leak_even: f64,
    pub misalign_x: f64,
}

impl Default for CountModelConfig {
    fn default() -> Self {
        Self {
            eta0: 1e-4,
            dark_per_pulse: DARK_RATE_HZ / REPETITION_RATE_HZ,
            gain_opt: None,
            leak_even: 0.0,
            misalign_x: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdMode {
    Planning,
    Calibrated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetConfig {
    /// Target `⟨G_B + O_B⟩` values for the fidelity sweep.
    pub n_ave: Vec<f64>,
    pub threshold: ThresholdMode,
    /// Sessions per hypothesis for the calibrated threshold.
    pub calibration_sessions: u64,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        Self {
            n_ave: vec![5.0, 10.0, 20.0, 40.0, 80.0, 160.0, 320.0, 640.0],
            threshold: ThresholdMode::Planning,
            calibration_sessions: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    /// Intensity-profile width for the direct-detection bound.
    pub sigma: f64,
    /// Largest budget the fidelity search may try.
    pub max_n_ave: f64,
    pub bisection_steps: u32,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self { sigma: 20.0, max_n_ave: 1e5, bisection_steps: 24 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub geometry: GeometryConfig,
    pub theta_x_um: Vec<f64>,
    pub modes: ModeSetConfig,
    pub method: Method,
    pub feedback: FeedbackParams,
    pub count_model: CountModelConfig,
    pub budgets: BudgetConfig,
    pub benchmark: BenchmarkConfig,
    pub trials: u64,
    pub seed: u64,
    pub output_dir: String,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            geometry: GeometryConfig::default(),
            theta_x_um: vec![3.0, 5.0, 10.0],
            modes: ModeSetConfig::default(),
            method: Method::Eigen,
            feedback: FeedbackParams::default(),
            count_model: CountModelConfig::default(),
            budgets: BudgetConfig::default(),
            benchmark: BenchmarkConfig::default(),
            trials: 10_000,
            seed: 0,
            output_dir: "out".into(),
        }
    }
}

impl ScenarioConfig {
    /// Reads `path` (or starts from the defaults), applies the overrides and
    /// validates the result.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut doc = match path {
            Some(p) => {
                let name = p.display().to_string();
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io { path: name.clone(), source })?;
                serde_json::from_str::<Value>(&text).map_err(|source| ConfigError::Syntax { path: name, source })?
            }
            None => Value::Object(Default::default()),
        };
        for item in overrides {
            apply_override(&mut doc, item)?;
        }
        Self::from_value(doc)
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let doc = serde_json::from_str::<Value>(text)
            .map_err(|source| ConfigError::Syntax { path: "<string>".into(), source })?;
        Self::from_value(doc)
    }

    pub fn from_value(doc: Value) -> Result<Self, ConfigError> {
        let cfg: Self = serde_path_to_error::deserialize(doc).map_err(|e| {
            let key = e.path().to_string();
            key_error(key, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(key_error(key, format!("must be positive and finite, got {v}")))
            }
        };
        let non_negative = |key: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(key_error(key, format!("must be non-negative and finite, got {v}")))
            }
        };
        positive("geometry.sigma_p", self.geometry.sigma_p)?;
        positive("geometry.sigma_s", self.geometry.sigma_s)?;
        if let Some(sf) = self.geometry.sigma_f {
            positive("geometry.sigma_f", sf)?;
        }
        if self.theta_x_um.is_empty() {
            return Err(key_error("theta_x_um", "list is empty"));
        }
        for (i, t) in self.theta_x_um.iter().enumerate() {
            non_negative(&format!("theta_x_um[{i}]"), *t)?;
        }
        if self.modes.l_list.is_empty() {
            return Err(key_error("modes.l_list", "list is empty"));
        }
        if self.modes.m_list.is_empty() {
            return Err(key_error("modes.m_list", "list is empty"));
        }
        if let Some(i) = self.modes.l_list.iter().position(|l| l % 2 == 0) {
            return Err(key_error(format!("modes.l_list[{i}]"), "pump x-orders must be odd"));
        }
        if let Some(i) = self.modes.l_list.iter().chain(&self.modes.m_list).position(|&v| v > 63) {
            let key = if i < self.modes.l_list.len() {
                format!("modes.l_list[{i}]")
            } else {
                format!("modes.m_list[{}]", i - self.modes.l_list.len())
            };
            return Err(key_error(key, "mode orders above 63 are not supported"));
        }
        let cm = &self.count_model;
        positive("count_model.eta0", cm.eta0)?;
        if cm.eta0 > 1.0 {
            return Err(key_error("count_model.eta0", "must not exceed 1"));
        }
        non_negative("count_model.dark_per_pulse", cm.dark_per_pulse)?;
        if let Some(g) = cm.gain_opt {
            positive("count_model.gain_opt", g)?;
        }
        if !cm.leak_even.is_finite() {
            return Err(key_error("count_model.leak_even", "must be finite"));
        }
        if !cm.misalign_x.is_finite() {
            return Err(key_error("count_model.misalign_x", "must be finite"));
        }
        let fb = &self.feedback;
        positive("feedback.a", fb.a)?;
        positive("feedback.c", fb.c)?;
        non_negative("feedback.big_a", fb.big_a)?;
        if let Some(s) = fb.shots {
            if !(s >= 1.0 && s.is_finite()) {
                return Err(key_error("feedback.shots", format!("must be at least 1, got {s}")));
            }
        }
        for (i, n) in self.budgets.n_ave.iter().enumerate() {
            non_negative(&format!("budgets.n_ave[{i}]"), *n)?;
        }
        if self.budgets.calibration_sessions == 0 {
            return Err(key_error("budgets.calibration_sessions", "must be at least 1"));
        }
        positive("benchmark.sigma", self.benchmark.sigma)?;
        positive("benchmark.max_n_ave", self.benchmark.max_n_ave)?;
        if self.trials == 0 {
            return Err(key_error("trials", "must be at least 1"));
        }
        Ok(())
    }

    pub fn sigma_f(&self) -> f64 {
        self.geometry.sigma_f
            .unwrap_or_else(|| matched_collection_width(self.geometry.sigma_p, self.geometry.sigma_s))
    }

    pub fn geometry(&self) -> Geometry {
        Geometry { sigma_p: self.geometry.sigma_p, sigma_s: self.geometry.sigma_s, sigma_f: self.sigma_f() }
    }

    pub fn optimization_spec(&self, theta_x: f64) -> OptimizationSpec {
        OptimizationSpec {
            l_list: self.modes.l_list.clone(),
            m_list: self.modes.m_list.clone(),
            theta_x,
            geometry: self.geometry(),
            method: self.method,
            feedback: FeedbackParams { seed: self.seed ^ self.feedback.seed, ..self.feedback },
        }
    }

    /// Count model with `gain_opt` set to `gain`.
    pub fn count_model(&self, gain: f64) -> CountModel {
        let cm = &self.count_model;
        CountModel {
            sigma_f: self.sigma_f(),
            eta0: cm.eta0,
            gain_opt: gain,
            dark_per_pulse: cm.dark_per_pulse,
            misalign_x: cm.misalign_x,
            leak_even: cm.leak_even,
        }
    }
}

/// Sets the dotted `key` in `doc` to `value`, which is parsed as JSON and
/// taken as a plain string when that fails.
pub fn apply_override(doc: &mut Value, item: &str) -> Result<(), ConfigError> {
    let (key, raw) = item.split_once('=').ok_or_else(|| ConfigError::Override(item.into()))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(ConfigError::Override(item.into()));
    }
    let value = serde_json::from_str::<Value>(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().into()));
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = match node {
            Value::Object(map) => map,
            _ => return Err(key_error(parts[..i].join("."), "is not an object")),
        };
        if i + 1 == parts.len() {
            obj.insert((*part).to_string(), value);
            return Ok(());
        }
        node = obj.entry(*part).or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("key has at least one segment")
}
