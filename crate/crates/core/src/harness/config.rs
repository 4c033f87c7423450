use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::activations::ActivationSpec;
use crate::error::{LabError, Result};
use crate::theory::UniversalConstants;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "ADVLAB_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    FlipSweep,
    Decompose,
    LayerStats,
    #[serde(alias = "theorem3-check")]
    Theorem3,
    #[serde(alias = "stein-check")]
    Stein,
    EpSup,
    Bounds,
    CalibrateConstants,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::FlipSweep => "flip-sweep",
            ExperimentKind::Decompose => "decompose",
            ExperimentKind::LayerStats => "layer-stats",
            ExperimentKind::Theorem3 => "theorem3",
            ExperimentKind::Stein => "stein",
            ExperimentKind::EpSup => "ep-sup",
            ExperimentKind::Bounds => "bounds",
            ExperimentKind::CalibrateConstants => "calibrate-constants",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRuleKind {
    Constant,
    Theorem3,
}

/// One experiment, as a JSON document or flat CLI flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub activation: String,
    /// Input-dimension grid.
    pub d: Vec<usize>,
    /// Hidden-width grid.
    pub m: Vec<usize>,
    /// Full layer widths `[d, d_1, …, d_l, 1]`; replaces the `(d, m)` grid when set.
    pub dims: Option<Vec<usize>>,
    pub s0: Vec<f64>,
    pub xi: Vec<f64>,
    pub step_rule: StepRuleKind,
    pub trials: usize,
    pub seed: u64,
    /// Not part of the results; any value gives identical output.
    pub workers: usize,
    pub out: Option<PathBuf>,
    pub per_trial_out: Option<PathBuf>,
    pub constants: UniversalConstants,
    /// Confidence levels for `bounds`, box half-widths for `ep-sup`.
    pub delta: Vec<f64>,
    pub grid_per_axis: usize,
    /// Monte Carlo sample count for `stein`.
    pub samples: usize,
    pub stein_mean: f64,
    pub stein_variance: f64,
}

fn default_workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::FlipSweep,
            activation: "relu".into(),
            d: vec![1000],
            m: vec![1000],
            dims: None,
            s0: vec![1.0, 2.0, 3.0],
            xi: vec![0.05],
            step_rule: StepRuleKind::Constant,
            trials: 100,
            seed: 0,
            workers: default_workers(),
            out: None,
            per_trial_out: None,
            constants: UniversalConstants::default(),
            delta: vec![0.1],
            grid_per_axis: 5,
            samples: 1_000_000,
            stein_mean: 0.3,
            stein_variance: 2.0,
        }
    }
}

fn config_err(msg: impl Into<String>) -> LabError {
    LabError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn activation_spec(&self) -> Result<ActivationSpec> {
        self.activation.parse()
    }

    /// Network shapes swept by the experiment.
    pub fn shapes(&self) -> Vec<Vec<usize>> {
        match &self.dims {
            Some(dims) => vec![dims.clone()],
            None => self
                .d
                .iter()
                .flat_map(|&d| self.m.iter().map(move |&m| vec![d, m, 1]))
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let spec = self.activation_spec()?;
        spec.unit_moments()
            .map_err(|e| config_err(format!("activation {spec} has no usable Gaussian moments: {e}")))?;
        if self.trials == 0 {
            return Err(config_err("trials must be at least 1"));
        }
        if self.workers == 0 {
            return Err(config_err("workers must be at least 1"));
        }
        self.constants.validate().map_err(|e| config_err(e.to_string()))?;
        let needs_shapes = !matches!(self.kind, ExperimentKind::Stein | ExperimentKind::EpSup);
        if needs_shapes {
            if let Some(dims) = &self.dims {
                if dims.len() < 3 || dims.contains(&0) || dims.last() != Some(&1) {
                    return Err(config_err(format!("dims {dims:?} must be positive, have a hidden layer and end with 1")));
                }
            } else if self.d.is_empty() || self.m.is_empty() || self.d.contains(&0) || self.m.contains(&0) {
                return Err(config_err("d and m grids must be non-empty and positive"));
            }
        }
        if matches!(self.kind, ExperimentKind::EpSup) && (self.m.is_empty() || self.m.iter().any(|&m| m < 100)) {
            return Err(config_err("ep-sup needs m ≥ 100"));
        }
        if matches!(self.kind, ExperimentKind::Decompose) && self.dims.as_ref().is_some_and(|d| d.len() != 3) {
            return Err(config_err("decompose needs a two-layer shape"));
        }
        let uses_s0 = matches!(
            self.kind,
            ExperimentKind::FlipSweep | ExperimentKind::Decompose | ExperimentKind::LayerStats | ExperimentKind::Bounds
        ) && self.step_rule == StepRuleKind::Constant;
        if uses_s0 && (self.s0.is_empty() || self.s0.iter().any(|s| !(s.is_finite() && *s >= 0.0))) {
            return Err(config_err("s0 grid must be non-empty, finite and non-negative"));
        }
        let uses_xi = matches!(self.kind, ExperimentKind::Theorem3) || self.step_rule == StepRuleKind::Theorem3;
        if uses_xi && (self.xi.is_empty() || self.xi.iter().any(|&x| !(x > 0.0 && x < self.constants.c0))) {
            return Err(config_err("xi grid must be non-empty with 0 < ξ < C₀"));
        }
        if self.step_rule == StepRuleKind::Theorem3 && self.dims.as_ref().is_some_and(|d| d.len() != 3) {
            return Err(config_err("the theorem3 step rule applies to two-layer networks"));
        }
        if matches!(self.kind, ExperimentKind::Bounds | ExperimentKind::EpSup | ExperimentKind::CalibrateConstants) {
            if self.delta.is_empty() || self.delta.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
                return Err(config_err("delta grid must be non-empty and positive"));
            }
            if matches!(self.kind, ExperimentKind::Bounds) && self.delta.iter().any(|&d| d >= 1.0) {
                return Err(config_err("bounds need δ in (0, 1)"));
            }
        }
        if matches!(self.kind, ExperimentKind::EpSup | ExperimentKind::CalibrateConstants)
            && (self.grid_per_axis < 3 || self.grid_per_axis.is_multiple_of(2))
        {
            return Err(config_err("grid_per_axis must be odd and at least 3"));
        }
        if matches!(self.kind, ExperimentKind::Stein) && (self.samples < 2 || !(self.stein_variance > 0.0)) {
            return Err(config_err("stein needs at least two samples and a positive variance"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_trials_rejected() {
        let mut c = ExperimentConfig::new(ExperimentKind::FlipSweep);
        c.trials = 0;
        assert!(c.validate().unwrap_err().is_validation());
    }

    #[test]
    fn json_round_trip_and_unknown_fields() {
        let c = ExperimentConfig::from_json_str(r#"{"kind": "layer-stats", "dims": [10, 10, 1], "trials": 3}"#).unwrap();
        assert_eq!(c.kind, ExperimentKind::LayerStats);
        assert_eq!(c.shapes(), vec![vec![10, 10, 1]]);
        let back = ExperimentConfig::from_json_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert!(ExperimentConfig::from_json_str(r#"{"kind": "flip-sweep", "bogus": 1}"#).is_err());
        assert!(ExperimentConfig::from_json_str(r#"{"kind": "theorem3-check"}"#).is_ok());
    }

    #[test]
    fn bad_activation_and_grids() {
        let mut c = ExperimentConfig::new(ExperimentKind::FlipSweep);
        c.activation = "sigmoidish".into();
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::new(ExperimentKind::FlipSweep);
        c.s0.clear();
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::new(ExperimentKind::Bounds);
        c.delta = vec![1.5];
        assert!(c.validate().is_err());
    }
}
