//! Experiment configuration: a JSON document with `scenario` and `run`
//! sections, plus dotted-path overrides from the command line.

use risshare::agents::{AgentKind, TrainParams};
use risshare::topology::{build_scenario, fix_ris_association, RisAssociation, Scenario, ScenarioConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse {path}: {reason}")]
    Parse { path: String, reason: String },
    #[error("invalid override `{0}`: expected key=value")]
    BadOverride(String),
    #[error("override path `{0}` does not address an object field")]
    BadOverridePath(String),
    #[error("invalid run config `{field}`: {reason}")]
    InvalidRun { field: &'static str, reason: String },
    #[error(transparent)]
    Scenario(#[from] risshare::topology::ConfigError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentChoice {
    Ddpg,
    Sac,
    /// No learner; the config only drives benchmarks.
    None,
}

impl AgentChoice {
    pub fn kind(self) -> Option<AgentKind> {
        match self {
            AgentChoice::Ddpg => Some(AgentKind::Ddpg),
            AgentChoice::Sac => Some(AgentKind::Sac),
            AgentChoice::None => None,
        }
    }
}

/// Hyperparameter overrides; anything left `None` falls back to the
/// per-agent defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperConfig {
    pub gamma: Option<f64>,
    pub tau: Option<f64>,
    pub batch: Option<usize>,
    pub buffer: Option<usize>,
    pub lr_actor: Option<f64>,
    pub lr_critic: Option<f64>,
    pub lr_alpha: Option<f64>,
    pub alpha_init: Option<f64>,
    pub updates_per_step: Option<usize>,
    pub policy_delay: Option<usize>,
    pub hidden: Option<usize>,
    pub warmup: Option<usize>,
    pub expl_sigma_start: Option<f64>,
    pub expl_sigma_end: Option<f64>,
    pub reward_norm: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSection {
    pub agent: AgentChoice,
    pub steps: usize,
    pub episode_length: usize,
    pub seeds: Vec<u64>,
    pub hyper: HyperConfig,
    /// Trailing moving-average window for the smoothed reward column.
    pub smooth_window: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            agent: AgentChoice::Sac,
            steps: 20_000,
            episode_length: 100,
            seeds: vec![1, 2, 3],
            hyper: HyperConfig::default(),
            smooth_window: 500,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub run: RunSection,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.run.steps == 0 {
            return Err(ConfigError::InvalidRun { field: "run.steps", reason: "must be > 0".into() });
        }
        if self.run.seeds.is_empty() {
            return Err(ConfigError::InvalidRun { field: "run.seeds", reason: "must be non-empty".into() });
        }
        if self.run.episode_length == 0 {
            return Err(ConfigError::InvalidRun {
                field: "run.episode_length",
                reason: "must be > 0".into(),
            });
        }
        if self.run.smooth_window == 0 {
            return Err(ConfigError::InvalidRun {
                field: "run.smooth_window",
                reason: "must be > 0".into(),
            });
        }
        let h = &self.run.hyper;
        if let Some(g) = h.gamma {
            if !(0.0..1.0).contains(&g) {
                return Err(ConfigError::InvalidRun {
                    field: "run.hyper.gamma",
                    reason: "must lie in [0, 1)".into(),
                });
            }
        }
        if let Some(t) = h.tau {
            if !(0.0..=1.0).contains(&t) || t == 0.0 {
                return Err(ConfigError::InvalidRun {
                    field: "run.hyper.tau",
                    reason: "must lie in (0, 1]".into(),
                });
            }
        }
        for (name, v) in [
            ("run.hyper.lr_actor", h.lr_actor),
            ("run.hyper.lr_critic", h.lr_critic),
            ("run.hyper.lr_alpha", h.lr_alpha),
            ("run.hyper.alpha_init", h.alpha_init),
        ] {
            if let Some(x) = v {
                if x <= 0.0 {
                    return Err(ConfigError::InvalidRun { field: name, reason: "must be > 0".into() });
                }
            }
        }
        for (name, v) in [
            ("run.hyper.batch", h.batch),
            ("run.hyper.buffer", h.buffer),
            ("run.hyper.updates_per_step", h.updates_per_step),
            ("run.hyper.policy_delay", h.policy_delay),
            ("run.hyper.hidden", h.hidden),
        ] {
            if let Some(0) = v {
                return Err(ConfigError::InvalidRun { field: name, reason: "must be > 0".into() });
            }
        }
        Ok(())
    }

    /// Training parameters for one seed, merging per-agent defaults with the
    /// hyper section.
    pub fn train_params(&self, kind: AgentKind, seed: u64) -> TrainParams {
        let mut p = TrainParams::defaults(kind);
        p.total_steps = self.run.steps;
        p.episode_length = self.run.episode_length;
        p.seed = seed;
        let h = &self.run.hyper;
        if let Some(x) = h.gamma {
            p.gamma = x;
        }
        if let Some(x) = h.tau {
            p.tau = x;
        }
        if let Some(x) = h.batch {
            p.batch_size = x;
        }
        if let Some(x) = h.buffer {
            p.buffer_capacity = x;
        }
        if let Some(x) = h.lr_actor {
            p.lr_actor = x;
        }
        if let Some(x) = h.lr_critic {
            p.lr_critic = x;
        }
        if let Some(x) = h.lr_alpha {
            p.lr_alpha = x;
        }
        if let Some(x) = h.alpha_init {
            p.alpha_init = x;
        }
        if let Some(x) = h.updates_per_step {
            p.updates_per_step = x;
        }
        if let Some(x) = h.policy_delay {
            p.policy_delay = x;
        }
        if let Some(x) = h.hidden {
            p.hidden = x;
        }
        if let Some(x) = h.warmup {
            p.warmup_steps = x;
        }
        if let Some(x) = h.expl_sigma_start {
            p.expl_sigma_start = x;
        }
        if let Some(x) = h.expl_sigma_end {
            p.expl_sigma_end = x;
        }
        if let Some(x) = h.reward_norm {
            p.reward_norm = x;
        }
        p
    }

    pub fn build(&self) -> Result<(Scenario, RisAssociation), ConfigError> {
        let scenario = build_scenario(&self.scenario)?;
        let assoc = fix_ris_association(&scenario);
        Ok((scenario, assoc))
    }
}

/// Applies `key=value` overrides onto the raw JSON document; keys use dotted
/// paths (`run.hyper.gamma=0.5`, `scenario.ris.elements=16`). Values parse
/// as JSON when possible and fall back to strings.
pub fn apply_overrides(
    doc: &mut serde_json::Value,
    overrides: &[String],
) -> Result<(), ConfigError> {
    for entry in overrides {
        let (path, raw_value) =
            entry.split_once('=').ok_or_else(|| ConfigError::BadOverride(entry.clone()))?;
        let value: serde_json::Value = serde_json::from_str(raw_value)
            .unwrap_or_else(|_| serde_json::Value::String(raw_value.to_string()));
        let mut cursor = &mut *doc;
        let segments: Vec<&str> = path.split('.').collect();
        for (i, segment) in segments.iter().enumerate() {
            if !cursor.is_object() {
                return Err(ConfigError::BadOverridePath(path.to_string()));
            }
            let map = cursor.as_object_mut().unwrap();
            if i + 1 == segments.len() {
                map.insert(segment.to_string(), value);
                break;
            }
            cursor = map
                .entry(segment.to_string())
                .or_insert_with(|| serde_json::Value::Object(Default::default()));
        }
    }
    Ok(())
}

/// Loads, overrides, and validates an experiment configuration.
pub fn load_config(path: &str, overrides: &[String]) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.to_string(), source })?;
    let mut doc: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| ConfigError::Parse { path: path.to_string(), reason: e.to_string() })?;
    apply_overrides(&mut doc, overrides)?;
    let config: ExperimentConfig = serde_json::from_value(doc)
        .map_err(|e| ConfigError::Parse { path: path.to_string(), reason: e.to_string() })?;
    config.validate()?;
    Ok(config)
}
