//! Experiment configuration: every hyperparameter of a run, its TOML file
//! format, and validation with named fields.

use crate::agents::AgentKind;
use crate::env::SystemConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigIoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{path}: {source}")]
    Invalid {
        path: String,
        #[source]
        source: ConfigValidationError,
    },
    #[error("cannot serialize config: {message}")]
    Serialize { message: String },
}

#[derive(Debug, Error, PartialEq)]
#[error("invalid config: {field} {reason}")]
pub struct ConfigValidationError {
    pub field: String,
    pub reason: String,
}

fn bad(field: &str, reason: impl Into<String>) -> ConfigValidationError {
    ConfigValidationError {
        field: field.to_string(),
        reason: reason.into(),
    }
}

/// Replay buffer settings. `priority_exponent` is alpha; a value of zero turns
/// the buffer into plain uniform replay. `is_exponent` is kappa and
/// `priority_floor` the epsilon added to |TD|.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayConfig {
    pub buffer_size: usize,
    pub batch_size: usize,
    pub priority_exponent: f64,
    pub is_exponent: f64,
    pub priority_floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimConfig {
    pub critic_learning_rate: f64,
    pub actor_learning_rate: f64,
    pub soft_update: f64,
    pub discount: f64,
    pub gradient_clip: f64,
}

/// Gaussian exploration noise on the actor output, decayed geometrically per
/// episode down to a floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub initial_scale: f64,
    pub episode_decay: f64,
    pub floor: f64,
}

/// Settings of the discrete value-based baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DqnSettings {
    pub power_levels: usize,
    pub exploration_initial: f64,
    pub exploration_final: f64,
    /// Episodes over which exploration decays linearly from initial to final.
    pub exploration_decay_episodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchConfig {
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub q_hidden: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub agent: AgentKind,
    /// Total training episodes per trial.
    pub episodes: usize,
    /// Leading episodes driven by the random policy to fill the buffer.
    pub warmup_episodes: usize,
    pub trials: usize,
    pub base_seed: u64,
    /// A trial counts as successful when its final-window mean success rate
    /// reaches this value.
    pub success_threshold: f64,
    pub output_dir: PathBuf,
    /// When false (the default) the wall_ms metrics column is written as 0 so
    /// output files are byte-identical across reruns; timing still goes to
    /// the console log.
    #[serde(default)]
    pub record_timing: bool,
    pub system: SystemConfig,
    pub replay: ReplayConfig,
    pub optim: OptimConfig,
    pub noise: NoiseConfig,
    pub dqn: DqnSettings,
    pub arch: ArchConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            agent: AgentKind::PerDdpg,
            episodes: 100,
            warmup_episodes: 10,
            trials: 10,
            base_seed: 7,
            success_threshold: 0.90,
            output_dir: PathBuf::from("out"),
            record_timing: false,
            system: SystemConfig::default(),
            replay: ReplayConfig {
                buffer_size: 10_000,
                batch_size: 128,
                priority_exponent: 0.6,
                is_exponent: 0.4,
                priority_floor: 0.01,
            },
            optim: OptimConfig {
                critic_learning_rate: 0.005,
                actor_learning_rate: 0.001,
                soft_update: 0.001,
                discount: 0.99,
                gradient_clip: 1.0,
            },
            noise: NoiseConfig {
                initial_scale: 0.3,
                episode_decay: 0.97,
                floor: 0.01,
            },
            dqn: DqnSettings {
                power_levels: 10,
                exploration_initial: 1.0,
                exploration_final: 0.05,
                exploration_decay_episodes: 30,
            },
            arch: ArchConfig {
                actor_hidden: vec![64, 64],
                critic_hidden: vec![64, 64],
                q_hidden: vec![64, 64],
            },
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigValidationError> {
        self.system
            .validate()
            .map_err(|e| bad(&format!("system.{}", e.field), e.reason))?;
        if self.episodes < 1 {
            return Err(bad("episodes", "must be at least 1"));
        }
        if self.warmup_episodes >= self.episodes {
            return Err(bad(
                "warmup_episodes",
                format!(
                    "must be smaller than episodes ({} >= {})",
                    self.warmup_episodes, self.episodes
                ),
            ));
        }
        if self.trials < 1 {
            return Err(bad("trials", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.success_threshold) {
            return Err(bad("success_threshold", "must lie in [0, 1]"));
        }
        if self.replay.buffer_size < 1 {
            return Err(bad("replay.buffer_size", "must be at least 1"));
        }
        if self.replay.batch_size < 1 {
            return Err(bad("replay.batch_size", "must be at least 1"));
        }
        if self.replay.batch_size > self.replay.buffer_size {
            return Err(bad(
                "replay.batch_size",
                format!(
                    "must not exceed buffer_size ({} > {})",
                    self.replay.batch_size, self.replay.buffer_size
                ),
            ));
        }
        if !(0.0..=1.0).contains(&self.replay.priority_exponent) {
            return Err(bad("replay.priority_exponent", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.replay.is_exponent) {
            return Err(bad("replay.is_exponent", "must lie in [0, 1]"));
        }
        if !(self.replay.priority_floor > 0.0) {
            return Err(bad("replay.priority_floor", "must be positive"));
        }
        for (field, v) in [
            (
                "optim.critic_learning_rate",
                self.optim.critic_learning_rate,
            ),
            ("optim.actor_learning_rate", self.optim.actor_learning_rate),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(bad(field, "must be a positive finite number"));
            }
        }
        if !(0.0..=1.0).contains(&self.optim.soft_update) {
            return Err(bad("optim.soft_update", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.optim.discount) {
            return Err(bad("optim.discount", "must lie in [0, 1]"));
        }
        if !(self.optim.gradient_clip > 0.0) {
            return Err(bad("optim.gradient_clip", "must be positive"));
        }
        if self.noise.initial_scale < 0.0 || self.noise.floor < 0.0 {
            return Err(bad("noise", "scales must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.noise.episode_decay) {
            return Err(bad("noise.episode_decay", "must lie in [0, 1]"));
        }
        if self.dqn.power_levels < 1 {
            return Err(bad("dqn.power_levels", "must be at least 1"));
        }
        for (field, v) in [
            ("dqn.exploration_initial", self.dqn.exploration_initial),
            ("dqn.exploration_final", self.dqn.exploration_final),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(bad(field, "must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    /// Exploration noise scale used in the given episode.
    pub fn noise_scale_for_episode(&self, episode: usize) -> f64 {
        (self.noise.initial_scale * self.noise.episode_decay.powi(episode as i32))
            .max(self.noise.floor)
    }

    /// Epsilon-greedy rate used by the value-based baseline in the given
    /// episode: linear from initial to final over the decay window.
    pub fn exploration_for_episode(&self, episode: usize) -> f64 {
        let d = &self.dqn;
        if d.exploration_decay_episodes == 0 {
            return d.exploration_final;
        }
        let t = (episode as f64 / d.exploration_decay_episodes as f64).min(1.0);
        d.exploration_initial + (d.exploration_final - d.exploration_initial) * t
    }

    /// FNV-1a hash of the canonical TOML serialization; stamped into
    /// checkpoints so a model file can be traced back to its configuration.
    pub fn hash(&self) -> u64 {
        fnv1a64(
            toml::to_string(self)
                .expect("config serializes to TOML")
                .as_bytes(),
        )
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigIoError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigIoError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let config: ExperimentConfig = toml::from_str(&text).map_err(|e| ConfigIoError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    config.validate().map_err(|source| ConfigIoError::Invalid {
        path: path.display().to_string(),
        source,
    })?;
    Ok(config)
}

pub fn save_config(config: &ExperimentConfig, path: &Path) -> Result<(), ConfigIoError> {
    let text = toml::to_string_pretty(config).map_err(|e| ConfigIoError::Serialize {
        message: e.to_string(),
    })?;
    std::fs::write(path, text).map_err(|source| ConfigIoError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn shipped_example_config_matches_defaults() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/example.toml");
        let loaded = load_config(Path::new(path)).unwrap();
        assert_eq!(loaded, ExperimentConfig::default());
    }

    #[test]
    fn round_trip_through_toml_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.toml");
        let config = ExperimentConfig::default();
        save_config(&config, &path).unwrap();
        let loaded = load_config(&path).unwrap();
        assert_eq!(loaded, config);
    }

    #[test]
    fn unknown_key_is_rejected_by_name() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.toml");
        let mut text = toml::to_string_pretty(&ExperimentConfig::default()).unwrap();
        text.push_str("\nbogus_knob = 3\n");
        std::fs::write(&path, text).unwrap();
        let err = load_config(&path).unwrap_err();
        assert!(err.to_string().contains("bogus_knob"), "{err}");
    }

    #[test]
    fn missing_key_is_reported_by_name() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.toml");
        let text = toml::to_string_pretty(&ExperimentConfig::default()).unwrap();
        let without: String = text
            .lines()
            .filter(|l| !l.starts_with("base_seed"))
            .collect::<Vec<_>>()
            .join("\n");
        std::fs::write(&path, without).unwrap();
        let err = load_config(&path).unwrap_err();
        assert!(err.to_string().contains("base_seed"), "{err}");
    }

    #[test]
    fn invalid_values_name_the_field() {
        let mut config = ExperimentConfig::default();
        config.warmup_episodes = config.episodes;
        let err = config.validate().unwrap_err();
        assert_eq!(err.field, "warmup_episodes");

        let mut config = ExperimentConfig::default();
        config.replay.batch_size = config.replay.buffer_size + 1;
        let err = config.validate().unwrap_err();
        assert_eq!(err.field, "replay.batch_size");

        let mut config = ExperimentConfig::default();
        config.system.correlation = 1.5;
        let err = config.validate().unwrap_err();
        assert_eq!(err.field, "system.correlation");
    }

    #[test]
    fn noise_schedule_decays_to_floor() {
        let config = ExperimentConfig::default();
        assert!((config.noise_scale_for_episode(0) - config.noise.initial_scale).abs() < 1e-15);
        let late = config.noise_scale_for_episode(500);
        assert_eq!(late, config.noise.floor);
        assert!(config.noise_scale_for_episode(5) < config.noise_scale_for_episode(4));
    }

    #[test]
    fn exploration_schedule_is_linear_then_flat() {
        let config = ExperimentConfig::default();
        assert!((config.exploration_for_episode(0) - 1.0).abs() < 1e-12);
        assert!((config.exploration_for_episode(30) - 0.05).abs() < 1e-12);
        assert!((config.exploration_for_episode(100) - 0.05).abs() < 1e-12);
        let mid = config.exploration_for_episode(15);
        assert!((mid - (1.0 + (0.05 - 1.0) * 0.5)).abs() < 1e-12);
    }

    #[test]
    fn hash_changes_with_content() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.base_seed += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), a.clone().hash());
    }
}
