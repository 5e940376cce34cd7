//! Full agent checkpoints: the system configuration that trained the agent,
//! every network (evaluate and target) and the optimizer accumulators, enough
//! to reload bit-exactly for evaluation or resumption.

use super::{AgentKind, DdpgAgent, DqnAgent};
use crate::env::{ObservationMode, SystemConfig};
use crate::nn::checkpoint::{
    format_f64, read_mlp, read_rmsprop, write_mlp, write_rmsprop, CheckpointError, Reader,
};
use std::io::Write;
use std::path::Path;
use thiserror::Error;

const HEADER: &str = "relay-rl checkpoint v1";

#[derive(Debug, Error)]
pub enum AgentCheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Format {
        path: String,
        #[source]
        source: CheckpointError,
    },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum AgentSnapshot {
    Ddpg(DdpgAgent),
    Dqn(DqnAgent),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentCheckpoint {
    pub kind: AgentKind,
    pub seed: u64,
    pub config_hash: u64,
    pub system: SystemConfig,
    pub snapshot: AgentSnapshot,
}

impl AgentCheckpoint {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(HEADER);
        out.push('\n');
        out.push_str(&format!("config_hash {:016x}\n", self.config_hash));
        out.push_str(&format!("seed {}\n", self.seed));
        out.push_str(&format!("agent {}\n", self.kind.name()));
        write_system(&mut out, &self.system);
        match &self.snapshot {
            AgentSnapshot::Ddpg(agent) => {
                out.push_str(&format!("discount {}\n", format_f64(agent.discount)));
                out.push_str(&format!("soft_update {}\n", format_f64(agent.tau)));
                out.push_str(&format!("gradient_clip {}\n", format_f64(agent.gradient_clip)));
                out.push_str(&format!("noise_scale {}\n", format_f64(agent.noise_scale)));
                write_mlp(&mut out, "actor", &agent.actor);
                write_mlp(&mut out, "actor_target", &agent.actor_target);
                write_mlp(&mut out, "critic", &agent.critic);
                write_mlp(&mut out, "critic_target", &agent.critic_target);
                write_rmsprop(&mut out, "actor", &agent.actor_opt);
                write_rmsprop(&mut out, "critic", &agent.critic_opt);
            }
            AgentSnapshot::Dqn(agent) => {
                out.push_str(&format!("discount {}\n", format_f64(agent.discount)));
                out.push_str(&format!("soft_update {}\n", format_f64(agent.tau)));
                out.push_str(&format!("gradient_clip {}\n", format_f64(agent.gradient_clip)));
                out.push_str(&format!(
                    "exploration_rate {}\n",
                    format_f64(agent.exploration_rate)
                ));
                out.push_str(&format!("power_levels {}\n", agent.power_levels));
                write_mlp(&mut out, "q", &agent.q_net);
                write_mlp(&mut out, "q_target", &agent.q_target);
                write_rmsprop(&mut out, "q", &agent.opt);
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, CheckpointError> {
        let mut reader = Reader::new(text);
        let header = reader.next_line("header")?;
        if header != HEADER {
            return Err(CheckpointError::Parse {
                line: reader.line_no,
                message: format!("unsupported header `{header}`"),
            });
        }
        let config_hash = {
            let raw = reader.expect_tag("config_hash")?;
            u64::from_str_radix(raw, 16).map_err(|_| CheckpointError::Parse {
                line: reader.line_no,
                message: format!("invalid config hash `{raw}`"),
            })?
        };
        let seed = {
            let raw = reader.expect_tag("seed")?;
            raw.parse().map_err(|_| CheckpointError::Parse {
                line: reader.line_no,
                message: format!("invalid seed `{raw}`"),
            })?
        };
        let kind_name = reader.expect_tag("agent")?;
        let kind = AgentKind::from_name(kind_name).ok_or_else(|| CheckpointError::Parse {
            line: reader.line_no,
            message: format!("unknown agent kind `{kind_name}`"),
        })?;
        let system = read_system(&mut reader)?;
        system.validate().map_err(|e| CheckpointError::Parse {
            line: reader.line_no,
            message: e.to_string(),
        })?;
        let feature_len = system.feature_len();
        let relay_count = system.relay_count;
        let max_power = system.max_power;

        let bad = |reader: &Reader, message: String| CheckpointError::Parse {
            line: reader.line_no,
            message,
        };
        let snapshot = match kind {
            AgentKind::PerDdpg | AgentKind::Ddpg => {
                let discount = parse_tagged_f64(&mut reader, "discount")?;
                let tau = parse_tagged_f64(&mut reader, "soft_update")?;
                let gradient_clip = parse_tagged_f64(&mut reader, "gradient_clip")?;
                let noise_scale = parse_tagged_f64(&mut reader, "noise_scale")?;
                let actor = named_mlp(&mut reader, "actor")?;
                let actor_target = named_mlp(&mut reader, "actor_target")?;
                let critic = named_mlp(&mut reader, "critic")?;
                let critic_target = named_mlp(&mut reader, "critic_target")?;
                let actor_opt = named_opt(&mut reader, "actor", &actor)?;
                let critic_opt = named_opt(&mut reader, "critic", &critic)?;
                let agent = DdpgAgent::from_parts(
                    actor,
                    actor_target,
                    critic,
                    critic_target,
                    actor_opt,
                    critic_opt,
                    feature_len,
                    relay_count,
                    max_power,
                    discount,
                    tau,
                    gradient_clip,
                    noise_scale,
                )
                .map_err(|e| bad(&reader, e.to_string()))?;
                AgentSnapshot::Ddpg(agent)
            }
            AgentKind::Dqn => {
                let discount = parse_tagged_f64(&mut reader, "discount")?;
                let tau = parse_tagged_f64(&mut reader, "soft_update")?;
                let gradient_clip = parse_tagged_f64(&mut reader, "gradient_clip")?;
                let exploration_rate = parse_tagged_f64(&mut reader, "exploration_rate")?;
                let power_levels = {
                    let raw = reader.expect_tag("power_levels")?;
                    reader.parse_usize(raw)?
                };
                let q_net = named_mlp(&mut reader, "q")?;
                let q_target = named_mlp(&mut reader, "q_target")?;
                let opt = named_opt(&mut reader, "q", &q_net)?;
                let agent = DqnAgent::from_parts(
                    q_net,
                    q_target,
                    opt,
                    feature_len,
                    relay_count,
                    power_levels,
                    max_power,
                    discount,
                    tau,
                    gradient_clip,
                    exploration_rate,
                )
                .map_err(|e| bad(&reader, e.to_string()))?;
                AgentSnapshot::Dqn(agent)
            }
            AgentKind::Random => {
                return Err(CheckpointError::Parse {
                    line: reader.line_no,
                    message: "the random baseline has no checkpointable state".into(),
                })
            }
        };
        Ok(Self {
            kind,
            seed,
            config_hash,
            system,
            snapshot,
        })
    }
}

fn named_mlp(reader: &mut Reader, expected: &str) -> Result<crate::nn::Mlp, CheckpointError> {
    let (name, net) = read_mlp(reader)?;
    if name != expected {
        return Err(CheckpointError::Parse {
            line: reader.line_no,
            message: format!("expected network `{expected}`, found `{name}`"),
        });
    }
    Ok(net)
}

fn named_opt(
    reader: &mut Reader,
    expected: &str,
    net: &crate::nn::Mlp,
) -> Result<crate::nn::RmsPropState, CheckpointError> {
    let (name, opt) = read_rmsprop(reader, net)?;
    if name != expected {
        return Err(CheckpointError::Parse {
            line: reader.line_no,
            message: format!("expected optimizer `{expected}`, found `{name}`"),
        });
    }
    Ok(opt)
}

fn parse_tagged_f64(reader: &mut Reader, tag: &str) -> Result<f64, CheckpointError> {
    let raw = reader.expect_tag(tag)?;
    reader.parse_f64(raw)
}

fn write_system(out: &mut String, system: &SystemConfig) {
    out.push_str(&format!("system.relay_count {}\n", system.relay_count));
    out.push_str(&format!("system.source_antennas {}\n", system.source_antennas));
    out.push_str(&format!("system.dest_antennas {}\n", system.dest_antennas));
    out.push_str(&format!(
        "system.channel_variance_first_hop {}\n",
        format_f64(system.channel_variance_first_hop)
    ));
    out.push_str(&format!(
        "system.channel_variance_second_hop {}\n",
        format_f64(system.channel_variance_second_hop)
    ));
    out.push_str(&format!(
        "system.noise_variance {}\n",
        format_f64(system.noise_variance)
    ));
    out.push_str(&format!(
        "system.correlation {}\n",
        format_f64(system.correlation)
    ));
    out.push_str(&format!("system.max_power {}\n", format_f64(system.max_power)));
    out.push_str(&format!(
        "system.outage_threshold {}\n",
        format_f64(system.outage_threshold)
    ));
    out.push_str(&format!("system.episode_length {}\n", system.episode_length));
    out.push_str(&format!("system.observation {}\n", system.observation.name()));
}

fn read_system(reader: &mut Reader) -> Result<SystemConfig, CheckpointError> {
    let usize_field = |reader: &mut Reader, tag: &str| -> Result<usize, CheckpointError> {
        let raw = reader.expect_tag(tag)?;
        reader.parse_usize(raw)
    };
    let f64_field = |reader: &mut Reader, tag: &str| -> Result<f64, CheckpointError> {
        let raw = reader.expect_tag(tag)?;
        reader.parse_f64(raw)
    };
    let relay_count = usize_field(reader, "system.relay_count")?;
    let source_antennas = usize_field(reader, "system.source_antennas")?;
    let dest_antennas = usize_field(reader, "system.dest_antennas")?;
    let channel_variance_first_hop = f64_field(reader, "system.channel_variance_first_hop")?;
    let channel_variance_second_hop = f64_field(reader, "system.channel_variance_second_hop")?;
    let noise_variance = f64_field(reader, "system.noise_variance")?;
    let correlation = f64_field(reader, "system.correlation")?;
    let max_power = f64_field(reader, "system.max_power")?;
    let outage_threshold = f64_field(reader, "system.outage_threshold")?;
    let episode_length = usize_field(reader, "system.episode_length")?;
    let observation_name = reader.expect_tag("system.observation")?;
    let observation =
        ObservationMode::from_name(observation_name).ok_or_else(|| CheckpointError::Parse {
            line: reader.line_no,
            message: format!("unknown observation mode `{observation_name}`"),
        })?;
    Ok(SystemConfig {
        relay_count,
        source_antennas,
        dest_antennas,
        channel_variance_first_hop,
        channel_variance_second_hop,
        noise_variance,
        correlation,
        max_power,
        outage_threshold,
        episode_length,
        observation,
    })
}

pub fn save_checkpoint(path: &Path, checkpoint: &AgentCheckpoint) -> Result<(), AgentCheckpointError> {
    let io_err = |source| AgentCheckpointError::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(io_err)?;
        }
    }
    let mut file = std::fs::File::create(path).map_err(io_err)?;
    file.write_all(checkpoint.to_text().as_bytes()).map_err(io_err)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<AgentCheckpoint, AgentCheckpointError> {
    let text = std::fs::read_to_string(path).map_err(|source| AgentCheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    AgentCheckpoint::parse(&text).map_err(|source| AgentCheckpointError::Format {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{DdpgParams, DqnParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ddpg_checkpoint() -> AgentCheckpoint {
        let system = SystemConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = DdpgParams {
            feature_len: system.feature_len(),
            relay_count: system.relay_count,
            max_power: system.max_power,
            actor_hidden: vec![16, 8],
            critic_hidden: vec![16],
            actor_learning_rate: 0.001,
            critic_learning_rate: 0.005,
            discount: 0.99,
            soft_update: 0.001,
            gradient_clip: 1.0,
        };
        let mut agent = DdpgAgent::new(&params, &mut rng).unwrap();
        agent.set_noise_scale(0.17);
        AgentCheckpoint {
            kind: AgentKind::PerDdpg,
            seed: 42,
            config_hash: 0xdead_beef_0123_4567,
            system,
            snapshot: AgentSnapshot::Ddpg(agent),
        }
    }

    #[test]
    fn ddpg_round_trip_is_bit_exact() {
        let original = ddpg_checkpoint();
        let text = original.to_text();
        let restored = AgentCheckpoint::parse(&text).unwrap();
        assert_eq!(restored, original);
    }

    #[test]
    fn dqn_round_trip_is_bit_exact() {
        let system = SystemConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let params = DqnParams {
            feature_len: system.feature_len(),
            relay_count: system.relay_count,
            power_levels: 10,
            max_power: system.max_power,
            learning_rate: 0.005,
            discount: 0.99,
            soft_update: 0.001,
            gradient_clip: 1.0,
            q_hidden: vec![12],
        };
        let mut agent = DqnAgent::new(&params, &mut rng).unwrap();
        agent.set_exploration_rate(0.31);
        let original = AgentCheckpoint {
            kind: AgentKind::Dqn,
            seed: 7,
            config_hash: 1,
            system,
            snapshot: AgentSnapshot::Dqn(agent),
        };
        let restored = AgentCheckpoint::parse(&original.to_text()).unwrap();
        assert_eq!(restored, original);
    }

    #[test]
    fn save_and_load_through_the_filesystem() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt").join("trial_0.ckpt");
        let original = ddpg_checkpoint();
        save_checkpoint(&path, &original).unwrap();
        let restored = load_checkpoint(&path).unwrap();
        assert_eq!(restored, original);
    }

    #[test]
    fn corrupted_file_reports_position() {
        let original = ddpg_checkpoint();
        let mut text = original.to_text();
        let pos = text.find("network critic").unwrap();
        text.replace_range(pos..pos + 7, "botwork");
        let err = AgentCheckpoint::parse(&text).unwrap_err();
        assert!(matches!(err, CheckpointError::Parse { .. }));
    }
}
