//! Learning agents: the deterministic-policy-gradient agent (with and without
//! prioritized replay), the discrete value-based baseline, and the random
//! baseline, plus the checkpoint bundle they all share.

use crate::env::ActionCommand;
use crate::nn::NnError;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod checkpoint;
mod ddpg;
mod dqn;

pub use checkpoint::{load_checkpoint, save_checkpoint, AgentCheckpoint, AgentSnapshot};
pub use ddpg::{DdpgAgent, DdpgParams};
pub use dqn::{decode_discrete_action, DqnAgent, DqnParams};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("non-finite training signal; step aborted")]
    NonFiniteSignal,
    #[error("cannot train on an empty batch")]
    EmptyBatch,
    #[error("experience unit shape does not match this agent: {0}")]
    MalformedUnit(String),
}

/// Which policy produced a run. Baselines and the full method share the same
/// environment and seeding interfaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    PerDdpg,
    Ddpg,
    Dqn,
    Random,
}

impl AgentKind {
    pub fn name(self) -> &'static str {
        match self {
            AgentKind::PerDdpg => "per_ddpg",
            AgentKind::Ddpg => "ddpg",
            AgentKind::Dqn => "dqn",
            AgentKind::Random => "random",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "per_ddpg" => Some(AgentKind::PerDdpg),
            "ddpg" => Some(AgentKind::Ddpg),
            "dqn" => Some(AgentKind::Dqn),
            "random" => Some(AgentKind::Random),
            _ => None,
        }
    }
}

impl std::fmt::Display for AgentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Outcome of one mini-batch update. `td_errors` go back to the replay buffer
/// as new priorities.
#[derive(Debug, Clone)]
pub struct TrainStepReport {
    pub critic_loss: f64,
    pub mean_abs_td: f64,
    pub actor_objective: f64,
    pub td_errors: Vec<f64>,
}

/// Maps the actor's raw output (K relay scores then a power fraction) to a
/// concrete command: argmax relay with ties broken towards the lowest index,
/// power fraction clamped to [0, 1] and scaled by the budget.
pub fn decode_action(raw: &[f64], relay_count: usize, max_power: f64) -> ActionCommand {
    debug_assert_eq!(raw.len(), relay_count + 1);
    let mut best = 0usize;
    for (i, &score) in raw[..relay_count].iter().enumerate() {
        if score > raw[best] {
            best = i;
        }
    }
    ActionCommand {
        relay_index: best + 1,
        source_power: raw[relay_count].clamp(0.0, 1.0) * max_power,
    }
}

/// Uniform relay, uniform source power: the random baseline policy.
pub fn random_act<R: Rng>(relay_count: usize, max_power: f64, rng: &mut R) -> ActionCommand {
    ActionCommand {
        relay_index: rng.random_range(1..=relay_count),
        source_power: rng.random::<f64>() * max_power,
    }
}

/// Tanh on the K relay scores, sigmoid on the power fraction.
pub(crate) fn policy_head(z: &[f64], relay_count: usize) -> Vec<f64> {
    z.iter()
        .enumerate()
        .map(|(i, &v)| {
            if i < relay_count {
                v.tanh()
            } else {
                1.0 / (1.0 + (-v).exp())
            }
        })
        .collect()
}

/// Elementwise derivative of the head, expressed through its outputs.
pub(crate) fn policy_head_derivative(outputs: &[f64], relay_count: usize) -> Vec<f64> {
    outputs
        .iter()
        .enumerate()
        .map(|(i, &a)| if i < relay_count { 1.0 - a * a } else { a * (1.0 - a) })
        .collect()
}
