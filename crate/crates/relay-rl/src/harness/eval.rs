//! Frozen-policy evaluation across outage thresholds.
//!
//! Channel trajectories are keyed only by (seed, episode), never by method,
//! checkpoint or threshold: every policy is scored on the same fading
//! realizations, and one pass collects the per-slot mutual information from
//! which every threshold's success rate is read off. Success is therefore
//! non-increasing in the threshold by construction.

use super::seeds::{rng_from, StreamId};
use super::HarnessError;
use crate::agents::{load_checkpoint, random_act, AgentCheckpoint, AgentKind, AgentSnapshot};
use crate::env::{observe_features, sample_initial_channels, step};
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub agent: AgentKind,
    pub lambda: f64,
    pub success_rate: f64,
}

#[derive(Debug, Clone)]
pub struct SkippedCheckpoint {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct EvalOutcome {
    /// Mean success per (method, threshold), methods in fixed order,
    /// thresholds ascending.
    pub records: Vec<EvalRecord>,
    pub skipped: Vec<SkippedCheckpoint>,
}

pub const EVAL_HEADER: &str = "method,lambda,success_rate";

const METHOD_ORDER: [AgentKind; 4] = [
    AgentKind::PerDdpg,
    AgentKind::Ddpg,
    AgentKind::Dqn,
    AgentKind::Random,
];

/// Evaluates every readable checkpoint (and, when requested, the random
/// baseline against the first checkpoint's system configuration) for
/// `episodes` frozen episodes per threshold. Unreadable checkpoints are
/// skipped and reported, not fatal.
pub fn run_evaluation(
    checkpoint_paths: &[PathBuf],
    lambdas: &[f64],
    episodes: usize,
    seed: u64,
    include_random: bool,
) -> Result<EvalOutcome, HarnessError> {
    if episodes == 0 || lambdas.is_empty() {
        return Err(HarnessError::EmptyEvaluation);
    }
    let mut lambdas: Vec<f64> = lambdas.to_vec();
    lambdas.sort_by(|a, b| a.partial_cmp(b).expect("thresholds must be comparable"));
    lambdas.dedup();

    let mut skipped = Vec::new();
    let mut loaded: Vec<AgentCheckpoint> = Vec::new();
    for path in checkpoint_paths {
        match load_checkpoint(path) {
            Ok(ckpt) => loaded.push(ckpt),
            Err(err) => skipped.push(SkippedCheckpoint {
                path: path.clone(),
                reason: err.to_string(),
            }),
        }
    }
    if loaded.is_empty() {
        return Err(HarnessError::NoUsableCheckpoints(checkpoint_paths.len()));
    }

    // successes[kind] = (hits per lambda, slots scored)
    let mut tallies: std::collections::HashMap<AgentKind, (Vec<u64>, u64)> =
        std::collections::HashMap::new();
    for ckpt in &loaded {
        let mi_series = policy_mi_series(ckpt, episodes, seed)?;
        accumulate(&mut tallies, ckpt.kind, &mi_series, &lambdas);
    }
    if include_random {
        let system = loaded[0].system.clone();
        let mut mi_series = Vec::new();
        for episode in 0..episodes {
            let mut env_rng = rng_from(&[seed, episode as u64, StreamId::EvalEnv as u64]);
            let mut policy_rng = rng_from(&[seed, episode as u64, StreamId::EvalPolicy as u64]);
            let mut state = sample_initial_channels(&system, &mut env_rng);
            loop {
                let cmd = random_act(system.relay_count, system.max_power, &mut policy_rng);
                let outcome = step(&state, &cmd, &system, &mut env_rng)?;
                mi_series.push(outcome.mutual_information);
                state = outcome.next_state;
                if outcome.done {
                    break;
                }
            }
        }
        accumulate(&mut tallies, AgentKind::Random, &mi_series, &lambdas);
    }

    let mut records = Vec::new();
    for kind in METHOD_ORDER {
        if let Some((hits, slots)) = tallies.get(&kind) {
            for (i, &lambda) in lambdas.iter().enumerate() {
                records.push(EvalRecord {
                    agent: kind,
                    lambda,
                    success_rate: hits[i] as f64 / *slots as f64,
                });
            }
        }
    }
    Ok(EvalOutcome { records, skipped })
}

/// Runs the frozen policy of one checkpoint and returns the mutual
/// information of every slot of every evaluation episode.
fn policy_mi_series(
    ckpt: &AgentCheckpoint,
    episodes: usize,
    seed: u64,
) -> Result<Vec<f64>, HarnessError> {
    let system = &ckpt.system;
    let mut series = Vec::with_capacity(episodes * system.episode_length);
    for episode in 0..episodes {
        let mut env_rng = rng_from(&[seed, episode as u64, StreamId::EvalEnv as u64]);
        let mut policy_rng = rng_from(&[seed, episode as u64, StreamId::EvalPolicy as u64]);
        let mut state = sample_initial_channels(system, &mut env_rng);
        loop {
            let features = observe_features(&state, system);
            let cmd = match &ckpt.snapshot {
                AgentSnapshot::Ddpg(agent) => agent.act(&features, false, &mut policy_rng)?.1,
                AgentSnapshot::Dqn(agent) => agent.act(&features, false, &mut policy_rng)?.1,
            };
            let outcome = step(&state, &cmd, system, &mut env_rng)?;
            series.push(outcome.mutual_information);
            state = outcome.next_state;
            if outcome.done {
                break;
            }
        }
    }
    Ok(series)
}

fn accumulate(
    tallies: &mut std::collections::HashMap<AgentKind, (Vec<u64>, u64)>,
    kind: AgentKind,
    mi_series: &[f64],
    lambdas: &[f64],
) {
    let entry = tallies
        .entry(kind)
        .or_insert_with(|| (vec![0; lambdas.len()], 0));
    entry.1 += mi_series.len() as u64;
    for &mi in mi_series {
        for (i, &lambda) in lambdas.iter().enumerate() {
            // Success is the complement of the strict-inequality outage.
            if mi >= lambda {
                entry.0[i] += 1;
            }
        }
    }
}

pub fn write_eval_csv(records: &[EvalRecord], path: &Path) -> Result<(), std::io::Error> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{EVAL_HEADER}")?;
    for r in records {
        writeln!(out, "{},{},{}", r.agent, r.lambda, r.success_rate)?;
    }
    out.flush()
}
