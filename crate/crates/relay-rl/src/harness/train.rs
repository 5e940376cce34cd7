//! The outer training loop: warmup, per-slot acting, replay pushes, sampled
//! mini-batch updates with priority write-back, soft target updates, and
//! multi-trial aggregation.

use super::config::ExperimentConfig;
use super::metrics::{
    mean, sample_std, summarize_trial, EpisodeMetrics, TrialSummary,
};
use super::seeds::{stream_rng, trial_seed, StreamId};
use super::HarnessError;
use crate::agents::{
    random_act, AgentCheckpoint, AgentError, AgentKind, AgentSnapshot, DdpgAgent, DdpgParams,
    DqnAgent, DqnParams, TrainStepReport,
};
use crate::env::{observe_features, sample_initial_channels, step, ActionCommand};
use crate::replay::{ExperienceUnit, PrioritizedBuffer, SampledBatch};
use rand::Rng;
use rayon::prelude::*;
use std::time::Instant;

/// Everything a finished trial produced.
#[derive(Debug, Clone)]
pub struct TrialOutput {
    pub trial: usize,
    pub seed: u64,
    pub metrics: Vec<EpisodeMetrics>,
    pub summary: TrialSummary,
    /// Absent for the random baseline, which has no learnable state.
    pub checkpoint: Option<AgentCheckpoint>,
    /// Set when a non-finite training signal cut the trial short.
    pub aborted: bool,
}

#[derive(Debug, Clone)]
pub struct TrialsReport {
    pub outputs: Vec<TrialOutput>,
    pub aggregate: AggregateStats,
}

impl TrialsReport {
    pub fn all_metrics(&self) -> Vec<EpisodeMetrics> {
        self.outputs
            .iter()
            .flat_map(|o| o.metrics.iter().cloned())
            .collect()
    }

    pub fn summaries(&self) -> Vec<TrialSummary> {
        self.outputs.iter().map(|o| o.summary.clone()).collect()
    }
}

/// Across-trial statistics over the final-window means, computed over the
/// successful trials only (the unsuccessful count is reported alongside).
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateStats {
    pub agent: AgentKind,
    pub trials: usize,
    pub successful: usize,
    pub mean_over_successful: Option<f64>,
    pub std_over_successful: Option<f64>,
    pub mean_over_all: f64,
    /// True when only one trial succeeded, in which case the standard
    /// deviation is 0 by convention rather than an estimate.
    pub degenerate_std: bool,
}

impl std::fmt::Display for AggregateStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}: {}/{} successful",
            self.agent, self.successful, self.trials
        )?;
        match (self.mean_over_successful, self.std_over_successful) {
            (Some(m), Some(s)) => {
                write!(f, ", mean {m:.4}, std {s:.4e}")?;
                if self.degenerate_std {
                    write!(f, " (single trial; std is 0 by convention)")?;
                }
            }
            _ => write!(f, ", no successful trials")?,
        }
        write!(f, ", mean over all trials {:.4}", self.mean_over_all)
    }
}

enum Driver {
    Ddpg(Box<DdpgAgent>),
    Dqn(Box<DqnAgent>),
    Random { relay_count: usize, max_power: f64 },
}

impl Driver {
    fn new<R: Rng>(config: &ExperimentConfig, rng: &mut R) -> Result<Self, AgentError> {
        let feature_len = config.system.feature_len();
        match config.agent {
            AgentKind::PerDdpg | AgentKind::Ddpg => {
                let params = DdpgParams {
                    feature_len,
                    relay_count: config.system.relay_count,
                    max_power: config.system.max_power,
                    actor_hidden: config.arch.actor_hidden.clone(),
                    critic_hidden: config.arch.critic_hidden.clone(),
                    actor_learning_rate: config.optim.actor_learning_rate,
                    critic_learning_rate: config.optim.critic_learning_rate,
                    discount: config.optim.discount,
                    soft_update: config.optim.soft_update,
                    gradient_clip: config.optim.gradient_clip,
                };
                Ok(Driver::Ddpg(Box::new(DdpgAgent::new(&params, rng)?)))
            }
            AgentKind::Dqn => {
                let params = DqnParams {
                    feature_len,
                    relay_count: config.system.relay_count,
                    power_levels: config.dqn.power_levels,
                    max_power: config.system.max_power,
                    learning_rate: config.optim.critic_learning_rate,
                    discount: config.optim.discount,
                    soft_update: config.optim.soft_update,
                    gradient_clip: config.optim.gradient_clip,
                    q_hidden: config.arch.q_hidden.clone(),
                };
                Ok(Driver::Dqn(Box::new(DqnAgent::new(&params, rng)?)))
            }
            AgentKind::Random => Ok(Driver::Random {
                relay_count: config.system.relay_count,
                max_power: config.system.max_power,
            }),
        }
    }

    fn wants_replay(&self) -> bool {
        !matches!(self, Driver::Random { .. })
    }

    /// Applies the episode's exploration schedule; returns the value that goes
    /// into the metrics noise_scale column.
    fn set_schedule(&mut self, config: &ExperimentConfig, episode: usize) -> f64 {
        match self {
            Driver::Ddpg(agent) => {
                let scale = config.noise_scale_for_episode(episode);
                agent.set_noise_scale(scale);
                scale
            }
            Driver::Dqn(agent) => {
                let rate = config.exploration_for_episode(episode);
                agent.set_exploration_rate(rate);
                rate
            }
            Driver::Random { .. } => 0.0,
        }
    }

    fn act<R: Rng>(
        &self,
        features: &[f64],
        rng: &mut R,
    ) -> Result<(Vec<f64>, ActionCommand), AgentError> {
        match self {
            Driver::Ddpg(agent) => agent.act(features, true, rng),
            Driver::Dqn(agent) => {
                let (index, cmd) = agent.act(features, true, rng)?;
                Ok((vec![index as f64], cmd))
            }
            Driver::Random {
                relay_count,
                max_power,
            } => Ok((Vec::new(), random_act(*relay_count, *max_power, rng))),
        }
    }

    fn random_action<R: Rng>(&self, rng: &mut R) -> (Vec<f64>, ActionCommand) {
        match self {
            Driver::Ddpg(agent) => agent.random_raw(rng),
            Driver::Dqn(agent) => {
                let (index, cmd) = agent.random_index(rng);
                (vec![index as f64], cmd)
            }
            Driver::Random {
                relay_count,
                max_power,
            } => (Vec::new(), random_act(*relay_count, *max_power, rng)),
        }
    }

    fn train_step(&mut self, batch: &SampledBatch) -> Result<TrainStepReport, AgentError> {
        match self {
            Driver::Ddpg(agent) => agent.train_step(batch),
            Driver::Dqn(agent) => agent.train_step(batch),
            Driver::Random { .. } => unreachable!("random baseline never trains"),
        }
    }

    fn into_checkpoint(self, config: &ExperimentConfig, seed: u64) -> Option<AgentCheckpoint> {
        let snapshot = match self {
            Driver::Ddpg(agent) => AgentSnapshot::Ddpg(*agent),
            Driver::Dqn(agent) => AgentSnapshot::Dqn(*agent),
            Driver::Random { .. } => return None,
        };
        Some(AgentCheckpoint {
            kind: config.agent,
            seed,
            config_hash: config.hash(),
            system: config.system.clone(),
            snapshot,
        })
    }
}

/// Runs one trial: seeds four independent streams, executes the warmup and
/// training episodes slot by slot, and returns metrics, summary and the final
/// agent checkpoint. A non-finite training signal aborts the trial, which is
/// then flagged unsuccessful; the partial episode is discarded.
pub fn run_training(config: &ExperimentConfig, trial: usize) -> Result<TrialOutput, HarnessError> {
    config.validate()?;
    let seed = trial_seed(config.base_seed, trial);
    let mut env_rng = stream_rng(seed, StreamId::Env);
    let mut init_rng = stream_rng(seed, StreamId::AgentInit);
    let mut exploration_rng = stream_rng(seed, StreamId::Exploration);
    let mut replay_rng = stream_rng(seed, StreamId::Replay);

    let mut driver = Driver::new(config, &mut init_rng)?;
    let mut buffer = driver.wants_replay().then(|| {
        PrioritizedBuffer::new(
            config.replay.buffer_size,
            match config.agent {
                // Only the full method prioritizes; the ablation and the
                // value-based baseline replay uniformly.
                AgentKind::PerDdpg => config.replay.priority_exponent,
                _ => 0.0,
            },
            config.replay.is_exponent,
            config.replay.priority_floor,
        )
    });

    let mut metrics = Vec::with_capacity(config.episodes);
    let mut aborted = false;

    'episodes: for episode in 0..config.episodes {
        let started = Instant::now();
        let exploration = driver.set_schedule(config, episode);
        let warming = episode < config.warmup_episodes;
        let mut state = sample_initial_channels(&config.system, &mut env_rng);
        let mut features = observe_features(&state, &config.system);
        let mut successes = 0u32;
        let mut loss_sum = 0.0;
        let mut train_steps = 0u32;
        loop {
            let (raw, cmd) = if warming {
                driver.random_action(&mut exploration_rng)
            } else {
                driver.act(&features, &mut exploration_rng)?
            };
            let outcome = step(&state, &cmd, &config.system, &mut env_rng)?;
            let next_features = observe_features(&outcome.next_state, &config.system);
            successes += outcome.reward as u32;
            if let Some(buffer) = buffer.as_mut() {
                buffer.push(ExperienceUnit {
                    state_features: features.clone(),
                    action_raw: raw,
                    reward: outcome.reward,
                    next_state_features: next_features.clone(),
                });
                if !warming && buffer.len() >= config.replay.batch_size {
                    let batch = buffer.sample(config.replay.batch_size, &mut replay_rng)?;
                    match driver.train_step(&batch) {
                        Ok(report) => {
                            buffer.update_priorities(&batch.indices, &report.td_errors)?;
                            loss_sum += report.critic_loss;
                            train_steps += 1;
                        }
                        Err(AgentError::NonFiniteSignal) => {
                            aborted = true;
                            break;
                        }
                        Err(other) => return Err(other.into()),
                    }
                }
            }
            state = outcome.next_state;
            features = next_features;
            if outcome.done {
                break;
            }
        }
        if aborted {
            break 'episodes;
        }
        metrics.push(EpisodeMetrics {
            trial,
            episode,
            success_rate: successes as f64 / config.system.episode_length as f64,
            critic_loss: if train_steps > 0 {
                loss_sum / train_steps as f64
            } else {
                0.0
            },
            noise_scale: exploration,
            wall_ms: if config.record_timing {
                started.elapsed().as_millis() as u64
            } else {
                0
            },
        });
    }

    let summary = summarize_trial(trial, seed, &metrics, config.success_threshold, aborted);
    let checkpoint = driver.into_checkpoint(config, seed);
    Ok(TrialOutput {
        trial,
        seed,
        metrics,
        summary,
        checkpoint,
        aborted,
    })
}

/// Runs `config.trials` independent trials under seeds `base_seed + i`.
/// Trials may execute concurrently; every trial owns its streams, so the
/// report does not depend on scheduling.
pub fn run_trials(config: &ExperimentConfig) -> Result<TrialsReport, HarnessError> {
    config.validate()?;
    let outputs: Result<Vec<TrialOutput>, HarnessError> = (0..config.trials)
        .into_par_iter()
        .map(|i| run_training(config, i))
        .collect();
    let outputs = outputs?;
    let aggregate = aggregate_stats(config.agent, &outputs);
    Ok(TrialsReport { outputs, aggregate })
}

pub fn aggregate_stats(agent: AgentKind, outputs: &[TrialOutput]) -> AggregateStats {
    let successful: Vec<f64> = outputs
        .iter()
        .filter(|o| o.summary.successful)
        .map(|o| o.summary.last40_mean)
        .collect();
    let all: Vec<f64> = outputs.iter().map(|o| o.summary.last40_mean).collect();
    AggregateStats {
        agent,
        trials: outputs.len(),
        successful: successful.len(),
        mean_over_successful: (!successful.is_empty()).then(|| mean(&successful)),
        std_over_successful: (!successful.is_empty()).then(|| sample_std(&successful)),
        mean_over_all: mean(&all),
        degenerate_std: successful.len() == 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::AgentKind;

    fn tiny_config(agent: AgentKind) -> ExperimentConfig {
        let mut config = ExperimentConfig::default();
        config.agent = agent;
        config.episodes = 4;
        config.warmup_episodes = 2;
        config.trials = 2;
        config.system.episode_length = 15;
        config.replay.buffer_size = 256;
        config.replay.batch_size = 8;
        config.arch.actor_hidden = vec![8];
        config.arch.critic_hidden = vec![8];
        config.arch.q_hidden = vec![8];
        config
    }

    #[test]
    fn random_baseline_never_trains_and_reports_zero_loss() {
        let config = tiny_config(AgentKind::Random);
        let out = run_training(&config, 0).unwrap();
        assert_eq!(out.metrics.len(), 4);
        assert!(out.metrics.iter().all(|m| m.critic_loss == 0.0));
        assert!(out.metrics.iter().all(|m| m.noise_scale == 0.0));
        assert!(out.checkpoint.is_none());
        assert!(!out.aborted);
        for m in &out.metrics {
            assert!((0.0..=1.0).contains(&m.success_rate));
        }
    }

    #[test]
    fn warmup_episodes_do_not_touch_the_networks() {
        let mut config = tiny_config(AgentKind::PerDdpg);
        // All episodes are warmup except the minimum one; make the batch too
        // large to ever be satisfied so no training can occur.
        config.warmup_episodes = 3;
        config.replay.batch_size = 256;
        config.replay.buffer_size = 256;
        let out = run_training(&config, 0).unwrap();
        assert!(out.metrics.iter().all(|m| m.critic_loss == 0.0));
        // The checkpoint must hold a bit-exact copy of the freshly
        // initialized agent: reconstruct it from the same init stream.
        let seed = super::trial_seed(config.base_seed, 0);
        let mut init_rng = stream_rng(seed, StreamId::AgentInit);
        let fresh = Driver::new(&config, &mut init_rng).unwrap();
        let fresh_ckpt = fresh.into_checkpoint(&config, seed).unwrap();
        let got = out.checkpoint.unwrap();
        // Networks and optimizer state untouched; only the exploration scale
        // followed its schedule.
        match (&got.snapshot, &fresh_ckpt.snapshot) {
            (AgentSnapshot::Ddpg(a), AgentSnapshot::Ddpg(b)) => {
                assert_eq!(a.actor(), b.actor());
                assert_eq!(a.actor_target(), b.actor_target());
                assert_eq!(a.critic(), b.critic());
                assert_eq!(a.critic_target(), b.critic_target());
            }
            _ => panic!("expected matching policy-gradient snapshots"),
        }
    }

    #[test]
    fn training_runs_are_bit_reproducible() {
        for agent in [AgentKind::PerDdpg, AgentKind::Dqn, AgentKind::Random] {
            let config = tiny_config(agent);
            let a = run_training(&config, 1).unwrap();
            let b = run_training(&config, 1).unwrap();
            assert_eq!(a.metrics, b.metrics, "{agent} metrics diverged");
            assert_eq!(a.summary, b.summary);
            match (a.checkpoint, b.checkpoint) {
                (Some(ca), Some(cb)) => assert_eq!(ca, cb),
                (None, None) => {}
                _ => panic!("checkpoint presence diverged"),
            }
        }
    }

    #[test]
    fn trials_report_covers_every_trial_in_order() {
        let config = tiny_config(AgentKind::Ddpg);
        let report = run_trials(&config).unwrap();
        assert_eq!(report.outputs.len(), 2);
        assert_eq!(report.outputs[0].trial, 0);
        assert_eq!(report.outputs[1].trial, 1);
        assert_eq!(report.outputs[0].seed, config.base_seed);
        assert_eq!(report.outputs[1].seed, config.base_seed + 1);
        assert_eq!(report.aggregate.trials, 2);
    }

    #[test]
    fn trials_are_isolated_from_execution_order() {
        let config = tiny_config(AgentKind::PerDdpg);
        let report = run_trials(&config).unwrap();
        // Running the trials individually, in reverse, gives the same
        // summaries: nothing leaks between trials.
        for trial in (0..config.trials).rev() {
            let solo = run_training(&config, trial).unwrap();
            assert_eq!(solo.summary, report.outputs[trial].summary);
            assert_eq!(solo.metrics, report.outputs[trial].metrics);
        }
    }

    #[test]
    fn aggregate_handles_zero_and_single_success() {
        let config = tiny_config(AgentKind::Random);
        let mut outputs = Vec::new();
        for trial in 0..2 {
            let mut out = run_training(&config, trial).unwrap();
            out.summary.successful = false;
            outputs.push(out);
        }
        let agg = aggregate_stats(AgentKind::Random, &outputs);
        assert_eq!(agg.successful, 0);
        assert_eq!(agg.mean_over_successful, None);
        assert_eq!(agg.std_over_successful, None);

        outputs[0].summary.successful = true;
        let agg = aggregate_stats(AgentKind::Random, &outputs);
        assert_eq!(agg.successful, 1);
        assert_eq!(agg.std_over_successful, Some(0.0));
        assert!(agg.degenerate_std);
    }
}
