//! Experiment orchestration: configuration, seed streams, the training loop,
//! multi-trial statistics, threshold-sweep evaluation and file outputs.

mod config;
mod eval;
mod metrics;
mod seeds;
mod train;

pub use config::{
    fnv1a64, load_config, save_config, ArchConfig, ConfigIoError, ConfigValidationError,
    DqnSettings, ExperimentConfig, NoiseConfig, OptimConfig, ReplayConfig,
};
pub use eval::{run_evaluation, write_eval_csv, EvalOutcome, EvalRecord, SkippedCheckpoint, EVAL_HEADER};
pub use metrics::{
    emit_csv, emit_summary_csv, mean, sample_std, summarize_trial, CsvError, EpisodeMetrics,
    TrialSummary, METRICS_HEADER, SUMMARY_HEADER, SUMMARY_WINDOW,
};
pub use seeds::{mix, rng_from, splitmix64, stream_rng, trial_seed, StreamId};
pub use train::{
    aggregate_stats, run_training, run_trials, AggregateStats, TrialOutput, TrialsReport,
};

use crate::agents::checkpoint::AgentCheckpointError;
use crate::agents::AgentError;
use crate::env::EnvError;
use crate::replay::ReplayError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Config(#[from] ConfigValidationError),
    #[error(transparent)]
    ConfigIo(#[from] ConfigIoError),
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error(transparent)]
    Checkpoint(#[from] AgentCheckpointError),
    #[error("none of the {0} supplied checkpoints could be read")]
    NoUsableCheckpoints(usize),
    #[error("evaluation needs at least one episode and one threshold")]
    EmptyEvaluation,
}
