//! Per-episode records, per-trial summaries and their CSV formats.

use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
#[error("{path}: {source}")]
pub struct CsvError {
    pub path: String,
    #[source]
    pub source: std::io::Error,
}

/// One row of the training metrics file. For the value-based baseline the
/// `noise_scale` column carries the epsilon-greedy rate; for the random
/// baseline it is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeMetrics {
    pub trial: usize,
    pub episode: usize,
    pub success_rate: f64,
    pub critic_loss: f64,
    pub noise_scale: f64,
    pub wall_ms: u64,
}

/// Statistics of a finished trial over the final summary window
/// (the last 40 episodes, or every episode of a shorter run).
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    pub trial: usize,
    pub seed: u64,
    pub successful: bool,
    pub last40_mean: f64,
    pub last40_std: f64,
}

pub const SUMMARY_WINDOW: usize = 40;

pub const METRICS_HEADER: &str = "trial,episode,success_rate,critic_loss,noise_scale,wall_ms";
pub const SUMMARY_HEADER: &str = "trial,seed,successful,last40_mean,last40_std";

/// Writes the metrics CSV: fixed header, decimal dot, one newline-terminated
/// row per record. An empty record list produces a header-only file.
pub fn emit_csv(records: &[EpisodeMetrics], path: &Path) -> Result<(), CsvError> {
    let wrap = |source| CsvError {
        path: path.display().to_string(),
        source,
    };
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(wrap)?);
    (|| {
        writeln!(out, "{METRICS_HEADER}")?;
        for r in records {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.trial, r.episode, r.success_rate, r.critic_loss, r.noise_scale, r.wall_ms
            )?;
        }
        out.flush()
    })()
    .map_err(wrap)
}

pub fn emit_summary_csv(summaries: &[TrialSummary], path: &Path) -> Result<(), CsvError> {
    let wrap = |source| CsvError {
        path: path.display().to_string(),
        source,
    };
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(wrap)?);
    (|| {
        writeln!(out, "{SUMMARY_HEADER}")?;
        for s in summaries {
            writeln!(
                out,
                "{},{},{},{},{}",
                s.trial, s.seed, s.successful, s.last40_mean, s.last40_std
            )?;
        }
        out.flush()
    })()
    .map_err(wrap)
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation; 0 by convention for fewer than two values.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Summarizes a trial over the final [`SUMMARY_WINDOW`] episodes.
pub fn summarize_trial(
    trial: usize,
    seed: u64,
    metrics: &[EpisodeMetrics],
    success_threshold: f64,
    aborted: bool,
) -> TrialSummary {
    let window = metrics.len().min(SUMMARY_WINDOW);
    let tail: Vec<f64> = metrics[metrics.len() - window..]
        .iter()
        .map(|m| m.success_rate)
        .collect();
    let last40_mean = mean(&tail);
    TrialSummary {
        trial,
        seed,
        successful: !aborted && window > 0 && last40_mean >= success_threshold,
        last40_mean,
        last40_std: sample_std(&tail),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(trial: usize, episode: usize, rate: f64) -> EpisodeMetrics {
        EpisodeMetrics {
            trial,
            episode,
            success_rate: rate,
            critic_loss: 0.125,
            noise_scale: 0.3,
            wall_ms: 0,
        }
    }

    #[test]
    fn empty_records_produce_header_only_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        emit_csv(&[], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, format!("{METRICS_HEADER}\n"));
    }

    #[test]
    fn rows_are_newline_terminated_with_decimal_dot() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        emit_csv(&[record(0, 1, 0.995)], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            format!("{METRICS_HEADER}\n0,1,0.995,0.125,0.3,0\n")
        );
    }

    #[test]
    fn summary_window_covers_exactly_the_tail() {
        let metrics: Vec<EpisodeMetrics> = (0..100)
            .map(|e| record(0, e, if e >= 60 { 1.0 } else { 0.0 }))
            .collect();
        let summary = summarize_trial(0, 9, &metrics, 0.9, false);
        assert_eq!(summary.last40_mean, 1.0);
        assert_eq!(summary.last40_std, 0.0);
        assert!(summary.successful);

        // One failing episode inside the window drags the mean below 1.
        let mut metrics = metrics;
        metrics[99] = record(0, 99, 0.0);
        let summary = summarize_trial(0, 9, &metrics, 0.9, false);
        assert!((summary.last40_mean - 39.0 / 40.0).abs() < 1e-12);
    }

    #[test]
    fn aborted_trials_are_never_successful() {
        let metrics: Vec<EpisodeMetrics> = (0..50).map(|e| record(0, e, 1.0)).collect();
        let summary = summarize_trial(0, 9, &metrics, 0.9, true);
        assert!(!summary.successful);
    }

    #[test]
    fn std_convention_for_degenerate_samples() {
        assert_eq!(sample_std(&[]), 0.0);
        assert_eq!(sample_std(&[0.5]), 0.0);
        assert!((sample_std(&[1.0, 3.0]) - (2.0f64).sqrt()).abs() < 1e-12);
    }
}
