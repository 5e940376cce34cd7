use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use relay_rl::agents::save_checkpoint;
use relay_rl::harness::{
    emit_csv, emit_summary_csv, load_config, run_evaluation, run_training, run_trials,
    write_eval_csv, ExperimentConfig,
};
use relay_rl::selfcheck;
use std::path::PathBuf;
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "relay-rl",
    about = "Reinforcement-learned relay selection and power allocation for two-hop AF relay networks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a single trial and write metrics plus a checkpoint.
    Train {
        /// Experiment config (TOML); defaults match the built-in experiment.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Seed for this trial (overrides the config's base_seed).
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (overrides the config's output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run seeded trials, aggregate their statistics, and keep the
    /// checkpoints of every successful trial.
    Trials {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Number of trials (overrides the config).
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate frozen checkpoints across outage thresholds with common
    /// random numbers.
    Eval {
        /// Checkpoint files produced by `train` or `trials`.
        #[arg(long, required = true, num_args = 1..)]
        checkpoints: Vec<PathBuf>,
        /// Comma-separated outage thresholds (bits/s/Hz).
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.05, 0.1, 0.2, 0.3, 0.5])]
        thresholds: Vec<f64>,
        /// Evaluation episodes per checkpoint and threshold.
        #[arg(long, default_value_t = 20)]
        episodes: usize,
        /// Seed of the shared evaluation episode set.
        #[arg(long, default_value_t = 12345)]
        seed: u64,
        /// Write the per-threshold success table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Skip the random baseline row.
        #[arg(long)]
        without_random: bool,
    },
    /// Run the built-in gradient, sum-tree and stationarity suites.
    Selftest,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train { config, seed, out } => train(config, seed, out),
        Command::Trials {
            config,
            trials,
            out,
        } => trials_cmd(config, trials, out),
        Command::Eval {
            checkpoints,
            thresholds,
            episodes,
            seed,
            out,
            without_random,
        } => eval_cmd(checkpoints, thresholds, episodes, seed, out, !without_random),
        Command::Selftest => selftest(),
    }
}

fn resolve_config(path: Option<PathBuf>) -> Result<ExperimentConfig> {
    match path {
        Some(path) => Ok(load_config(&path)?),
        None => Ok(ExperimentConfig::default()),
    }
}

fn train(config: Option<PathBuf>, seed: Option<u64>, out: Option<PathBuf>) -> Result<()> {
    let mut config = resolve_config(config)?;
    if let Some(seed) = seed {
        config.base_seed = seed;
    }
    if let Some(out) = out {
        config.output_dir = out;
    }
    std::fs::create_dir_all(&config.output_dir)
        .with_context(|| format!("creating {}", config.output_dir.display()))?;
    let started = Instant::now();
    let output = run_training(&config, 0)?;
    let metrics_path = config.output_dir.join("metrics.csv");
    emit_csv(&output.metrics, &metrics_path)?;
    if let Some(checkpoint) = &output.checkpoint {
        let path = config.output_dir.join(format!("trial_{}.ckpt", output.seed));
        save_checkpoint(&path, checkpoint)?;
        println!("checkpoint: {}", path.display());
    }
    let s = &output.summary;
    println!(
        "trial {} (seed {}): last40 mean {:.4}, std {:.4e}, successful {}{}",
        s.trial,
        s.seed,
        s.last40_mean,
        s.last40_std,
        s.successful,
        if output.aborted { " (aborted)" } else { "" }
    );
    println!("metrics: {}", metrics_path.display());
    eprintln!("elapsed: {:.1}s", started.elapsed().as_secs_f64());
    Ok(())
}

fn trials_cmd(config: Option<PathBuf>, trials: Option<usize>, out: Option<PathBuf>) -> Result<()> {
    let mut config = resolve_config(config)?;
    if let Some(trials) = trials {
        config.trials = trials;
    }
    if let Some(out) = out {
        config.output_dir = out;
    }
    std::fs::create_dir_all(&config.output_dir)
        .with_context(|| format!("creating {}", config.output_dir.display()))?;
    let started = Instant::now();
    let report = run_trials(&config)?;
    let metrics_path = config.output_dir.join("metrics.csv");
    let summary_path = config.output_dir.join("summary.csv");
    emit_csv(&report.all_metrics(), &metrics_path)?;
    emit_summary_csv(&report.summaries(), &summary_path)?;
    let ckpt_dir = config.output_dir.join("checkpoints");
    let mut kept = 0usize;
    for output in &report.outputs {
        if !output.summary.successful {
            continue;
        }
        if let Some(checkpoint) = &output.checkpoint {
            let path = ckpt_dir.join(format!("trial_{}.ckpt", output.trial));
            save_checkpoint(&path, checkpoint)?;
            kept += 1;
        }
    }
    for output in &report.outputs {
        let s = &output.summary;
        println!(
            "trial {} (seed {}): last40 mean {:.4}, std {:.4e}, successful {}{}",
            s.trial,
            s.seed,
            s.last40_mean,
            s.last40_std,
            s.successful,
            if output.aborted { " (aborted)" } else { "" }
        );
    }
    println!("{}", report.aggregate);
    println!("metrics: {}", metrics_path.display());
    println!("summary: {}", summary_path.display());
    if kept > 0 {
        println!("checkpoints: {} ({} kept)", ckpt_dir.display(), kept);
    }
    eprintln!("elapsed: {:.1}s", started.elapsed().as_secs_f64());
    Ok(())
}

fn eval_cmd(
    checkpoints: Vec<PathBuf>,
    thresholds: Vec<f64>,
    episodes: usize,
    seed: u64,
    out: Option<PathBuf>,
    include_random: bool,
) -> Result<()> {
    let outcome = run_evaluation(&checkpoints, &thresholds, episodes, seed, include_random)?;
    for skipped in &outcome.skipped {
        eprintln!(
            "warning: skipped {}: {}",
            skipped.path.display(),
            skipped.reason
        );
    }
    match out {
        Some(path) => {
            write_eval_csv(&outcome.records, &path)
                .with_context(|| format!("writing {}", path.display()))?;
            println!("evaluation table: {}", path.display());
        }
        None => {
            println!("{}", relay_rl::harness::EVAL_HEADER);
            for r in &outcome.records {
                println!("{},{},{}", r.agent, r.lambda, r.success_rate);
            }
        }
    }
    Ok(())
}

fn selftest() -> Result<()> {
    let mut failed = false;
    let mut verdict = |name: &str, pass: bool, detail: String| {
        println!("{}: {name} ({detail})", if pass { "PASS" } else { "FAIL" });
        failed |= !pass;
    };

    let grad = selfcheck::gradient_check_suite(2024);
    verdict(
        "gradient check vs central finite differences",
        grad.configurations >= 20 && grad.max_relative_error <= 1e-4,
        format!(
            "{} configurations, max relative error {:.3e}",
            grad.configurations, grad.max_relative_error
        ),
    );

    let tree = selfcheck::sum_tree_check(2024, 1_000_000, 100_000);
    verdict(
        "sum-tree sampling law and node-sum invariant",
        tree.max_frequency_error < 0.01
            && tree.chi_square < tree.chi_square_critical
            && tree.root_deviation < 1e-9,
        format!(
            "{} draws, max frequency error {:.4}, chi^2 {:.2} (crit {:.2}), root deviation {:.2e}",
            tree.draws,
            tree.max_frequency_error,
            tree.chi_square,
            tree.chi_square_critical,
            tree.root_deviation
        ),
    );

    let stationarity = selfcheck::stationarity_check(2024, 100_000, &[0.0, 0.5, 0.95, 1.0]);
    let mut worst = 0.0f64;
    for (rho, dev) in &stationarity.per_rho {
        if *rho < 1.0 {
            worst = worst.max(*dev);
        }
    }
    verdict(
        "channel stationarity under evolution",
        worst <= 0.02 && stationarity.identity_exact,
        format!(
            "max pooled variance deviation {:.3}% (rho < 1), rho = 1 bit-exact: {}",
            worst * 100.0,
            stationarity.identity_exact
        ),
    );

    if failed {
        bail!("selftest failed");
    }
    Ok(())
}
