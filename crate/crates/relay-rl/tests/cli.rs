//! End-to-end smoke tests of the command-line interface.

use relay_rl::agents::AgentKind;
use relay_rl::harness::{save_config, ExperimentConfig};
use std::path::Path;
use std::process::Command;

fn exe() -> &'static str {
    env!("CARGO_BIN_EXE_relay-rl")
}

fn quick_config() -> ExperimentConfig {
    let mut config = ExperimentConfig::default();
    config.agent = AgentKind::PerDdpg;
    config.episodes = 6;
    config.warmup_episodes = 1;
    config.trials = 1;
    config.system.episode_length = 12;
    config.replay.buffer_size = 128;
    config.replay.batch_size = 8;
    config.arch.actor_hidden = vec![8];
    config.arch.critic_hidden = vec![8];
    config.arch.q_hidden = vec![8];
    config
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("config.toml");
    save_config(&quick_config(), &path).unwrap();
    path
}

#[test]
fn train_then_eval_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out = dir.path().join("run");

    let status = Command::new(exe())
        .args(["train", "--config"])
        .arg(&config)
        .args(["--seed", "3", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());

    let metrics = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("trial,episode,success_rate,critic_loss,noise_scale,wall_ms\n"));
    assert_eq!(metrics.lines().count(), 1 + 6);

    let checkpoint = out.join("trial_3.ckpt");
    assert!(checkpoint.exists());

    let output = Command::new(exe())
        .args(["eval", "--checkpoints"])
        .arg(&checkpoint)
        .args(["--thresholds", "0.1,0.5", "--episodes", "2", "--seed", "5"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("method,lambda,success_rate"), "{stdout}");
    assert!(stdout.contains("per_ddpg,0.1,"), "{stdout}");
    assert!(stdout.contains("random,0.5,"), "{stdout}");
}

#[test]
fn missing_config_file_exits_nonzero_with_diagnostic() {
    let output = Command::new(exe())
        .args(["train", "--config", "/nonexistent/config.toml"])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("/nonexistent/config.toml"), "{stderr}");
}

#[test]
fn eval_without_readable_checkpoints_exits_nonzero() {
    let output = Command::new(exe())
        .args(["eval", "--checkpoints", "/nonexistent.ckpt"])
        .output()
        .unwrap();
    assert!(!output.status.success());
}

#[test]
fn selftest_passes_and_prints_verdicts() {
    let output = Command::new(exe()).arg("selftest").output().unwrap();
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(output.status.success(), "{stdout}");
    assert_eq!(stdout.matches("PASS").count(), 3, "{stdout}");
}
