//! Two-hop amplify-and-forward relay network: Gauss-Markov channel evolution,
//! end-to-end SNR, mutual information, outage indicator and the MDP step.
//!
//! Beamforming and the amplification factor are folded into the closed-form
//! SNR, so a channel only ever enters the math through its squared norm.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("relay index {got} out of range 1..={max}")]
    InvalidRelayIndex { got: usize, max: usize },
    #[error("source power {got} outside [0, {max}]")]
    InvalidSourcePower { got: f64, max: f64 },
}

#[derive(Debug, Error, PartialEq)]
#[error("invalid config: {field} {reason}")]
pub struct ConfigError {
    pub field: &'static str,
    pub reason: String,
}

fn bad(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError {
        field,
        reason: reason.into(),
    }
}

/// What the agent observes: per-relay squared-norm gains (the sufficient
/// statistic for the reward), or the raw complex vectors flattened.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ObservationMode {
    #[default]
    Gains,
    RawVectors,
}

impl ObservationMode {
    pub fn name(self) -> &'static str {
        match self {
            ObservationMode::Gains => "gains",
            ObservationMode::RawVectors => "raw_vectors",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "gains" => Some(ObservationMode::Gains),
            "raw_vectors" => Some(ObservationMode::RawVectors),
            _ => None,
        }
    }
}

/// Physical and episode parameters of the relay network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Number of candidate relays K.
    pub relay_count: usize,
    /// Antennas at the source (first-hop vector length).
    pub source_antennas: usize,
    /// Antennas at the destination (second-hop vector length).
    pub dest_antennas: usize,
    /// Per-coefficient variance of source-to-relay channels.
    pub channel_variance_first_hop: f64,
    /// Per-coefficient variance of relay-to-destination channels.
    pub channel_variance_second_hop: f64,
    /// Noise variance at relay and destination.
    pub noise_variance: f64,
    /// AR(1) correlation of consecutive slots, in [0, 1].
    pub correlation: f64,
    /// Total power budget shared by source and relay, watts.
    pub max_power: f64,
    /// Outage threshold on mutual information, bits/s/Hz.
    pub outage_threshold: f64,
    /// Slots per episode.
    pub episode_length: usize,
    #[serde(default)]
    pub observation: ObservationMode,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            relay_count: 4,
            source_antennas: 2,
            dest_antennas: 2,
            channel_variance_first_hop: 1.0,
            channel_variance_second_hop: 1.0,
            noise_variance: 0.5,
            correlation: 0.95,
            max_power: 1.0,
            outage_threshold: 0.1,
            episode_length: 200,
            observation: ObservationMode::Gains,
        }
    }
}

impl SystemConfig {
    /// Channel variances may be zero (degenerate but well-defined); the noise
    /// variance may not, since it divides the SNR.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.relay_count < 1 {
            return Err(bad("relay_count", "must be at least 1"));
        }
        if self.source_antennas < 1 {
            return Err(bad("source_antennas", "must be at least 1"));
        }
        if self.dest_antennas < 1 {
            return Err(bad("dest_antennas", "must be at least 1"));
        }
        for (field, v) in [
            ("channel_variance_first_hop", self.channel_variance_first_hop),
            (
                "channel_variance_second_hop",
                self.channel_variance_second_hop,
            ),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(bad(field, format!("must be finite and >= 0, got {v}")));
            }
        }
        if !self.noise_variance.is_finite() || self.noise_variance <= 0.0 {
            return Err(bad(
                "noise_variance",
                format!("must be finite and > 0, got {}", self.noise_variance),
            ));
        }
        if !self.correlation.is_finite() || !(0.0..=1.0).contains(&self.correlation) {
            return Err(bad(
                "correlation",
                format!("must lie in [0, 1], got {}", self.correlation),
            ));
        }
        if !self.max_power.is_finite() || self.max_power <= 0.0 {
            return Err(bad(
                "max_power",
                format!("must be finite and > 0, got {}", self.max_power),
            ));
        }
        if !self.outage_threshold.is_finite() || self.outage_threshold <= 0.0 {
            return Err(bad(
                "outage_threshold",
                format!("must be finite and > 0, got {}", self.outage_threshold),
            ));
        }
        if self.episode_length < 1 {
            return Err(bad("episode_length", "must be at least 1"));
        }
        Ok(())
    }

    /// Length of the feature vector produced by [`observe_features`].
    pub fn feature_len(&self) -> usize {
        match self.observation {
            ObservationMode::Gains => 2 * self.relay_count,
            ObservationMode::RawVectors => {
                2 * self.relay_count * (self.source_antennas + self.dest_antennas)
            }
        }
    }
}

/// Fading coefficients of one hop towards or from a single relay.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelVector {
    pub coefficients: Vec<Complex64>,
}

impl ChannelVector {
    pub fn gain(&self) -> f64 {
        channel_gain(self)
    }
}

/// Previous-slot channels of all relays: the information the agent acts on.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub first_hop: Vec<ChannelVector>,
    pub second_hop: Vec<ChannelVector>,
    pub slot_index: usize,
}

/// Joint action: which relay forwards, and how much power the source spends.
/// The relay transmits with the remaining budget `max_power - source_power`,
/// so the sum constraint holds by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionCommand {
    /// 1-based relay index in `1..=K`.
    pub relay_index: usize,
    /// Source transmission power in `[0, max_power]`.
    pub source_power: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// 1 on successful communication, 0 on outage.
    pub reward: u8,
    pub next_state: EnvState,
    /// Diagnostic: mutual information achieved this slot.
    pub mutual_information: f64,
    /// Diagnostic: end-to-end SNR this slot.
    pub snr: f64,
    pub done: bool,
}

fn draw_complex<R: Rng>(rng: &mut R, variance: f64) -> Complex64 {
    // Circularly symmetric: variance split evenly across real and imaginary.
    let scale = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(scale * re, scale * im)
}

fn draw_vector<R: Rng>(rng: &mut R, len: usize, variance: f64) -> ChannelVector {
    ChannelVector {
        coefficients: (0..len).map(|_| draw_complex(rng, variance)).collect(),
    }
}

/// Draws every channel coefficient from its stationary distribution and
/// starts the slot counter at zero.
pub fn sample_initial_channels<R: Rng>(config: &SystemConfig, rng: &mut R) -> EnvState {
    let first_hop = (0..config.relay_count)
        .map(|_| draw_vector(rng, config.source_antennas, config.channel_variance_first_hop))
        .collect();
    let second_hop = (0..config.relay_count)
        .map(|_| draw_vector(rng, config.dest_antennas, config.channel_variance_second_hop))
        .collect();
    EnvState {
        first_hop,
        second_hop,
        slot_index: 0,
    }
}

/// One slot of Gauss-Markov evolution:
/// `h(t) = rho * h(t-1) + sqrt(1 - rho^2) * e(t)` with `e ~ CN(0, sigma^2)`.
///
/// The innovation is drawn even when `rho = 1` so the random stream advances
/// identically for every correlation setting; multiplying by zero keeps the
/// coefficients bit-equal to the input in that case.
pub fn evolve_channels<R: Rng>(state: &EnvState, config: &SystemConfig, rng: &mut R) -> EnvState {
    let rho = config.correlation;
    let innovation_scale = (1.0 - rho * rho).sqrt();
    let evolve_hop = |vectors: &[ChannelVector], variance: f64, rng: &mut R| {
        vectors
            .iter()
            .map(|v| ChannelVector {
                coefficients: v
                    .coefficients
                    .iter()
                    .map(|&h| {
                        let e = draw_complex(rng, variance);
                        rho * h + innovation_scale * e
                    })
                    .collect(),
            })
            .collect()
    };
    EnvState {
        first_hop: evolve_hop(&state.first_hop, config.channel_variance_first_hop, rng),
        second_hop: evolve_hop(&state.second_hop, config.channel_variance_second_hop, rng),
        slot_index: state.slot_index + 1,
    }
}

/// Squared Euclidean norm: the effective post-beamforming channel gain.
pub fn channel_gain(v: &ChannelVector) -> f64 {
    v.coefficients.iter().map(|c| c.norm_sqr()).sum()
}

/// Composite SNR of the amplify-and-forward link:
/// `phi_sk * phi_kd / (phi_sk + phi_kd + 1)` with `phi = P * g / sigma_n^2`.
pub fn end_to_end_snr(
    source_power: f64,
    relay_power: f64,
    gain_first_hop: f64,
    gain_second_hop: f64,
    noise_variance: f64,
) -> f64 {
    let phi_sk = source_power * gain_first_hop / noise_variance;
    let phi_kd = relay_power * gain_second_hop / noise_variance;
    phi_sk * phi_kd / (phi_sk + phi_kd + 1.0)
}

/// Mutual information over two slots of unit bandwidth: `0.5 * log2(1 + snr)`.
pub fn mutual_information(snr: f64) -> f64 {
    0.5 * (1.0 + snr).log2()
}

/// 1 iff the mutual information falls strictly below the threshold.
pub fn outage_indicator(mi: f64, threshold: f64) -> u8 {
    u8::from(mi < threshold)
}

/// Advances the channels one slot, scores the chosen relay and power split on
/// the new slot's channels, and returns those channels as the next state. The
/// agent therefore always acts on one-slot-old information.
pub fn step<R: Rng>(
    state: &EnvState,
    action: &ActionCommand,
    config: &SystemConfig,
    rng: &mut R,
) -> Result<StepOutcome, EnvError> {
    if action.relay_index < 1 || action.relay_index > config.relay_count {
        return Err(EnvError::InvalidRelayIndex {
            got: action.relay_index,
            max: config.relay_count,
        });
    }
    if !(0.0..=config.max_power).contains(&action.source_power) {
        return Err(EnvError::InvalidSourcePower {
            got: action.source_power,
            max: config.max_power,
        });
    }
    let current = evolve_channels(state, config, rng);
    let k = action.relay_index - 1;
    let relay_power = config.max_power - action.source_power;
    let snr = end_to_end_snr(
        action.source_power,
        relay_power,
        channel_gain(&current.first_hop[k]),
        channel_gain(&current.second_hop[k]),
        config.noise_variance,
    );
    let mi = mutual_information(snr);
    let reward = 1 - outage_indicator(mi, config.outage_threshold);
    let done = current.slot_index >= config.episode_length;
    Ok(StepOutcome {
        reward,
        next_state: current,
        mutual_information: mi,
        snr,
        done,
    })
}

/// Per-relay squared-norm gains, first hop then second hop (length `2K`).
pub fn observe(state: &EnvState) -> Vec<f64> {
    state
        .first_hop
        .iter()
        .chain(&state.second_hop)
        .map(channel_gain)
        .collect()
}

/// Raw coefficients flattened as `(re, im)` pairs, first hop then second hop.
pub fn observe_raw(state: &EnvState) -> Vec<f64> {
    state
        .first_hop
        .iter()
        .chain(&state.second_hop)
        .flat_map(|v| v.coefficients.iter().flat_map(|c| [c.re, c.im]))
        .collect()
}

/// Observation dispatch for the configured mode.
pub fn observe_features(state: &EnvState, config: &SystemConfig) -> Vec<f64> {
    match config.observation {
        ObservationMode::Gains => observe(state),
        ObservationMode::RawVectors => observe_raw(state),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn config() -> SystemConfig {
        SystemConfig::default()
    }

    #[test]
    fn default_config_is_valid() {
        config().validate().unwrap();
    }

    #[test]
    fn zero_variance_draws_exact_zeros() {
        let cfg = SystemConfig {
            channel_variance_first_hop: 0.0,
            ..config()
        };
        let state = sample_initial_channels(&cfg, &mut rng(1));
        for v in &state.first_hop {
            for c in &v.coefficients {
                assert_eq!(*c, num_complex::Complex64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn initial_state_shape_follows_config() {
        let cfg = SystemConfig {
            relay_count: 4,
            source_antennas: 2,
            dest_antennas: 3,
            ..config()
        };
        let state = sample_initial_channels(&cfg, &mut rng(2));
        assert_eq!(state.first_hop.len(), 4);
        assert_eq!(state.second_hop.len(), 4);
        assert!(state.first_hop.iter().all(|v| v.coefficients.len() == 2));
        assert!(state.second_hop.iter().all(|v| v.coefficients.len() == 3));
        assert_eq!(state.slot_index, 0);
    }

    #[test]
    fn initial_draw_splits_variance_across_parts() {
        // 1e5 scalar draws via many small states; real parts should have
        // variance sigma^2 / 2 within 2%.
        let cfg = SystemConfig {
            relay_count: 50,
            source_antennas: 10,
            channel_variance_first_hop: 1.0,
            ..config()
        };
        let mut r = rng(3);
        let mut sum_sq = 0.0;
        let mut n = 0usize;
        for _ in 0..100 {
            let state = sample_initial_channels(&cfg, &mut r);
            for v in &state.first_hop {
                for c in &v.coefficients {
                    sum_sq += c.re * c.re;
                    n += 1;
                }
            }
        }
        assert_eq!(n, 50_000);
        let var = sum_sq / n as f64;
        assert!((var - 0.5).abs() / 0.5 < 0.02, "sample variance {var}");
    }

    #[test]
    fn evolution_with_full_correlation_is_identity_on_coefficients() {
        let cfg = SystemConfig {
            correlation: 1.0,
            ..config()
        };
        let state = sample_initial_channels(&cfg, &mut rng(4));
        let next = evolve_channels(&state, &cfg, &mut rng(5));
        assert_eq!(next.first_hop, state.first_hop);
        assert_eq!(next.second_hop, state.second_hop);
        assert_eq!(next.slot_index, state.slot_index + 1);
    }

    #[test]
    fn evolution_with_zero_correlation_forgets_the_past() {
        let cfg = SystemConfig {
            correlation: 0.0,
            relay_count: 200,
            ..config()
        };
        let state = sample_initial_channels(&cfg, &mut rng(6));
        let next = evolve_channels(&state, &cfg, &mut rng(7));
        // Sample correlation between old and new real parts should be tiny.
        let olds: Vec<f64> = state
            .first_hop
            .iter()
            .flat_map(|v| v.coefficients.iter().map(|c| c.re))
            .collect();
        let news: Vec<f64> = next
            .first_hop
            .iter()
            .flat_map(|v| v.coefficients.iter().map(|c| c.re))
            .collect();
        let n = olds.len() as f64;
        let mean_old = olds.iter().sum::<f64>() / n;
        let mean_new = news.iter().sum::<f64>() / n;
        let cov: f64 = olds
            .iter()
            .zip(&news)
            .map(|(a, b)| (a - mean_old) * (b - mean_new))
            .sum::<f64>()
            / n;
        let var_old: f64 = olds.iter().map(|a| (a - mean_old).powi(2)).sum::<f64>() / n;
        let var_new: f64 = news.iter().map(|b| (b - mean_new).powi(2)).sum::<f64>() / n;
        let corr = cov / (var_old * var_new).sqrt();
        assert!(corr.abs() < 0.15, "correlation {corr}");
    }

    #[test]
    fn gain_examples() {
        let zero = ChannelVector {
            coefficients: vec![Complex64::new(0.0, 0.0); 3],
        };
        assert_eq!(channel_gain(&zero), 0.0);
        let v = ChannelVector {
            coefficients: vec![Complex64::new(3.0, 4.0)],
        };
        assert_eq!(channel_gain(&v), 25.0);
        let v = ChannelVector {
            coefficients: vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)],
        };
        assert_eq!(channel_gain(&v), 2.0);
    }

    #[test]
    fn snr_closed_form_spot_checks() {
        assert_eq!(end_to_end_snr(0.0, 5.0, 10.0, 10.0, 1.0), 0.0);
        assert!((end_to_end_snr(1.0, 1.0, 1.0, 1.0, 1.0) - 1.0 / 3.0).abs() < 1e-12);
        assert!((end_to_end_snr(1.0, 1.0, 2.0, 2.0, 1.0) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn mutual_information_spot_checks() {
        assert_eq!(mutual_information(0.0), 0.0);
        assert!((mutual_information(1.0) - 0.5).abs() < 1e-12);
        assert!((mutual_information(3.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn outage_uses_strict_inequality() {
        assert_eq!(outage_indicator(0.5, 0.1), 0);
        assert_eq!(outage_indicator(0.05, 0.1), 1);
        assert_eq!(outage_indicator(0.1, 0.1), 0);
    }

    #[test]
    fn step_with_zero_source_power_never_succeeds() {
        let cfg = config();
        let state = sample_initial_channels(&cfg, &mut rng(8));
        let action = ActionCommand {
            relay_index: 1,
            source_power: 0.0,
        };
        let out = step(&state, &action, &cfg, &mut rng(9)).unwrap();
        assert_eq!(out.reward, 0);
        assert_eq!(out.mutual_information, 0.0);
    }

    #[test]
    fn step_hand_evaluated_chain_with_frozen_channels() {
        // rho = 1 freezes the channels, so gains are known exactly:
        // phi_sk = phi_kd = 3 with unit powers and gains 6 at P=0.5.
        let cfg = SystemConfig {
            correlation: 1.0,
            relay_count: 1,
            source_antennas: 1,
            dest_antennas: 1,
            noise_variance: 1.0,
            ..config()
        };
        let g = 6.0_f64;
        let state = EnvState {
            first_hop: vec![ChannelVector {
                coefficients: vec![Complex64::new(g.sqrt(), 0.0)],
            }],
            second_hop: vec![ChannelVector {
                coefficients: vec![Complex64::new(0.0, g.sqrt())],
            }],
            slot_index: 0,
        };
        let action = ActionCommand {
            relay_index: 1,
            source_power: 0.5,
        };
        let out = step(&state, &action, &cfg, &mut rng(10)).unwrap();
        // phi = 0.5 * 6 = 3 on both hops -> snr = 9/7.
        assert!((out.snr - 9.0 / 7.0).abs() < 1e-12);
        let expected_mi = 0.5 * (1.0 + 9.0 / 7.0_f64).log2();
        assert!((out.mutual_information - expected_mi).abs() < 1e-12);
        assert!((expected_mi - 0.5963).abs() < 1e-4);
        assert_eq!(out.reward, 1);
    }

    #[test]
    fn episode_runs_exactly_t_max_steps() {
        let cfg = SystemConfig {
            episode_length: 7,
            ..config()
        };
        let mut r = rng(11);
        let mut state = sample_initial_channels(&cfg, &mut r);
        let action = ActionCommand {
            relay_index: 2,
            source_power: 0.5,
        };
        let mut outcomes = Vec::new();
        loop {
            let out = step(&state, &action, &cfg, &mut r).unwrap();
            state = out.next_state.clone();
            let done = out.done;
            outcomes.push(out);
            if done {
                break;
            }
        }
        assert_eq!(outcomes.len(), 7);
        assert!(outcomes[..6].iter().all(|o| !o.done));
        assert!(outcomes[6].done);
    }

    #[test]
    fn step_rejects_invalid_actions() {
        let cfg = config();
        let state = sample_initial_channels(&cfg, &mut rng(12));
        let mut r = rng(13);
        assert!(matches!(
            step(
                &state,
                &ActionCommand {
                    relay_index: 0,
                    source_power: 0.5
                },
                &cfg,
                &mut r
            ),
            Err(EnvError::InvalidRelayIndex { .. })
        ));
        assert!(matches!(
            step(
                &state,
                &ActionCommand {
                    relay_index: 5,
                    source_power: 0.5
                },
                &cfg,
                &mut r
            ),
            Err(EnvError::InvalidRelayIndex { .. })
        ));
        assert!(matches!(
            step(
                &state,
                &ActionCommand {
                    relay_index: 1,
                    source_power: 1.5
                },
                &cfg,
                &mut r
            ),
            Err(EnvError::InvalidSourcePower { .. })
        ));
    }

    #[test]
    fn observe_returns_gains_in_hop_order() {
        let mk = |g: f64| ChannelVector {
            coefficients: vec![Complex64::new(g.sqrt(), 0.0)],
        };
        let state = EnvState {
            first_hop: vec![mk(2.0), mk(0.5)],
            second_hop: vec![mk(1.0), mk(4.0)],
            slot_index: 0,
        };
        let got = observe(&state);
        for (a, b) in got.iter().zip(&[2.0, 0.5, 1.0, 4.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(observe(&state), got, "observe must be pure");
    }

    #[test]
    fn observe_zero_state_is_zero_vector() {
        let cfg = SystemConfig {
            channel_variance_first_hop: 0.0,
            channel_variance_second_hop: 0.0,
            ..config()
        };
        let state = sample_initial_channels(&cfg, &mut rng(14));
        let feats = observe(&state);
        assert_eq!(feats.len(), 2 * cfg.relay_count);
        assert!(feats.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn raw_observation_has_configured_length() {
        let cfg = SystemConfig {
            observation: ObservationMode::RawVectors,
            ..config()
        };
        let state = sample_initial_channels(&cfg, &mut rng(15));
        let feats = observe_features(&state, &cfg);
        assert_eq!(feats.len(), cfg.feature_len());
        assert_eq!(feats.len(), 2 * 4 * (2 + 2));
    }

    #[test]
    fn snr_is_bounded_by_the_weaker_hop() {
        let mut r = rng(100);
        for _ in 0..20_000 {
            let ps = r.random::<f64>() * 2.0;
            let pr = r.random::<f64>() * 2.0;
            let g1 = r.random::<f64>() * 10.0;
            let g2 = r.random::<f64>() * 10.0;
            let noise = 0.1 + r.random::<f64>();
            let snr = end_to_end_snr(ps, pr, g1, g2, noise);
            let phi1 = ps * g1 / noise;
            let phi2 = pr * g2 / noise;
            assert!(snr >= 0.0);
            assert!(snr <= phi1.min(phi2) + 1e-12, "{snr} vs {phi1}, {phi2}");
        }
    }

    #[test]
    fn mutual_information_is_monotone_in_snr() {
        let mut r = rng(101);
        for _ in 0..20_000 {
            let a = r.random::<f64>() * 50.0;
            let b = r.random::<f64>() * 50.0;
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            assert!(mutual_information(lo) <= mutual_information(hi));
        }
    }

    #[test]
    fn boundary_powers_are_valid_and_split_the_budget() {
        let cfg = config();
        let state = sample_initial_channels(&cfg, &mut rng(16));
        let mut r = rng(17);
        for ps in [0.0, cfg.max_power] {
            let out = step(
                &state,
                &ActionCommand {
                    relay_index: 1,
                    source_power: ps,
                },
                &cfg,
                &mut r,
            )
            .unwrap();
            assert!(out.reward <= 1);
        }
        // Any in-range power leaves a non-negative relay share.
        for _ in 0..1000 {
            let ps = r.random::<f64>() * cfg.max_power;
            assert!(cfg.max_power - ps >= 0.0);
            assert!((0.0..=cfg.max_power).contains(&ps));
        }
    }

    #[test]
    fn identical_seeds_give_identical_trajectories() {
        let cfg = config();
        let run = || {
            let mut r = rng(77);
            let mut state = sample_initial_channels(&cfg, &mut r);
            let mut rewards = Vec::new();
            for i in 0..50 {
                let action = ActionCommand {
                    relay_index: 1 + (i % cfg.relay_count),
                    source_power: 0.3,
                };
                let out = step(&state, &action, &cfg, &mut r).unwrap();
                rewards.push((out.reward, out.snr.to_bits(), out.mutual_information.to_bits()));
                state = out.next_state;
            }
            rewards
        };
        assert_eq!(run(), run());
    }
}
