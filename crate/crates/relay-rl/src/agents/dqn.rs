//! Value-based baseline over a discretized action grid: K relays times L
//! power levels. Epsilon-greedy exploration, bootstrapped squared-TD loss
//! against a soft-updated target network, uniform replay (the shared buffer
//! with its priority exponent forced to zero).

use super::{AgentError, TrainStepReport};
use crate::env::ActionCommand;
use crate::nn::{
    clip_global_norm, rmsprop_step, soft_update, Activation, Gradients, LayerSpec, Mlp,
    RmsPropState,
};
use crate::replay::SampledBatch;
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct DqnParams {
    pub feature_len: usize,
    pub relay_count: usize,
    /// Number of selectable power levels L; level l maps to `l / L * max_power`.
    pub power_levels: usize,
    pub max_power: f64,
    pub learning_rate: f64,
    pub discount: f64,
    pub soft_update: f64,
    pub gradient_clip: f64,
    pub q_hidden: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DqnAgent {
    pub(crate) q_net: Mlp,
    pub(crate) q_target: Mlp,
    pub(crate) opt: RmsPropState,
    pub(crate) feature_len: usize,
    pub(crate) relay_count: usize,
    pub(crate) power_levels: usize,
    pub(crate) max_power: f64,
    pub(crate) discount: f64,
    pub(crate) tau: f64,
    pub(crate) gradient_clip: f64,
    pub(crate) exploration_rate: f64,
}

/// Splits a joint index in `0..K*L` into relay `index / L + 1` (1-based) and
/// power `(index % L + 1) / L * max_power`, i.e. the levels
/// `P_max/L, 2 P_max/L, ..., P_max`.
pub fn decode_discrete_action(
    index: usize,
    relay_count: usize,
    power_levels: usize,
    max_power: f64,
) -> ActionCommand {
    debug_assert!(index < relay_count * power_levels);
    let relay_index = index / power_levels + 1;
    let level = index % power_levels + 1;
    ActionCommand {
        relay_index,
        source_power: level as f64 / power_levels as f64 * max_power,
    }
}

impl DqnAgent {
    pub fn new<R: Rng>(params: &DqnParams, rng: &mut R) -> Result<Self, AgentError> {
        let outputs = params.relay_count * params.power_levels;
        let mut specs = Vec::with_capacity(params.q_hidden.len() + 1);
        let mut prev = params.feature_len;
        for &h in &params.q_hidden {
            specs.push(LayerSpec::new(prev, h, Activation::Relu));
            prev = h;
        }
        specs.push(LayerSpec::new(prev, outputs, Activation::Identity));
        let q_net = Mlp::init(&specs, rng)?;
        let opt = RmsPropState::new(&q_net, params.learning_rate);
        Ok(Self {
            q_target: q_net.clone(),
            q_net,
            opt,
            feature_len: params.feature_len,
            relay_count: params.relay_count,
            power_levels: params.power_levels,
            max_power: params.max_power,
            discount: params.discount,
            tau: params.soft_update,
            gradient_clip: params.gradient_clip,
            exploration_rate: 0.0,
        })
    }

    pub fn action_count(&self) -> usize {
        self.relay_count * self.power_levels
    }

    pub fn exploration_rate(&self) -> f64 {
        self.exploration_rate
    }

    pub fn set_exploration_rate(&mut self, rate: f64) {
        self.exploration_rate = rate.clamp(0.0, 1.0);
    }

    pub fn q_net(&self) -> &Mlp {
        &self.q_net
    }

    pub fn q_target(&self) -> &Mlp {
        &self.q_target
    }

    /// Epsilon-greedy: uniform joint action with probability epsilon when
    /// exploring, otherwise the argmax (ties to the lowest index).
    pub fn act<R: Rng>(
        &self,
        features: &[f64],
        explore: bool,
        rng: &mut R,
    ) -> Result<(usize, ActionCommand), AgentError> {
        let index = if explore && rng.random::<f64>() < self.exploration_rate {
            rng.random_range(0..self.action_count())
        } else {
            let q = self.q_net.forward_value(features)?;
            argmax(&q)
        };
        Ok((
            index,
            decode_discrete_action(index, self.relay_count, self.power_levels, self.max_power),
        ))
    }

    /// Warmup policy: uniform over the joint action grid.
    pub fn random_index<R: Rng>(&self, rng: &mut R) -> (usize, ActionCommand) {
        let index = rng.random_range(0..self.action_count());
        (
            index,
            decode_discrete_action(index, self.relay_count, self.power_levels, self.max_power),
        )
    }

    /// One mini-batch update: `y = r + gamma * max_a' Q_target(s')`, squared-TD
    /// loss on the taken action, RMSProp step, Polyak target update.
    pub fn train_step(&mut self, batch: &SampledBatch) -> Result<TrainStepReport, AgentError> {
        let m = batch.units.len();
        if m == 0 {
            return Err(AgentError::EmptyBatch);
        }
        let actions = self.action_count();
        let inv_m = 1.0 / m as f64;
        let mut grads = Gradients::zeros_like(&self.q_net);
        let mut out_grad = vec![0.0; actions];
        let mut td_errors = Vec::with_capacity(m);
        let mut loss = 0.0;
        let mut abs_td = 0.0;
        let mut q_mean = 0.0;
        for (unit, &weight) in batch.units.iter().zip(&batch.weights) {
            if unit.state_features.len() != self.feature_len
                || unit.next_state_features.len() != self.feature_len
                || unit.action_raw.len() != 1
            {
                return Err(AgentError::MalformedUnit(format!(
                    "features {}/{}, action {} (expected {}/{}/1)",
                    unit.state_features.len(),
                    unit.next_state_features.len(),
                    unit.action_raw.len(),
                    self.feature_len,
                    self.feature_len,
                )));
            }
            let stored = unit.action_raw[0];
            if stored.fract() != 0.0 || stored < 0.0 || stored >= actions as f64 {
                return Err(AgentError::MalformedUnit(format!(
                    "stored action index {stored} outside 0..{actions}"
                )));
            }
            let action = stored as usize;
            let next_q = self.q_target.forward_value(&unit.next_state_features)?;
            let best_next = next_q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let target = unit.reward as f64 + self.discount * best_next;
            let (q, cache) = self.q_net.forward(&unit.state_features)?;
            let delta = target - q[action];
            loss += weight * delta * delta * inv_m;
            abs_td += delta.abs() * inv_m;
            q_mean += q[action] * inv_m;
            out_grad[action] = -2.0 * weight * delta * inv_m;
            self.q_net.backward_into(cache, &out_grad, &mut grads)?;
            out_grad[action] = 0.0;
            td_errors.push(delta);
        }
        if !loss.is_finite() {
            return Err(AgentError::NonFiniteSignal);
        }
        clip_global_norm(&mut grads, self.gradient_clip);
        rmsprop_step(&mut self.q_net, &grads, &mut self.opt).map_err(|e| match e {
            crate::nn::NnError::NonFiniteGradient => AgentError::NonFiniteSignal,
            other => AgentError::Nn(other),
        })?;
        soft_update(&mut self.q_target, &self.q_net, self.tau)?;
        Ok(TrainStepReport {
            critic_loss: loss,
            mean_abs_td: abs_td,
            actor_objective: q_mean,
            td_errors,
        })
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        q_net: Mlp,
        q_target: Mlp,
        opt: RmsPropState,
        feature_len: usize,
        relay_count: usize,
        power_levels: usize,
        max_power: f64,
        discount: f64,
        tau: f64,
        gradient_clip: f64,
        exploration_rate: f64,
    ) -> Result<Self, AgentError> {
        if q_net.specs() != q_target.specs()
            || q_net.input_size() != feature_len
            || q_net.output_size() != relay_count * power_levels
        {
            return Err(AgentError::MalformedUnit(
                "checkpoint network shapes are inconsistent".into(),
            ));
        }
        Ok(Self {
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
        })
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0usize;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::replay::{ExperienceUnit, SampledBatch};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn params() -> DqnParams {
        DqnParams {
            feature_len: 4,
            relay_count: 2,
            power_levels: 10,
            max_power: 1.0,
            learning_rate: 0.005,
            discount: 0.0,
            soft_update: 0.001,
            gradient_clip: f64::INFINITY,
            q_hidden: vec![8],
        }
    }

    #[test]
    fn power_levels_are_the_declared_grid() {
        for level in 0..10 {
            let cmd = decode_discrete_action(level, 1, 10, 1.0);
            assert_eq!(cmd.relay_index, 1);
            assert!((cmd.source_power - (level + 1) as f64 / 10.0).abs() < 1e-15);
        }
        // Highest level spends the whole budget.
        assert_eq!(decode_discrete_action(9, 1, 10, 1.0).source_power, 1.0);
    }

    #[test]
    fn decode_is_a_bijection_over_the_grid() {
        let (k, l) = (3, 4);
        let mut seen = std::collections::HashSet::new();
        for idx in 0..k * l {
            let cmd = decode_discrete_action(idx, k, l, 1.0);
            assert!((1..=k).contains(&cmd.relay_index));
            assert!(seen.insert((cmd.relay_index, cmd.source_power.to_bits())));
        }
        assert_eq!(seen.len(), k * l);
    }

    #[test]
    fn full_exploration_is_uniform_over_joint_actions() {
        let mut agent = DqnAgent::new(&params(), &mut rng(1)).unwrap();
        agent.set_exploration_rate(1.0);
        let features = [0.5, 0.2, 0.8, 0.1];
        let mut counts = vec![0usize; agent.action_count()];
        let mut r = rng(2);
        let draws = 200_000;
        for _ in 0..draws {
            let (idx, _) = agent.act(&features, true, &mut r).unwrap();
            counts[idx] += 1;
        }
        let expected = 1.0 / agent.action_count() as f64;
        for count in counts {
            let freq = count as f64 / draws as f64;
            assert!((freq - expected).abs() < 0.01, "frequency {freq}");
        }
    }

    #[test]
    fn greedy_action_is_deterministic() {
        let agent = DqnAgent::new(&params(), &mut rng(3)).unwrap();
        let features = [0.5, 0.2, 0.8, 0.1];
        let (a, _) = agent.act(&features, false, &mut rng(4)).unwrap();
        let (b, _) = agent.act(&features, false, &mut rng(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gamma_zero_target_reduces_to_reward() {
        let mut agent = DqnAgent::new(&params(), &mut rng(6)).unwrap();
        let features = vec![0.1, 0.2, 0.3, 0.4];
        let q = agent.q_net.forward_value(&features).unwrap()[3];
        let batch = SampledBatch {
            units: vec![ExperienceUnit {
                state_features: features.clone(),
                action_raw: vec![3.0],
                reward: 1,
                next_state_features: features,
            }],
            indices: vec![0],
            weights: vec![1.0],
        };
        let report = agent.train_step(&batch).unwrap();
        assert!((report.td_errors[0] - (1.0 - q)).abs() < 1e-12);
    }

    #[test]
    fn target_network_starts_equal_and_tracks_slowly() {
        let mut agent = DqnAgent::new(&params(), &mut rng(7)).unwrap();
        assert_eq!(agent.q_net, agent.q_target);
        let batch = SampledBatch {
            units: vec![ExperienceUnit {
                state_features: vec![0.5, 0.5, 0.5, 0.5],
                action_raw: vec![0.0],
                reward: 0,
                next_state_features: vec![0.4, 0.4, 0.4, 0.4],
            }],
            indices: vec![0],
            weights: vec![1.0],
        };
        agent.train_step(&batch).unwrap();
        assert_ne!(agent.q_net, agent.q_target);
        // Target moved by at most tau times the parameter gap.
        let gap: f64 = agent.q_net.layers()[0]
            .weights
            .iter()
            .zip(&agent.q_target.layers()[0].weights)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(gap > 0.0);
    }

    #[test]
    fn malformed_stored_action_is_rejected() {
        let mut agent = DqnAgent::new(&params(), &mut rng(8)).unwrap();
        let features = vec![0.1, 0.2, 0.3, 0.4];
        let batch = SampledBatch {
            units: vec![ExperienceUnit {
                state_features: features.clone(),
                action_raw: vec![2.5],
                reward: 1,
                next_state_features: features,
            }],
            indices: vec![0],
            weights: vec![1.0],
        };
        assert!(matches!(
            agent.train_step(&batch),
            Err(AgentError::MalformedUnit(_))
        ));
    }
}
