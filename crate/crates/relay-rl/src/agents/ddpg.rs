//! Actor-critic agent with deterministic policy gradient.
//!
//! The actor emits K continuous relay scores plus a power fraction; the
//! environment executes the argmax relay while the critic consumes the raw
//! continuous vector, which keeps the action-gradient path differentiable
//! end to end. Prioritization lives entirely in the replay buffer, so the
//! same agent serves both the prioritized and the plain variant.

use super::{decode_action, policy_head, policy_head_derivative, AgentError, TrainStepReport};
use crate::env::ActionCommand;
use crate::nn::{
    clip_global_norm, rmsprop_step, soft_update, Activation, Gradients, LayerSpec, Mlp,
    RmsPropState,
};
use crate::replay::SampledBatch;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone, PartialEq)]
pub struct DdpgParams {
    pub feature_len: usize,
    pub relay_count: usize,
    pub max_power: f64,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub actor_learning_rate: f64,
    pub critic_learning_rate: f64,
    pub discount: f64,
    pub soft_update: f64,
    pub gradient_clip: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DdpgAgent {
    pub(crate) actor: Mlp,
    pub(crate) actor_target: Mlp,
    pub(crate) critic: Mlp,
    pub(crate) critic_target: Mlp,
    pub(crate) actor_opt: RmsPropState,
    pub(crate) critic_opt: RmsPropState,
    pub(crate) feature_len: usize,
    pub(crate) relay_count: usize,
    pub(crate) max_power: f64,
    pub(crate) discount: f64,
    pub(crate) tau: f64,
    pub(crate) gradient_clip: f64,
    pub(crate) noise_scale: f64,
}

fn hidden_chain(input: usize, hidden: &[usize], output: usize) -> Vec<LayerSpec> {
    let mut specs = Vec::with_capacity(hidden.len() + 1);
    let mut prev = input;
    for &h in hidden {
        specs.push(LayerSpec::new(prev, h, Activation::Relu));
        prev = h;
    }
    specs.push(LayerSpec::new(prev, output, Activation::Identity));
    specs
}

impl DdpgAgent {
    /// Target networks start as bit-exact copies of the evaluate networks.
    pub fn new<R: Rng>(params: &DdpgParams, rng: &mut R) -> Result<Self, AgentError> {
        let action_len = params.relay_count + 1;
        let actor = Mlp::init(
            &hidden_chain(params.feature_len, &params.actor_hidden, action_len),
            rng,
        )?;
        let critic = Mlp::init(
            &hidden_chain(params.feature_len + action_len, &params.critic_hidden, 1),
            rng,
        )?;
        let actor_opt = RmsPropState::new(&actor, params.actor_learning_rate);
        let critic_opt = RmsPropState::new(&critic, params.critic_learning_rate);
        Ok(Self {
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            actor_opt,
            critic_opt,
            feature_len: params.feature_len,
            relay_count: params.relay_count,
            max_power: params.max_power,
            discount: params.discount,
            tau: params.soft_update,
            gradient_clip: params.gradient_clip,
            noise_scale: 0.0,
        })
    }

    pub fn relay_count(&self) -> usize {
        self.relay_count
    }

    pub fn action_len(&self) -> usize {
        self.relay_count + 1
    }

    pub fn feature_len(&self) -> usize {
        self.feature_len
    }

    pub fn noise_scale(&self) -> f64 {
        self.noise_scale
    }

    pub fn set_noise_scale(&mut self, scale: f64) {
        self.noise_scale = scale.max(0.0);
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    pub fn critic(&self) -> &Mlp {
        &self.critic
    }

    pub fn actor_target(&self) -> &Mlp {
        &self.actor_target
    }

    pub fn critic_target(&self) -> &Mlp {
        &self.critic_target
    }

    /// Policy output plus optional exploration noise. The raw vector is what
    /// gets stored and fed to the critic; the command is what the environment
    /// executes. With `explore` off (or a zero noise scale) the mapping is
    /// deterministic.
    pub fn act<R: Rng>(
        &self,
        features: &[f64],
        explore: bool,
        rng: &mut R,
    ) -> Result<(Vec<f64>, ActionCommand), AgentError> {
        let z = self.actor.forward_value(features)?;
        let mut raw = policy_head(&z, self.relay_count);
        if explore {
            for (i, v) in raw.iter_mut().enumerate() {
                let noise: f64 = StandardNormal.sample(rng);
                let lo = if i < self.relay_count { -1.0 } else { 0.0 };
                *v = (*v + self.noise_scale * noise).clamp(lo, 1.0);
            }
        }
        let cmd = decode_action(&raw, self.relay_count, self.max_power);
        Ok((raw, cmd))
    }

    /// Warmup policy: raw vector uniform over the action box, which makes the
    /// executed relay uniform and the source power uniform over the budget.
    pub fn random_raw<R: Rng>(&self, rng: &mut R) -> (Vec<f64>, ActionCommand) {
        let mut raw: Vec<f64> = (0..self.relay_count)
            .map(|_| rng.random::<f64>() * 2.0 - 1.0)
            .collect();
        raw.push(rng.random::<f64>());
        let cmd = decode_action(&raw, self.relay_count, self.max_power);
        (raw, cmd)
    }

    /// One mini-batch update: weighted squared-TD critic step against the
    /// target networks, then a policy-gradient ascent step through the updated
    /// critic, then Polyak updates of both targets.
    pub fn train_step(&mut self, batch: &SampledBatch) -> Result<TrainStepReport, AgentError> {
        let m = batch.units.len();
        if m == 0 {
            return Err(AgentError::EmptyBatch);
        }
        let action_len = self.action_len();
        for unit in &batch.units {
            if unit.state_features.len() != self.feature_len
                || unit.next_state_features.len() != self.feature_len
                || unit.action_raw.len() != action_len
            {
                return Err(AgentError::MalformedUnit(format!(
                    "features {}/{}, action {} (expected {}/{}/{})",
                    unit.state_features.len(),
                    unit.next_state_features.len(),
                    unit.action_raw.len(),
                    self.feature_len,
                    self.feature_len,
                    action_len,
                )));
            }
        }
        let inv_m = 1.0 / m as f64;
        let mut joint = vec![0.0; self.feature_len + action_len];

        // Critic: y = r + gamma * Q'(s', mu'(s')), loss = mean w * delta^2.
        let mut critic_grads = Gradients::zeros_like(&self.critic);
        let mut td_errors = Vec::with_capacity(m);
        let mut loss = 0.0;
        let mut abs_td = 0.0;
        for (unit, &weight) in batch.units.iter().zip(&batch.weights) {
            let z_next = self.actor_target.forward_value(&unit.next_state_features)?;
            let a_next = policy_head(&z_next, self.relay_count);
            fill_joint(&mut joint, &unit.next_state_features, &a_next);
            let q_next = self.critic_target.forward_value(&joint)?[0];
            let target = unit.reward as f64 + self.discount * q_next;

            fill_joint(&mut joint, &unit.state_features, &unit.action_raw);
            let (q, cache) = self.critic.forward(&joint)?;
            let delta = target - q[0];
            loss += weight * delta * delta * inv_m;
            abs_td += delta.abs() * inv_m;
            self.critic
                .backward_into(cache, &[-2.0 * weight * delta * inv_m], &mut critic_grads)?;
            td_errors.push(delta);
        }
        if !loss.is_finite() {
            return Err(AgentError::NonFiniteSignal);
        }
        clip_global_norm(&mut critic_grads, self.gradient_clip);
        rmsprop_step(&mut self.critic, &critic_grads, &mut self.critic_opt)
            .map_err(reject_as_signal)?;

        // Actor: ascend J = mean Q(s, mu(s)) through grad_a Q and the head.
        let mut actor_grads = Gradients::zeros_like(&self.actor);
        let mut objective = 0.0;
        for unit in &batch.units {
            let (z, actor_cache) = self.actor.forward(&unit.state_features)?;
            let action = policy_head(&z, self.relay_count);
            fill_joint(&mut joint, &unit.state_features, &action);
            let (q, critic_cache) = self.critic.forward(&joint)?;
            objective += q[0] * inv_m;
            let input_grad = self.critic.input_gradient(&critic_cache, &[1.0])?;
            let head_deriv = policy_head_derivative(&action, self.relay_count);
            let downstream: Vec<f64> = input_grad[self.feature_len..]
                .iter()
                .zip(&head_deriv)
                .map(|(&g, &d)| -(g * d) * inv_m)
                .collect();
            self.actor
                .backward_into(actor_cache, &downstream, &mut actor_grads)?;
        }
        if !objective.is_finite() {
            return Err(AgentError::NonFiniteSignal);
        }
        clip_global_norm(&mut actor_grads, self.gradient_clip);
        rmsprop_step(&mut self.actor, &actor_grads, &mut self.actor_opt)
            .map_err(reject_as_signal)?;

        soft_update(&mut self.actor_target, &self.actor, self.tau)?;
        soft_update(&mut self.critic_target, &self.critic, self.tau)?;

        Ok(TrainStepReport {
            critic_loss: loss,
            mean_abs_td: abs_td,
            actor_objective: objective,
            td_errors,
        })
    }

    /// Batch estimate of the policy objective under the current critic,
    /// without touching any parameters.
    pub fn policy_objective(&self, states: &[Vec<f64>]) -> Result<f64, AgentError> {
        let mut joint = vec![0.0; self.feature_len + self.action_len()];
        let mut sum = 0.0;
        for s in states {
            let z = self.actor.forward_value(s)?;
            let a = policy_head(&z, self.relay_count);
            fill_joint(&mut joint, s, &a);
            sum += self.critic.forward_value(&joint)?[0];
        }
        Ok(sum / states.len() as f64)
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        actor: Mlp,
        actor_target: Mlp,
        critic: Mlp,
        critic_target: Mlp,
        actor_opt: RmsPropState,
        critic_opt: RmsPropState,
        feature_len: usize,
        relay_count: usize,
        max_power: f64,
        discount: f64,
        tau: f64,
        gradient_clip: f64,
        noise_scale: f64,
    ) -> Result<Self, AgentError> {
        if actor.specs() != actor_target.specs()
            || critic.specs() != critic_target.specs()
            || actor.input_size() != feature_len
            || actor.output_size() != relay_count + 1
            || critic.input_size() != feature_len + relay_count + 1
            || critic.output_size() != 1
        {
            return Err(AgentError::MalformedUnit(
                "checkpoint network shapes are inconsistent".into(),
            ));
        }
        Ok(Self {
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
        })
    }
}

fn fill_joint(buf: &mut [f64], state: &[f64], action: &[f64]) {
    buf[..state.len()].copy_from_slice(state);
    buf[state.len()..].copy_from_slice(action);
}

fn reject_as_signal(err: crate::nn::NnError) -> AgentError {
    match err {
        crate::nn::NnError::NonFiniteGradient => AgentError::NonFiniteSignal,
        other => AgentError::Nn(other),
    }
}
