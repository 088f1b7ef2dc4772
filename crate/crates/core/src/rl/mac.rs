//! Multi-agent actor-critic with a centralized Q critic.
//!
//! During training every learning agent computes its advantage from one
//! shared Q network that sees the joint observations and joint actions of
//! all learning agents; output head `i` is agent `i`'s Q value. After
//! deployment each agent adapts alone with its local state-value critic.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{contract, ensure, Result};
use crate::nn::{standard_specs, MlpParams};
use crate::rng::RngStream;

use super::buffer::{ExperienceBuffer, JointStep, Transition};
use super::pg::{actor_critic_update, half_mean_square, UpdateStats};
use super::{CriticGradient, TrainConfig};

/// Shared Q network with one output head per learning agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CentralCritic {
    pub params: MlpParams,
    pub agents: usize,
    pub obs_dim: usize,
    pub num_actions: usize,
    /// When false the critic sees joint observations only, i.e. it is a
    /// state-value function per head.
    pub include_actions: bool,
}

impl CentralCritic {
    pub fn input_dim(agents: usize, obs_dim: usize, num_actions: usize, include_actions: bool) -> usize {
        agents * obs_dim + if include_actions { agents * num_actions } else { 0 }
    }

    pub fn new(
        agents: usize,
        obs_dim: usize,
        num_actions: usize,
        hidden: &[usize],
        include_actions: bool,
        rng: &mut RngStream,
    ) -> Result<Self> {
        ensure!(agents >= 1, "central critic needs at least one agent");
        let inputs = Self::input_dim(agents, obs_dim, num_actions, include_actions);
        Ok(Self {
            params: MlpParams::init(&standard_specs(inputs, hidden, agents), rng)?,
            agents,
            obs_dim,
            num_actions,
            include_actions,
        })
    }

    /// Wraps existing parameters, checking their shape.
    pub fn from_params(
        params: MlpParams,
        agents: usize,
        obs_dim: usize,
        num_actions: usize,
        include_actions: bool,
    ) -> Result<Self> {
        ensure!(
            params.input_dim() == Self::input_dim(agents, obs_dim, num_actions, include_actions)
                && params.output_dim() == agents,
            "central critic shape does not match {agents} agents"
        );
        Ok(Self {
            params,
            agents,
            obs_dim,
            num_actions,
            include_actions,
        })
    }

    /// Joint observations followed by one-hot joint actions.
    pub fn input(&self, joint: &JointStep) -> Result<Vec<f64>> {
        ensure!(
            joint.actions.len() == self.agents && joint.observations.len() == self.agents * self.obs_dim,
            "joint step does not describe {} agents",
            self.agents
        );
        let mut x = joint.observations.clone();
        if self.include_actions {
            for &a in &joint.actions {
                ensure!(a < self.num_actions, "joint action {a} out of range");
                let mut one_hot = vec![0.0; self.num_actions];
                one_hot[a] = 1.0;
                x.extend(one_hot);
            }
        }
        Ok(x)
    }

    pub fn q_values(&self, joint: &JointStep) -> Result<Vec<f64>> {
        self.params.forward(&self.input(joint)?)
    }
}

/// `Adv_{i,t} = r_{i,t} + gamma Q_i(a_{t+1}, s_{t+1}) - Q_i(a_t, s_t)`,
/// with zero bootstrap on the terminal step.
pub fn mac_advantage(transition: &Transition, critic: &CentralCritic, gamma: f64) -> Result<f64> {
    let joint = transition
        .joint
        .as_ref()
        .ok_or_else(|| contract!("transition of agent {} has no joint fields", transition.agent))?;
    let i = transition.agent;
    ensure!(i < critic.agents, "agent {i} has no central Q head");
    let q_now = critic.q_values(&joint.current)?[i];
    let bootstrap = if transition.done {
        0.0
    } else {
        let next = joint
            .next
            .as_ref()
            .ok_or_else(|| contract!("non-terminal transition of agent {i} lacks next joint step"))?;
        gamma * critic.q_values(next)?[i]
    };
    Ok(transition.reward + bootstrap - q_now)
}

/// Diagnostics of one centralized training step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MacStats {
    pub per_agent: Vec<UpdateStats>,
    /// `1/2` mean squared advantage over all agents and steps.
    pub central_loss: f64,
}

fn check_alignment(buffers: &[ExperienceBuffer]) -> Result<usize> {
    let steps = buffers[0].len();
    for (i, b) in buffers.iter().enumerate() {
        ensure!(b.agent() == i, "buffer {i} belongs to agent {}", b.agent());
        ensure!(b.is_multi_agent(), "buffer {i} lacks joint fields");
        ensure!(
            b.len() == steps,
            "buffer {i} holds {} steps, buffer 0 holds {steps}",
            b.len()
        );
    }
    for t in 0..steps {
        let first = &buffers[0].transitions()[t];
        for b in &buffers[1..] {
            let other = &b.transitions()[t];
            ensure!(
                other.done == first.done && other.joint == first.joint,
                "buffers disagree on the joint step at t={t}"
            );
        }
    }
    Ok(steps)
}

/// One training-phase update of every actor and the shared central critic.
///
/// Actor `i` ascends `alpha_pi sum_t Adv_{i,t} grad log pi_i`; the central
/// critic descends `alpha_Q` along the gradient of
/// `1/2 sum_{i,t} Adv_{i,t}^2` (full residual gradient, or the semi-gradient
/// that holds the bootstrap target fixed).
pub fn mac_train_step(
    actors: &mut [MlpParams],
    critic: &mut CentralCritic,
    buffers: &[ExperienceBuffer],
    cfg: &TrainConfig,
) -> Result<MacStats> {
    ensure!(
        !buffers.is_empty() && buffers.len() == actors.len() && buffers.len() == critic.agents,
        "need one buffer and one actor per central Q head ({} heads, {} buffers, {} actors)",
        critic.agents,
        buffers.len(),
        actors.len()
    );
    let steps = check_alignment(buffers)?;
    if steps == 0 {
        log::warn!("empty buffers; MAC step skipped");
        return Ok(MacStats::default());
    }
    let n = buffers.len();

    // Q activations at every joint step, shared by all agents.
    let mut now_cache = Vec::with_capacity(steps);
    let mut next_cache = Vec::with_capacity(steps);
    for t in 0..steps {
        let tr = &buffers[0].transitions()[t];
        let joint = tr.joint.as_ref().expect("checked by alignment");
        now_cache.push(critic.params.forward_cached(&critic.input(&joint.current)?)?);
        next_cache.push(if tr.done {
            None
        } else {
            let next = joint
                .next
                .as_ref()
                .ok_or_else(|| contract!("non-terminal step {t} lacks next joint step"))?;
            Some(critic.params.forward_cached(&critic.input(next)?)?)
        });
    }

    // adv[t][i]
    let mut adv = vec![vec![0.0; n]; steps];
    for (t, row) in adv.iter_mut().enumerate() {
        let q_now = now_cache[t].last().expect("output layer");
        let q_next = next_cache[t].as_ref().map(|c| c.last().expect("output layer"));
        for (i, a) in row.iter_mut().enumerate() {
            let r = buffers[i].transitions()[t].reward;
            let boot = q_next.map_or(0.0, |q| cfg.gamma * q[i]);
            *a = r + boot - q_now[i];
        }
    }

    let mut per_agent = Vec::with_capacity(n);
    let mut actor_grads = Vec::with_capacity(n);
    for (i, actor) in actors.iter().enumerate() {
        let weights: Vec<f64> = adv.iter().map(|row| row[i]).collect();
        let mut g = actor.zeros_like();
        let actor_loss =
            super::pg::accumulate_policy_gradient(
                actor,
                buffers[i].transitions(),
                &weights,
                cfg.entropy_coef,
                &mut g,
            )?;
        per_agent.push(UpdateStats {
            mean_reward: buffers[i].mean_reward(),
            actor_loss,
            critic_loss: half_mean_square(&weights),
        });
        actor_grads.push(g);
    }

    // Descent direction on 1/2 Adv^2: -Adv * (gamma dQ_next - dQ_now).
    let mut critic_grad = critic.params.zeros_like();
    for t in 0..steps {
        critic
            .params
            .backprop_into(&now_cache[t], &adv[t], 1.0, &mut critic_grad)?;
        if cfg.critic_gradient == CriticGradient::Residual {
            if let Some(next) = &next_cache[t] {
                critic
                    .params
                    .backprop_into(next, &adv[t], -cfg.gamma, &mut critic_grad)?;
            }
        }
    }

    for (actor, g) in actors.iter_mut().zip(&actor_grads) {
        actor.add_scaled(cfg.actor_lr, g);
        actor.check_finite()?;
    }
    critic.params.add_scaled(cfg.central_lr, &critic_grad);
    critic.params.check_finite()?;

    let flat: Vec<f64> = adv.iter().flatten().copied().collect();
    Ok(MacStats {
        per_agent,
        central_loss: half_mean_square(&flat),
    })
}

/// Deployed-phase update: local advantage from the agent's own critic.
/// The central critic is not involved.
pub fn mac_deployed_step(
    actor: &mut MlpParams,
    local_critic: &mut MlpParams,
    buffer: &ExperienceBuffer,
    cfg: &TrainConfig,
) -> Result<UpdateStats> {
    actor_critic_update(actor, local_critic, buffer, cfg)
}

/// Half mean squared central advantage over aligned buffers.
pub fn central_loss(
    critic: &CentralCritic,
    buffers: &[ExperienceBuffer],
    gamma: f64,
) -> Result<f64> {
    let mut advs = Vec::new();
    for b in buffers {
        for t in b.transitions() {
            advs.push(mac_advantage(t, critic, gamma)?);
        }
    }
    Ok(half_mean_square(&advs))
}
