//! Policy-gradient learners and the multi-agent actor-critic (MAC).

mod buffer;
mod mac;
mod pg;
mod returns;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use buffer::{ExperienceBuffer, JointFields, JointStep, Transition};
pub use mac::{central_loss, mac_advantage, mac_deployed_step, mac_train_step, CentralCritic, MacStats};
pub use pg::{
    action_probability, actor_critic_update, reinforce_baseline_update, reinforce_update,
    td_advantages, UpdateStats,
};
pub use returns::{compute_returns, UNBOUNDED};

use crate::error::{ensure, Result};
use crate::nn::{standard_specs, MlpParams, PolicyActor};
use crate::rng::RngStream;
use crate::sim::{run_episode_with, Actor, Environment, EpisodeTrace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Reinforce,
    ReinforceBaseline,
    ActorCritic,
    Mac,
}

/// How the central critic differentiates `1/2 Adv^2`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticGradient {
    /// Holds the bootstrap term fixed (TD-style).
    #[default]
    SemiGradient,
    /// Differentiates through both Q evaluations.
    Residual,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub gamma: f64,
    /// Look-ahead `H` of the truncated returns; [`UNBOUNDED`] for full
    /// Monte Carlo returns.
    pub lookahead: usize,
    pub actor_lr: f64,
    /// Local critic / baseline step size.
    pub critic_lr: f64,
    /// Central Q step size.
    pub central_lr: f64,
    pub epochs: usize,
    pub algorithm: Algorithm,
    pub critic_gradient: CriticGradient,
    /// Hidden widths of actors and critics.
    pub hidden: Vec<usize>,
    /// Weight of the policy-entropy bonus added to every actor update.
    /// Zero gives the plain policy gradient.
    pub entropy_coef: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            lookahead: 5,
            actor_lr: 1e-2,
            critic_lr: 1e-2,
            central_lr: 1e-2,
            epochs: 400,
            algorithm: Algorithm::ActorCritic,
            critic_gradient: CriticGradient::SemiGradient,
            hidden: alloc::vec![20, 20, 20, 20],
            entropy_coef: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            (0.0..=1.0).contains(&self.gamma),
            "discount {} outside [0, 1]",
            self.gamma
        );
        ensure!(self.lookahead >= 1, "look-ahead must be at least 1");
        ensure!(
            self.actor_lr > 0.0 && self.critic_lr > 0.0 && self.central_lr > 0.0,
            "step sizes must be positive"
        );
        ensure!(!self.hidden.contains(&0), "hidden layers must be non-empty");
        ensure!(
            self.entropy_coef >= 0.0 && self.entropy_coef.is_finite(),
            "entropy coefficient {} must be a finite non-negative number",
            self.entropy_coef
        );
        Ok(())
    }
}

/// Single-agent learner: an actor plus whatever critic its algorithm needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Learner {
    pub actor: MlpParams,
    /// Baseline (REINFORCE with baseline) or local critic (actor-critic,
    /// deployed MAC agents). Unused by plain REINFORCE.
    pub critic: MlpParams,
    pub algorithm: Algorithm,
}

impl Learner {
    pub fn new(
        obs_dim: usize,
        num_actions: usize,
        cfg: &TrainConfig,
        rng: &mut RngStream,
    ) -> Result<Self> {
        cfg.validate()?;
        let actor = MlpParams::init(&standard_specs(obs_dim, &cfg.hidden, num_actions), rng)?;
        let critic = MlpParams::init(&standard_specs(obs_dim, &cfg.hidden, 1), rng)?;
        Ok(Self {
            actor,
            critic,
            algorithm: cfg.algorithm,
        })
    }

    pub fn policy(&self) -> PolicyActor {
        PolicyActor::new(self.actor.clone())
    }

    /// Applies one episode's update. MAC learners outside centralized
    /// training use the deployed (local-critic) branch.
    pub fn update(&mut self, buffer: &ExperienceBuffer, cfg: &TrainConfig) -> Result<UpdateStats> {
        match self.algorithm {
            Algorithm::Reinforce => reinforce_update(&mut self.actor, buffer, cfg),
            Algorithm::ReinforceBaseline => {
                reinforce_baseline_update(&mut self.actor, &mut self.critic, buffer, cfg)
            }
            Algorithm::ActorCritic => actor_critic_update(&mut self.actor, &mut self.critic, buffer, cfg),
            Algorithm::Mac => mac_deployed_step(&mut self.actor, &mut self.critic, buffer, cfg),
        }
    }
}

/// Runs one episode and turns it into one buffer per agent.
///
/// With `joint` set, every transition also carries the joint observation and
/// action of all agents at `t` and `t + 1`.
pub fn collect_episode<E, A>(
    env: &mut E,
    actors: &mut [A],
    horizon: usize,
    seed: u64,
    joint: bool,
) -> Result<(EpisodeTrace, Vec<ExperienceBuffer>)>
where
    E: Environment + ?Sized,
    A: Actor,
{
    let n = env.num_agents();
    let mut buffers: Vec<ExperienceBuffer> =
        (0..n).map(|i| ExperienceBuffer::new(i, horizon, joint)).collect();
    let mut steps: Vec<JointStep> = Vec::new();
    let trace = run_episode_with(env, actors, horizon, seed, |rec| {
        let current = joint.then(|| JointStep {
            actions: rec.decisions.iter().map(|d| d.action).collect(),
            observations: rec.observations.iter().flatten().copied().collect(),
        });
        for (i, buf) in buffers.iter_mut().enumerate() {
            buf.push(Transition {
                agent: i,
                obs: rec.observations[i].clone(),
                action: rec.decisions[i].action,
                log_prob: rec.decisions[i].log_prob,
                reward: rec.rewards[i],
                next_obs: Some(rec.next_observations[i].clone()),
                done: rec.done,
                joint: current.clone().map(|c| JointFields { current: c, next: None }),
            })?;
        }
        if let Some(c) = current {
            steps.push(c);
        }
        Ok(())
    })?;
    if joint {
        for buf in &mut buffers {
            for (t, tr) in buf.transitions_mut().iter_mut().enumerate() {
                if let (Some(j), Some(next)) = (tr.joint.as_mut(), steps.get(t + 1)) {
                    j.next = Some(next.clone());
                }
            }
        }
    }
    Ok((trace, buffers))
}
