//! Single-agent policy-gradient updates.
//!
//! Every update is batched over one episode: all gradients are taken at the
//! pre-update parameters, summed over steps, and applied once per network.

use alloc::vec::Vec;

use crate::error::{contract, Result};
use crate::nn::{forward_policy, forward_value, log_softmax_grad, MlpParams};

use super::buffer::{ExperienceBuffer, Transition};
use super::returns::compute_returns;
use super::TrainConfig;

/// Diagnostics of one update.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UpdateStats {
    pub mean_reward: f64,
    /// Mean of `-weight_t * log pi(a_t | s_t)`; lower means the weights
    /// favour the taken actions more.
    pub actor_loss: f64,
    /// Mean squared critic/baseline error, halved.
    pub critic_loss: f64,
}

/// Adds `sum_t (w_t grad log pi(a_t | s_t) + beta grad H(pi(. | s_t)))` into
/// `grad` and returns the actor-loss proxy.
pub(crate) fn accumulate_policy_gradient(
    params: &MlpParams,
    transitions: &[Transition],
    weights: &[f64],
    entropy_coef: f64,
    grad: &mut MlpParams,
) -> Result<f64> {
    let mut loss = 0.0;
    for (t, &w) in transitions.iter().zip(weights) {
        let acts = params.forward_cached(&t.obs)?;
        let dist = crate::nn::ActionDistribution::from_logits(&acts[acts.len() - 1])?;
        if t.action >= dist.len() {
            return Err(contract!(
                "action {} outside a {}-action policy",
                t.action,
                dist.len()
            ));
        }
        loss -= w * dist.log_prob(t.action);
        if entropy_coef != 0.0 {
            let mut g = entropy_grad(&dist);
            for (gk, lk) in g.iter_mut().zip(log_softmax_grad(&dist, t.action)) {
                *gk = entropy_coef * *gk + w * lk;
            }
            params.backprop_into(&acts, &g, 1.0, grad)?;
        } else if w != 0.0 {
            params.backprop_into(&acts, &log_softmax_grad(&dist, t.action), w, grad)?;
        }
    }
    Ok(loss / transitions.len().max(1) as f64)
}

/// dH/dz_k = -p_k (log p_k + H) for a softmax over logits `z`.
pub(crate) fn entropy_grad(dist: &crate::nn::ActionDistribution) -> Vec<f64> {
    let logs: Vec<f64> = (0..dist.len()).map(|k| dist.log_prob(k)).collect();
    let h: f64 = -dist.probs().iter().zip(&logs).map(|(p, l)| if *p > 0.0 { p * l } else { 0.0 }).sum::<f64>();
    dist.probs()
        .iter()
        .zip(&logs)
        .map(|(p, l)| if *p > 0.0 { -p * (l + h) } else { 0.0 })
        .collect()
}

/// Adds `sum_t w_t * grad v(s_t)` into `grad`.
fn accumulate_value_gradient<'a>(
    params: &MlpParams,
    states: impl Iterator<Item = (&'a [f64], f64)>,
    grad: &mut MlpParams,
) -> Result<()> {
    for (s, w) in states {
        if w != 0.0 {
            let acts = params.forward_cached(s)?;
            params.backprop_into(&acts, &[w], 1.0, grad)?;
        }
    }
    Ok(())
}

fn apply(params: &mut MlpParams, lr: f64, grad: &MlpParams) -> Result<()> {
    params.add_scaled(lr, grad);
    params.check_finite()
}

fn empty(buffer: &ExperienceBuffer) -> bool {
    if buffer.is_empty() {
        log::warn!("empty buffer for agent {}; update skipped", buffer.agent());
        true
    } else {
        false
    }
}

/// `theta += alpha_pi * sum_t G_t grad log pi(a_t | s_t)`.
pub fn reinforce_update(
    params: &mut MlpParams,
    buffer: &ExperienceBuffer,
    cfg: &TrainConfig,
) -> Result<UpdateStats> {
    if empty(buffer) {
        return Ok(UpdateStats::default());
    }
    let returns = compute_returns(&buffer.rewards(), cfg.gamma, cfg.lookahead)?;
    let mut grad = params.zeros_like();
    let actor_loss = accumulate_policy_gradient(params, buffer.transitions(), &returns, cfg.entropy_coef, &mut grad)?;
    apply(params, cfg.actor_lr, &grad)?;
    Ok(UpdateStats {
        mean_reward: buffer.mean_reward(),
        actor_loss,
        critic_loss: 0.0,
    })
}

/// REINFORCE with a learned state-value baseline.
///
/// The actor uses `G_t - v(s_t)`; the baseline descends
/// `1/2 sum_t (G_t - v(s_t))^2` with step `alpha_v`.
pub fn reinforce_baseline_update(
    params: &mut MlpParams,
    value_params: &mut MlpParams,
    buffer: &ExperienceBuffer,
    cfg: &TrainConfig,
) -> Result<UpdateStats> {
    if empty(buffer) {
        return Ok(UpdateStats::default());
    }
    let returns = compute_returns(&buffer.rewards(), cfg.gamma, cfg.lookahead)?;
    let advantages = buffer
        .transitions()
        .iter()
        .zip(&returns)
        .map(|(t, g)| Ok(g - forward_value(value_params, &t.obs)?))
        .collect::<Result<Vec<f64>>>()?;

    let mut actor_grad = params.zeros_like();
    let actor_loss =
        accumulate_policy_gradient(params, buffer.transitions(), &advantages, cfg.entropy_coef, &mut actor_grad)?;
    let mut value_grad = value_params.zeros_like();
    accumulate_value_gradient(
        value_params,
        buffer
            .transitions()
            .iter()
            .zip(&advantages)
            .map(|(t, a)| (t.obs.as_slice(), *a)),
        &mut value_grad,
    )?;
    apply(params, cfg.actor_lr, &actor_grad)?;
    apply(value_params, cfg.critic_lr, &value_grad)?;
    Ok(UpdateStats {
        mean_reward: buffer.mean_reward(),
        actor_loss,
        critic_loss: half_mean_square(&advantages),
    })
}

/// One-step advantages `r + gamma v(s') - v(s)`, with zero bootstrap on
/// terminal transitions.
pub fn td_advantages(
    critic: &MlpParams,
    transitions: &[Transition],
    gamma: f64,
) -> Result<Vec<f64>> {
    transitions
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let next = t
                .next_obs
                .as_ref()
                .ok_or_else(|| contract!("transition {i} of agent {} lacks s_(t+1)", t.agent))?;
            let bootstrap = if t.done {
                0.0
            } else {
                gamma * forward_value(critic, next)?
            };
            Ok(t.reward + bootstrap - forward_value(critic, &t.obs)?)
        })
        .collect()
}

/// Actor-critic with a local state-value critic:
/// `theta += alpha_pi sum Adv grad log pi`, `omega += alpha_v sum Adv grad v(s_t)`.
pub fn actor_critic_update(
    params: &mut MlpParams,
    critic_params: &mut MlpParams,
    buffer: &ExperienceBuffer,
    cfg: &TrainConfig,
) -> Result<UpdateStats> {
    if empty(buffer) {
        return Ok(UpdateStats::default());
    }
    let advantages = td_advantages(critic_params, buffer.transitions(), cfg.gamma)?;
    let mut actor_grad = params.zeros_like();
    let actor_loss =
        accumulate_policy_gradient(params, buffer.transitions(), &advantages, cfg.entropy_coef, &mut actor_grad)?;
    let mut critic_grad = critic_params.zeros_like();
    accumulate_value_gradient(
        critic_params,
        buffer
            .transitions()
            .iter()
            .zip(&advantages)
            .map(|(t, a)| (t.obs.as_slice(), *a)),
        &mut critic_grad,
    )?;
    apply(params, cfg.actor_lr, &actor_grad)?;
    apply(critic_params, cfg.critic_lr, &critic_grad)?;
    Ok(UpdateStats {
        mean_reward: buffer.mean_reward(),
        actor_loss,
        critic_loss: half_mean_square(&advantages),
    })
}

pub(crate) fn half_mean_square(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    0.5 * xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64
}

/// Probability the policy assigns to `action` at `obs`.
pub fn action_probability(params: &MlpParams, obs: &[f64], action: usize) -> Result<f64> {
    Ok(forward_policy(params, obs)?.probs()[action])
}
