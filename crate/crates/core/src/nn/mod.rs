//! Small feedforward networks with a softmax policy head and a linear value
//! head, exact backpropagation, and a finite-difference gradient checker.

mod mlp;

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use mlp::{standard_specs, Activation, Layer, LayerSpec, MlpParams};

use crate::error::{ensure, Error, Result};
use crate::rng::RngStream;
use crate::sim::{Actor, Decision};

/// Categorical distribution over action ids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionDistribution {
    probs: Vec<f64>,
    log_probs: Vec<f64>,
}

impl ActionDistribution {
    /// Softmax with max-logit subtraction.
    pub fn from_logits(logits: &[f64]) -> Result<Self> {
        ensure!(!logits.is_empty(), "softmax needs at least one logit");
        if logits.iter().any(|l| !l.is_finite()) {
            return Err(Error::Numeric("non-finite logit".into()));
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| libm::exp(l - max)).collect();
        let total: f64 = exps.iter().sum();
        let log_total = libm::log(total);
        Ok(Self {
            probs: exps.iter().map(|e| e / total).collect(),
            log_probs: logits.iter().map(|l| l - max - log_total).collect(),
        })
    }

    /// Validates explicit probabilities (non-negative, summing to one).
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        ensure!(!probs.is_empty(), "empty distribution");
        ensure!(
            probs.iter().all(|p| p.is_finite() && *p >= 0.0),
            "probabilities must be finite and non-negative"
        );
        let total: f64 = probs.iter().sum();
        ensure!(
            libm::fabs(total - 1.0) <= 1e-9,
            "probabilities sum to {total}, not 1"
        );
        let log_probs = probs.iter().map(|p| libm::log(*p)).collect();
        Ok(Self { probs, log_probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn log_prob(&self, action: usize) -> f64 {
        self.log_probs[action]
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Index of the most probable action (lowest index on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.probs.iter().enumerate() {
            if *p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    /// Draws an action by inverse CDF on one uniform and returns it with its
    /// log-probability.
    pub fn sample(&self, rng: &mut RngStream) -> (usize, f64) {
        let u = rng.uniform();
        let mut acc = 0.0;
        let mut chosen = None;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                chosen = Some(i);
                break;
            }
        }
        // Rounding can leave acc a hair under 1; fall back to the last
        // action with non-zero mass.
        let a = chosen.unwrap_or_else(|| {
            self.probs
                .iter()
                .rposition(|p| *p > 0.0)
                .unwrap_or(self.probs.len() - 1)
        });
        (a, self.log_probs[a])
    }
}

/// Softmax policy over the network's outputs.
pub fn forward_policy(params: &MlpParams, obs: &[f64]) -> Result<ActionDistribution> {
    ActionDistribution::from_logits(&params.forward(obs)?)
}

pub fn sample_action(dist: &ActionDistribution, rng: &mut RngStream) -> (usize, f64) {
    dist.sample(rng)
}

/// Scalar value head: the network must have exactly one output.
pub fn forward_value(params: &MlpParams, obs: &[f64]) -> Result<f64> {
    ensure!(
        params.output_dim() == 1,
        "value head expects one output, network has {}",
        params.output_dim()
    );
    Ok(params.forward(obs)?[0])
}

/// Gradient of `log pi(action | obs)`, together with the distribution it was
/// evaluated at.
pub fn log_prob_gradient(
    params: &MlpParams,
    obs: &[f64],
    action: usize,
) -> Result<(MlpParams, ActionDistribution)> {
    let acts = params.forward_cached(obs)?;
    let dist = ActionDistribution::from_logits(&acts[acts.len() - 1])?;
    ensure!(
        action < dist.len(),
        "action {action} outside a {}-action policy",
        dist.len()
    );
    let mut grad = params.zeros_like();
    params.backprop_into(&acts, &log_softmax_grad(&dist, action), 1.0, &mut grad)?;
    Ok((grad, dist))
}

/// d log softmax(z)[a] / dz = onehot(a) - softmax(z).
pub(crate) fn log_softmax_grad(dist: &ActionDistribution, action: usize) -> Vec<f64> {
    let mut g: Vec<f64> = dist.probs().iter().map(|p| -p).collect();
    g[action] += 1.0;
    g
}

/// Scalar objective checked by [`grad_check`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradCheckTarget {
    /// `log pi(a | obs)` of the softmax head.
    LogProb(usize),
    /// Output `k` of the linear head.
    Output(usize),
}

fn objective(params: &MlpParams, obs: &[f64], target: GradCheckTarget) -> Result<f64> {
    match target {
        GradCheckTarget::LogProb(a) => Ok(forward_policy(params, obs)?.log_prob(a)),
        GradCheckTarget::Output(k) => Ok(params.forward(obs)?[k]),
    }
}

/// Largest relative error between backprop and central differences over
/// every parameter.
///
/// Relative error is `|analytic - numeric| / max(|analytic| + |numeric|, 1e-7)`;
/// the floor keeps parameters with vanishing gradients from reporting noise.
pub fn grad_check(
    params: &MlpParams,
    obs: &[f64],
    epsilon: f64,
    target: GradCheckTarget,
) -> Result<f64> {
    ensure!(
        (1e-7..=1e-3).contains(&epsilon),
        "epsilon {epsilon} outside [1e-7, 1e-3]"
    );
    let analytic = match target {
        GradCheckTarget::LogProb(a) => log_prob_gradient(params, obs, a)?.0,
        GradCheckTarget::Output(k) => {
            ensure!(k < params.output_dim(), "output {k} out of range");
            let mut g = vec![0.0; params.output_dim()];
            g[k] = 1.0;
            params.backprop(obs, &g)?
        }
    };
    let mut probe = params.clone();
    let mut worst: f64 = 0.0;
    for (i, a) in analytic.iter().enumerate() {
        let original = *probe.param_mut(i);
        *probe.param_mut(i) = original + epsilon;
        let plus = objective(&probe, obs, target)?;
        *probe.param_mut(i) = original - epsilon;
        let minus = objective(&probe, obs, target)?;
        *probe.param_mut(i) = original;
        let numeric = (plus - minus) / (2.0 * epsilon);
        let denom = (libm::fabs(*a) + libm::fabs(numeric)).max(1e-7);
        worst = worst.max(libm::fabs(a - numeric) / denom);
    }
    Ok(worst)
}

/// Stochastic policy backed by an [`MlpParams`] softmax head.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyActor {
    pub params: MlpParams,
    /// Play the most probable action instead of sampling.
    pub greedy: bool,
}

impl PolicyActor {
    pub fn new(params: MlpParams) -> Self {
        Self {
            params,
            greedy: false,
        }
    }
}

impl Actor for PolicyActor {
    fn act(&mut self, observation: &[f64], rng: &mut RngStream) -> Result<Decision> {
        let dist = forward_policy(&self.params, observation)?;
        let (action, log_prob) = if self.greedy {
            let a = dist.argmax();
            (a, dist.log_prob(a))
        } else {
            dist.sample(rng)
        };
        Ok(Decision { action, log_prob })
    }
}
