//! Environment abstraction and episode execution shared by both models.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{contract, ensure, Result};
use crate::rng::RngStream;

/// Per-agent feature vector. Binary features are encoded as `0.0`/`1.0`.
pub type Observation = Vec<f64>;

/// Outcome of one decision period.
#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub observations: Vec<Observation>,
    pub rewards: Vec<f64>,
    pub done: bool,
    /// Environment-level summary values, aligned with
    /// [`Environment::summary_columns`].
    pub summary: Vec<f64>,
}

/// A multi-agent environment with simultaneous decisions.
///
/// `num_agents` counts the externally controlled agents only. Default-model
/// agents living inside the environment are part of its dynamics.
pub trait Environment {
    fn num_agents(&self) -> usize;
    fn observation_dim(&self) -> usize;
    fn num_actions(&self) -> usize;
    /// Names of the values reported in [`StepResult::summary`].
    fn summary_columns(&self) -> Vec<String>;
    /// JSON snapshot of the configuration, stored in traces.
    fn describe(&self) -> String;
    /// Reinitializes all internal state from `seed` and returns the initial
    /// observations.
    fn reset(&mut self, seed: u64) -> Vec<Observation>;
    /// Advances one decision period. Calling this before `reset`, after the
    /// episode is done, or with the wrong number of actions is a contract
    /// violation.
    fn step(&mut self, actions: &[usize]) -> Result<StepResult>;
}

/// An action together with the log-probability the actor assigned to it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decision {
    pub action: usize,
    pub log_prob: f64,
}

/// Anything that maps an observation to an action.
pub trait Actor {
    fn act(&mut self, observation: &[f64], rng: &mut RngStream) -> Result<Decision>;
}

impl<A: Actor + ?Sized> Actor for &mut A {
    fn act(&mut self, observation: &[f64], rng: &mut RngStream) -> Result<Decision> {
        (**self).act(observation, rng)
    }
}

impl<A: Actor + ?Sized> Actor for Box<A> {
    fn act(&mut self, observation: &[f64], rng: &mut RngStream) -> Result<Decision> {
        (**self).act(observation, rng)
    }
}

/// Always plays the same action.
#[derive(Clone, Copy, Debug)]
pub struct FixedActor(pub usize);

impl Actor for FixedActor {
    fn act(&mut self, _: &[f64], _: &mut RngStream) -> Result<Decision> {
        Ok(Decision {
            action: self.0,
            log_prob: 0.0,
        })
    }
}

/// Everything an observer needs to turn one step into transitions.
#[derive(Clone, Debug)]
pub struct StepRecord<'a> {
    pub t: usize,
    pub observations: &'a [Observation],
    pub decisions: &'a [Decision],
    pub rewards: &'a [f64],
    pub next_observations: &'a [Observation],
    /// True on the environment's terminal step or the last step of the
    /// horizon.
    pub done: bool,
    pub summary: &'a [f64],
}

/// One row of an [`EpisodeTrace`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub summary: Vec<f64>,
}

/// Replayable record of one episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub config: String,
    pub seed: u64,
    pub horizon: usize,
    pub num_agents: usize,
    pub summary_columns: Vec<String>,
    pub steps: Vec<TraceStep>,
}

impl EpisodeTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Values of one summary column over the episode.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.summary_columns.iter().position(|c| c == name)?;
        Some(self.steps.iter().map(|s| s.summary[idx]).collect())
    }

    /// Mean per-step reward of each agent.
    pub fn mean_rewards(&self) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.num_agents];
        for step in &self.steps {
            for (o, r) in out.iter_mut().zip(&step.rewards) {
                *o += r;
            }
        }
        let n = self.steps.len().max(1) as f64;
        out.iter_mut().for_each(|o| *o /= n);
        out
    }
}

/// Runs one episode and records the trace.
pub fn run_episode<E, A>(
    env: &mut E,
    actors: &mut [A],
    horizon: usize,
    seed: u64,
) -> Result<EpisodeTrace>
where
    E: Environment + ?Sized,
    A: Actor,
{
    run_episode_with(env, actors, horizon, seed, |_| Ok(()))
}

/// Runs one episode, handing every step to `observer` before the next one.
///
/// The environment is reset with `seed`; agent `i` samples from the stream
/// `"episode/agent-{i}"` derived from the same seed.
pub fn run_episode_with<E, A, F>(
    env: &mut E,
    actors: &mut [A],
    horizon: usize,
    seed: u64,
    mut observer: F,
) -> Result<EpisodeTrace>
where
    E: Environment + ?Sized,
    A: Actor,
    F: FnMut(&StepRecord<'_>) -> Result<()>,
{
    ensure!(horizon >= 1, "horizon must be at least 1");
    let n = env.num_agents();
    ensure!(
        actors.len() == n,
        "environment expects {n} agents, got {} actors",
        actors.len()
    );
    let mut root = RngStream::new(seed, "episode");
    let mut agent_rngs = (0..n)
        .map(|i| root.fork(&format!("agent-{i}")))
        .collect::<Result<Vec<_>>>()?;

    let mut trace = EpisodeTrace {
        config: env.describe(),
        seed,
        horizon,
        num_agents: n,
        summary_columns: env.summary_columns(),
        steps: Vec::with_capacity(horizon),
    };
    let mut observations = env.reset(seed);
    let mut decisions = Vec::with_capacity(n);
    for t in 0..horizon {
        decisions.clear();
        for ((actor, obs), rng) in actors.iter_mut().zip(&observations).zip(&mut agent_rngs) {
            decisions.push(actor.act(obs, rng)?);
        }
        let actions: Vec<usize> = decisions.iter().map(|d| d.action).collect();
        let result = env.step(&actions)?;
        if result.observations.len() != n || result.rewards.len() != n {
            return Err(contract!(
                "environment returned {} observations and {} rewards for {n} agents",
                result.observations.len(),
                result.rewards.len()
            ));
        }
        let done = result.done || t + 1 == horizon;
        observer(&StepRecord {
            t,
            observations: &observations,
            decisions: &decisions,
            rewards: &result.rewards,
            next_observations: &result.observations,
            done,
            summary: &result.summary,
        })?;
        trace.steps.push(TraceStep {
            actions,
            rewards: result.rewards,
            summary: result.summary,
        });
        observations = result.observations;
        if result.done {
            break;
        }
    }
    Ok(trace)
}

#[cfg(test)]
pub(crate) mod testenv {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    /// Counts steps; reward is the action id; done after `limit` steps.
    pub struct Counter {
        pub agents: usize,
        pub limit: usize,
        pub t: usize,
        pub done: bool,
        pub ready: bool,
    }

    impl Environment for Counter {
        fn num_agents(&self) -> usize {
            self.agents
        }
        fn observation_dim(&self) -> usize {
            1
        }
        fn num_actions(&self) -> usize {
            2
        }
        fn summary_columns(&self) -> Vec<String> {
            vec!["t".to_string()]
        }
        fn describe(&self) -> String {
            "{}".to_string()
        }
        fn reset(&mut self, _seed: u64) -> Vec<Observation> {
            self.t = 0;
            self.done = false;
            self.ready = true;
            vec![vec![0.0]; self.agents]
        }
        fn step(&mut self, actions: &[usize]) -> Result<StepResult> {
            ensure!(self.ready && !self.done, "step outside an episode");
            ensure!(actions.len() == self.agents, "wrong action count");
            self.t += 1;
            self.done = self.t >= self.limit;
            Ok(StepResult {
                observations: vec![vec![self.t as f64]; self.agents],
                rewards: actions.iter().map(|&a| a as f64).collect(),
                done: self.done,
                summary: vec![self.t as f64],
            })
        }
    }
}
