use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

/// Joint observation/action snapshot of every learning agent at one step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointStep {
    /// One action id per learning agent.
    pub actions: Vec<usize>,
    /// Concatenation of every learning agent's observation.
    pub observations: Vec<f64>,
}

/// Centralized-training fields of a transition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointFields {
    pub current: JointStep,
    /// Absent only on the final step of an episode.
    pub next: Option<JointStep>,
}

/// `(s_t, a_t, log pi_t, r_t, s_{t+1}, done)` for one agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub agent: usize,
    pub obs: Vec<f64>,
    pub action: usize,
    pub log_prob: f64,
    pub reward: f64,
    pub next_obs: Option<Vec<f64>>,
    pub done: bool,
    pub joint: Option<JointFields>,
}

/// Time-ordered transitions of one agent for one episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperienceBuffer {
    agent: usize,
    multi_agent: bool,
    capacity: usize,
    transitions: Vec<Transition>,
}

impl ExperienceBuffer {
    pub fn new(agent: usize, capacity: usize, multi_agent: bool) -> Self {
        Self {
            agent,
            multi_agent,
            capacity,
            transitions: Vec::with_capacity(capacity.min(4096)),
        }
    }

    pub fn agent(&self) -> usize {
        self.agent
    }

    pub fn is_multi_agent(&self) -> bool {
        self.multi_agent
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn transitions_mut(&mut self) -> &mut [Transition] {
        &mut self.transitions
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.transitions.iter().map(|t| t.reward).collect()
    }

    pub fn mean_reward(&self) -> f64 {
        if self.transitions.is_empty() {
            return 0.0;
        }
        self.transitions.iter().map(|t| t.reward).sum::<f64>() / self.transitions.len() as f64
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        ensure!(
            self.transitions.len() < self.capacity,
            "buffer for agent {} is full ({} transitions)",
            self.agent,
            self.capacity
        );
        ensure!(
            t.agent == self.agent,
            "transition for agent {} pushed into buffer of agent {}",
            t.agent,
            self.agent
        );
        ensure!(
            t.log_prob <= 0.0,
            "log-probability {} is positive",
            t.log_prob
        );
        ensure!(
            t.joint.is_some() == self.multi_agent,
            "joint fields must be present exactly in multi-agent mode"
        );
        ensure!(
            self.transitions.last().is_none_or(|last| !last.done),
            "transition appended after a terminal one"
        );
        self.transitions.push(t);
        Ok(())
    }

    pub fn clear(&mut self) {
        self.transitions.clear();
    }
}
