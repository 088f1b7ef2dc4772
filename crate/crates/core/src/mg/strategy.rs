use alloc::collections::VecDeque;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::rng::RngStream;

/// Recent winning groups, newest first.
///
/// The `m`-bit lookup index of a history is `sum_j bit_j << j`, where
/// `bit_0` is the most recent winner.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryWindow {
    bits: VecDeque<u8>,
    len: usize,
}

impl HistoryWindow {
    /// `len` uniform bits.
    pub fn random(len: usize, rng: &mut RngStream) -> Self {
        Self {
            bits: (0..len).map(|_| rng.below(2) as u8).collect(),
            len,
        }
    }

    /// Explicit bits, newest first.
    pub fn from_bits(bits: &[u8]) -> Self {
        Self {
            bits: bits.iter().map(|b| b & 1).collect(),
            len: bits.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bits(&self) -> impl Iterator<Item = u8> + '_ {
        self.bits.iter().copied()
    }

    pub fn newest(&self, n: usize) -> impl Iterator<Item = u8> + '_ {
        self.bits.iter().take(n).copied()
    }

    pub fn push(&mut self, winner: u8) {
        self.bits.push_front(winner & 1);
        self.bits.truncate(self.len);
    }

    pub fn index(&self, m: usize) -> usize {
        debug_assert!(m <= self.len);
        self.bits
            .iter()
            .take(m)
            .enumerate()
            .fold(0, |acc, (j, &b)| acc | (usize::from(b) << j))
    }

    /// The same window with every bit flipped.
    pub fn flipped(&self) -> Self {
        Self {
            bits: self.bits.iter().map(|b| b ^ 1).collect(),
            len: self.len,
        }
    }
}

/// One lookup table from `m`-bit histories to actions, plus its score.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyTable {
    actions: Vec<u8>,
    pub score: u64,
}

impl StrategyTable {
    pub fn random(m: usize, rng: &mut RngStream) -> Self {
        Self {
            actions: (0..1usize << m).map(|_| rng.below(2) as u8).collect(),
            score: 0,
        }
    }

    pub fn from_actions(actions: Vec<u8>) -> Self {
        debug_assert!(actions.len().is_power_of_two());
        Self { actions, score: 0 }
    }

    pub fn actions(&self) -> &[u8] {
        &self.actions
    }

    pub fn action(&self, history_index: usize) -> u8 {
        self.actions[history_index]
    }

    /// The table under relabeling of both groups: it answers the flipped
    /// history with the flipped action.
    pub fn flipped(&self) -> Self {
        let mask = self.actions.len() - 1;
        Self {
            actions: (0..self.actions.len()).map(|j| self.actions[j ^ mask] ^ 1).collect(),
            score: self.score,
        }
    }
}

/// Default minority-game player: `k` strategy tables scored by
/// counterfactual success.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasicAgent {
    pub strategies: Vec<StrategyTable>,
    /// Strategy the agent was seeded with.
    pub initial: usize,
}

impl BasicAgent {
    /// Action of the highest-scoring table at the current history; ties go
    /// to the lowest table index.
    pub fn select(&self, history: &HistoryWindow, m: usize) -> u8 {
        self.strategies[self.best()].action(history.index(m))
    }

    pub fn best(&self) -> usize {
        let mut best = 0;
        for (i, s) in self.strategies.iter().enumerate() {
            if s.score > self.strategies[best].score {
                best = i;
            }
        }
        best
    }

    /// Every table that would have picked `minority` at the pre-step
    /// history gains a point.
    pub fn update_scores(&mut self, pre_step_index: usize, minority: u8) {
        for s in &mut self.strategies {
            if s.action(pre_step_index) == minority {
                s.score += 1;
            }
        }
    }

    pub fn reset_scores(&mut self) {
        self.strategies.iter_mut().for_each(|s| s.score = 0);
    }

    pub fn flipped(&self) -> Self {
        Self {
            strategies: self.strategies.iter().map(StrategyTable::flipped).collect(),
            initial: self.initial,
        }
    }
}

/// `k` tables drawn i.i.d. with replacement, entries uniform on {0, 1},
/// one table marked as the initial strategy uniformly at random.
pub fn draw_strategy_book(m: usize, k: usize, rng: &mut RngStream) -> BasicAgent {
    let strategies = (0..k).map(|_| StrategyTable::random(m, rng)).collect();
    BasicAgent {
        strategies,
        initial: rng.below(k),
    }
}

/// Updates every table of every agent against the step's minority.
pub fn update_scores(agents: &mut [BasicAgent], pre_step: &HistoryWindow, m: usize, minority: u8) {
    let idx = pre_step.index(m);
    for a in agents {
        a.update_scores(idx, minority);
    }
}
