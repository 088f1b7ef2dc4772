//! The minority game with strategy-book default agents.
//!
//! Seats `0..n_agents` are all players; the seats listed in `rl_agent_ids`
//! are driven from outside through [`Environment::step`], the rest use the
//! default model. Everybody counts towards attendance.

mod cycle;
mod strategy;

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use cycle::{find_cycle, matches_pattern, Cycle};
pub use strategy::{draw_strategy_book, update_scores, BasicAgent, HistoryWindow, StrategyTable};

use crate::error::{contract, ensure, Result};
use crate::rng::RngStream;
use crate::sim::{Environment, Observation, StepResult};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GameConfig {
    pub n_agents: usize,
    pub memory_m: usize,
    pub strategies_k: usize,
    pub horizon: usize,
    /// Seats controlled by learners, in the order their actions are passed.
    pub rl_agent_ids: Vec<usize>,
    /// Number of past winners shown to learners.
    pub rl_window: usize,
}

impl Default for GameConfig {
    fn default() -> Self {
        Self {
            n_agents: 301,
            memory_m: 2,
            strategies_k: 2,
            horizon: 500,
            rl_agent_ids: vec![0],
            rl_window: 3,
        }
    }
}

impl GameConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.n_agents >= 2, "a game needs at least 2 agents");
        ensure!(self.memory_m >= 1, "memory must be at least 1");
        ensure!(self.memory_m <= 24, "memory {} is too large", self.memory_m);
        ensure!(self.strategies_k >= 1, "agents need at least one strategy");
        ensure!(self.rl_window >= 1, "observation window must be at least 1");
        ensure!(self.horizon >= 1, "horizon must be at least 1");
        let mut ids = self.rl_agent_ids.clone();
        ids.sort_unstable();
        ids.dedup();
        ensure!(ids.len() == self.rl_agent_ids.len(), "duplicate learner seat");
        ensure!(
            ids.last().is_none_or(|&i| i < self.n_agents),
            "learner seat outside 0..{}",
            self.n_agents
        );
        Ok(())
    }

    pub fn history_len(&self) -> usize {
        self.memory_m.max(self.rl_window)
    }
}

/// Minority group of one step. On an exact split the coin decides and the
/// tie flag is set.
pub fn minority_outcome(actions: &[u8], coin: &mut RngStream) -> (u8, bool) {
    let ones = actions.iter().filter(|&&a| a == 1).count();
    let zeros = actions.len() - ones;
    match ones.cmp(&zeros) {
        core::cmp::Ordering::Less => (1, false),
        core::cmp::Ordering::Greater => (0, false),
        core::cmp::Ordering::Equal => (coin.below(2) as u8, true),
    }
}

/// Action of the highest-scoring table at the `m` newest winners.
pub fn select_basic_action(agent: &BasicAgent, history: &HistoryWindow, m: usize) -> Result<u8> {
    ensure!(history.len() >= m, "history of {} is shorter than memory {m}", history.len());
    Ok(agent.select(history, m))
}

/// The `window` newest winners, newest first.
pub fn mg_rl_observation(history: &HistoryWindow, window: usize) -> Result<Observation> {
    ensure!(
        history.len() >= window,
        "history of {} is shorter than window {window}",
        history.len()
    );
    Ok(history.newest(window).map(f64::from).collect())
}

/// 1 for joining the minority, 0 otherwise; ties pay nobody.
pub fn mg_reward(action: u8, minority: u8, tie: bool) -> f64 {
    if !tie && action == minority {
        1.0
    } else {
        0.0
    }
}

/// Everything that happened in one step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MgStep {
    /// Action of every seat.
    pub actions: Vec<u8>,
    /// Seats choosing 1.
    pub attendance: usize,
    pub minority: u8,
    pub tie: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Seat {
    Basic(usize),
    Learner(usize),
}

#[derive(Clone, Debug)]
struct Live {
    history: HistoryWindow,
    coin: RngStream,
    t: usize,
    done: bool,
}

#[derive(Clone, Debug)]
pub struct MinorityGame {
    config: GameConfig,
    population_seed: u64,
    basic: Vec<BasicAgent>,
    seats: Vec<Seat>,
    live: Option<Live>,
    last: Option<MgStep>,
}

impl MinorityGame {
    /// Draws the default population from `population_seed`. Each seat's book
    /// comes from its own fork, so moving learners around leaves the other
    /// books unchanged.
    pub fn new(config: GameConfig, population_seed: u64) -> Result<Self> {
        config.validate()?;
        let mut seats = Vec::with_capacity(config.n_agents);
        let mut basic_count = 0;
        for i in 0..config.n_agents {
            if let Some(j) = config.rl_agent_ids.iter().position(|&r| r == i) {
                seats.push(Seat::Learner(j));
            } else {
                seats.push(Seat::Basic(basic_count));
                basic_count += 1;
            }
        }
        let mut game = Self {
            config,
            population_seed,
            basic: Vec::with_capacity(basic_count),
            seats,
            live: None,
            last: None,
        };
        game.resample(population_seed)?;
        Ok(game)
    }

    /// Replaces every default agent's strategy book.
    pub fn resample(&mut self, population_seed: u64) -> Result<()> {
        let mut root = RngStream::new(population_seed, "mg/population");
        self.basic.clear();
        for (i, seat) in self.seats.iter().enumerate() {
            if let Seat::Basic(_) = seat {
                let mut rng = root.fork(&format!("agent-{i}"))?;
                self.basic.push(draw_strategy_book(
                    self.config.memory_m,
                    self.config.strategies_k,
                    &mut rng,
                ));
            }
        }
        self.population_seed = population_seed;
        self.live = None;
        self.last = None;
        Ok(())
    }

    /// Builds a game around an explicit default population, one book per
    /// non-learner seat in seat order.
    pub fn with_population(config: GameConfig, population: Vec<BasicAgent>) -> Result<Self> {
        let mut game = Self::new(config, 0)?;
        ensure!(
            population.len() == game.basic.len(),
            "{} books for {} default seats",
            population.len(),
            game.basic.len()
        );
        for b in &population {
            ensure!(
                b.strategies.len() == game.config.strategies_k
                    && b.strategies
                        .iter()
                        .all(|s| s.actions().len() == 1 << game.config.memory_m),
                "book does not match m={}, k={}",
                game.config.memory_m,
                game.config.strategies_k
            );
        }
        game.basic = population;
        Ok(game)
    }

    pub fn config(&self) -> &GameConfig {
        &self.config
    }

    pub fn population_seed(&self) -> u64 {
        self.population_seed
    }

    pub fn population(&self) -> &[BasicAgent] {
        &self.basic
    }

    pub fn history(&self) -> Option<&HistoryWindow> {
        self.live.as_ref().map(|l| &l.history)
    }

    pub fn last_step(&self) -> Option<&MgStep> {
        self.last.as_ref()
    }

    /// The game with every strategy output flipped.
    pub fn mirrored(&self) -> Self {
        let mut g = self.clone();
        g.basic = self.basic.iter().map(BasicAgent::flipped).collect();
        g.live = None;
        g.last = None;
        g
    }

    /// Starts an episode from an explicit warm-up history (newest first).
    pub fn reset_with_history(&mut self, seed: u64, history: HistoryWindow) -> Result<Vec<Observation>> {
        ensure!(
            history.len() == self.config.history_len(),
            "warm-up history must hold {} bits",
            self.config.history_len()
        );
        self.basic.iter_mut().for_each(BasicAgent::reset_scores);
        self.live = Some(Live {
            history,
            coin: RngStream::new(seed, "mg/ties"),
            t: 0,
            done: false,
        });
        self.last = None;
        self.observations()
    }

    fn observations(&self) -> Result<Vec<Observation>> {
        let live = self.live.as_ref().ok_or_else(|| contract!("game not reset"))?;
        let obs = mg_rl_observation(&live.history, self.config.rl_window)?;
        Ok(vec![obs; self.config.rl_agent_ids.len()])
    }

    /// Plays one step; `rl_actions` follow `rl_agent_ids` order.
    pub fn play(&mut self, rl_actions: &[usize]) -> Result<MgStep> {
        let m = self.config.memory_m;
        let live = self
            .live
            .as_mut()
            .ok_or_else(|| contract!("step before reset"))?;
        ensure!(!live.done, "step after the episode ended");
        ensure!(
            rl_actions.len() == self.config.rl_agent_ids.len(),
            "expected {} learner actions, got {}",
            self.config.rl_agent_ids.len(),
            rl_actions.len()
        );
        let mut actions = Vec::with_capacity(self.seats.len());
        for seat in &self.seats {
            actions.push(match *seat {
                Seat::Basic(b) => self.basic[b].select(&live.history, m),
                Seat::Learner(j) => {
                    let a = rl_actions[j];
                    ensure!(a < 2, "action {a} is not binary");
                    a as u8
                }
            });
        }
        let (minority, tie) = minority_outcome(&actions, &mut live.coin);
        update_scores(&mut self.basic, &live.history, m, minority);
        live.history.push(minority);
        live.t += 1;
        live.done = live.t >= self.config.horizon;
        let step = MgStep {
            attendance: actions.iter().filter(|&&a| a == 1).count(),
            actions,
            minority,
            tie,
        };
        self.last = Some(step.clone());
        Ok(step)
    }

    /// Fraction of default seats that won the step.
    pub fn default_win_rate(&self, step: &MgStep) -> f64 {
        if self.basic.is_empty() {
            return 0.0;
        }
        let wins = self
            .seats
            .iter()
            .zip(&step.actions)
            .filter(|(s, &a)| matches!(s, Seat::Basic(_)) && mg_reward(a, step.minority, step.tie) > 0.0)
            .count();
        wins as f64 / self.basic.len() as f64
    }
}

impl MinorityGame {
    /// Whether the default seats alone split evenly. Learners are then
    /// pivotal: whichever side they join becomes the majority.
    pub fn default_split_tie(&self, step: &MgStep) -> bool {
        let ones = self
            .seats
            .iter()
            .zip(&step.actions)
            .filter(|(s, &a)| matches!(s, Seat::Basic(_)) && a == 1)
            .count();
        !self.basic.is_empty() && 2 * ones == self.basic.len()
    }
}

impl Environment for MinorityGame {
    fn num_agents(&self) -> usize {
        self.config.rl_agent_ids.len()
    }

    fn observation_dim(&self) -> usize {
        self.config.rl_window
    }

    fn num_actions(&self) -> usize {
        2
    }

    fn summary_columns(&self) -> Vec<String> {
        ["attendance", "minority", "tie", "default_win_rate", "default_split_tie"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    fn describe(&self) -> String {
        serde_json::to_string(&self.config).unwrap_or_default()
    }

    fn reset(&mut self, seed: u64) -> Vec<Observation> {
        let mut rng = RngStream::new(seed, "mg/history");
        let history = HistoryWindow::random(self.config.history_len(), &mut rng);
        self.reset_with_history(seed, history)
            .expect("history length matches config")
    }

    fn step(&mut self, actions: &[usize]) -> Result<StepResult> {
        let step = self.play(actions)?;
        let rewards = actions
            .iter()
            .map(|&a| mg_reward(a as u8, step.minority, step.tie))
            .collect();
        let live = self.live.as_ref().expect("live after play");
        let summary = vec![
            step.attendance as f64,
            f64::from(step.minority),
            if step.tie { 1.0 } else { 0.0 },
            self.default_win_rate(&step),
            if self.default_split_tie(&step) { 1.0 } else { 0.0 },
        ];
        Ok(StepResult {
            observations: self.observations()?,
            rewards,
            done: live.done,
            summary,
        })
    }
}

#[cfg(test)]
mod tests;
