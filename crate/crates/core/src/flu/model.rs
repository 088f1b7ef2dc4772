//! Season loop: decide, vaccinate, spread, evaluate.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{contract, ensure, Error, Result};
use crate::rng::RngStream;
use crate::sim::{Environment, Observation, StepResult};

use super::behavior::{combine_evaluations, evaluate_personal, evaluate_social, BehaviorParams, FluAgent, Outcome};
use super::network::ContactNetwork;
use super::transmission::{apply_vaccination, choose_seeds, run_sir_season, TransmissionParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BurnInConfig {
    pub window: usize,
    pub tol: f64,
    pub max_seasons: usize,
}

impl Default for BurnInConfig {
    fn default() -> Self {
        Self {
            window: 50,
            tol: 0.01,
            max_seasons: 500,
        }
    }
}

/// Aggregates of one season.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeasonOutcome {
    pub season: u64,
    pub coverage: f64,
    pub attack_rate: f64,
    pub n_immune: usize,
    pub outcomes: Vec<Outcome>,
}

/// Default-model population on a fixed contact network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluModel {
    pub network: ContactNetwork,
    pub agents: Vec<FluAgent>,
    pub behavior: BehaviorParams,
    pub transmission: TransmissionParams,
    /// Seasons completed so far.
    pub season: u64,
    pub last: Option<SeasonOutcome>,
}

/// Per-season randomness, one stream per pipeline phase.
struct SeasonStreams {
    decision: RngStream,
    vaccine: RngStream,
    seeding: RngStream,
    transmission: RngStream,
}

impl SeasonStreams {
    fn new(seed: u64) -> Result<Self> {
        let mut root = RngStream::new(seed, "flu/season");
        Ok(Self {
            decision: root.fork("decision")?,
            vaccine: root.fork("vaccine")?,
            seeding: root.fork("seeding")?,
            transmission: root.fork("transmission")?,
        })
    }
}

impl FluModel {
    pub fn new(network: ContactNetwork, behavior: BehaviorParams, transmission: TransmissionParams) -> Result<Self> {
        behavior.validate()?;
        transmission.validate()?;
        let agents = (0..network.nodes()).map(FluAgent::new).collect();
        Ok(Self {
            network,
            agents,
            behavior,
            transmission,
            season: 0,
            last: None,
        })
    }

    pub fn nodes(&self) -> usize {
        self.network.nodes()
    }

    /// Outcome shares of `node`'s alters last season, by
    /// [`Outcome::index`]; `None` for isolated nodes or before any season.
    pub fn alter_proportions(&self, node: usize) -> Option<[f64; 4]> {
        let last = self.last.as_ref()?;
        let nbrs = self.network.neighbors(node);
        if nbrs.is_empty() {
            return None;
        }
        let mut p = [0.0; 4];
        for &(nb, _) in nbrs {
            p[last.outcomes[nb].index()] += 1.0;
        }
        let k = nbrs.len() as f64;
        p.iter_mut().for_each(|x| *x /= k);
        Some(p)
    }

    /// Runs one season. `overrides` fixes the decisions of externally
    /// controlled nodes; those nodes keep their experience unchanged.
    pub fn season_step(&mut self, overrides: &[(usize, bool)], seed: u64) -> Result<SeasonOutcome> {
        let n = self.nodes();
        for &(node, _) in overrides {
            ensure!(node < n, "controlled node {node} outside the network");
        }
        let mut rng = SeasonStreams::new(seed)?;

        // Every agent draws its decision uniform, controlled or not.
        let mut vaccinated: Vec<bool> = self
            .agents
            .iter()
            .map(|a| {
                let u = rng.decision.uniform();
                u < a.vaccination_probability(&self.behavior)
            })
            .collect();
        let mut controlled = vec![false; n];
        for &(node, v) in overrides {
            vaccinated[node] = v;
            controlled[node] = true;
        }

        let t = &self.transmission;
        let efficacy = if t.efficacy_spread > 0.0 {
            t.efficacy + t.efficacy_spread * (2.0 * rng.vaccine.uniform() - 1.0)
        } else {
            t.efficacy
        };
        let immune = apply_vaccination(&vaccinated, efficacy, &mut rng.vaccine);
        let seeds = choose_seeds(&immune, t.seed_infections, &mut rng.seeding);
        let epidemic = run_sir_season(&self.network, &immune, &seeds, t, &mut rng.transmission)?;

        let outcomes: Vec<Outcome> = vaccinated
            .iter()
            .zip(&epidemic.infected)
            .map(|(&v, &i)| Outcome {
                vaccinated: v,
                infected: i,
            })
            .collect();
        let outcome = SeasonOutcome {
            season: self.season,
            coverage: vaccinated.iter().filter(|&&v| v).count() as f64 / n as f64,
            attack_rate: epidemic.attack_rate,
            n_immune: immune.iter().filter(|&&x| x).count(),
            outcomes,
        };
        self.last = Some(outcome.clone());
        self.season += 1;

        let b = &self.behavior;
        #[allow(clippy::needless_range_loop)]
        for node in 0..n {
            let o = outcome.outcomes[node];
            self.agents[node].record(o);
            if controlled[node] {
                continue;
            }
            let pe = evaluate_personal(o, &b.delta);
            let sn = match self.alter_proportions(node) {
                Some(p) => evaluate_social(&p, &b.delta)?,
                None => pe,
            };
            let delta = combine_evaluations(pe, sn, b.omega_pe, b.omega_sn);
            self.agents[node].learn(delta, b.s);
        }
        Ok(outcome)
    }

    /// Observation of `node`: own vaccination and infection last season, the
    /// four alter outcome shares, and a constant-zero HCW slot.
    pub fn observation(&self, node: usize) -> Result<Observation> {
        let last = self
            .last
            .as_ref()
            .ok_or_else(|| contract!("no completed season to observe"))?;
        let o = last.outcomes[node];
        let mut obs = vec![f64::from(u8::from(o.vaccinated)), f64::from(u8::from(o.infected))];
        // An isolated node sees its own outcome as its neighborhood.
        let p = self.alter_proportions(node).unwrap_or_else(|| {
            let mut p = [0.0; 4];
            p[o.index()] = 1.0;
            p
        });
        obs.extend(p);
        obs.push(0.0);
        Ok(obs)
    }
}

pub const FLU_OBS_DIM: usize = 7;

/// Runs default-model seasons until coverage and attack rate are stationary:
/// the means over the last `window` seasons and the `window` seasons before
/// them differ by less than `tol`. Returns the number of seasons run.
pub fn burn_in(model: &mut FluModel, cfg: &BurnInConfig, seed: u64) -> Result<usize> {
    ensure!(cfg.window >= 10, "burn-in window must be at least 10 seasons");
    let mut rng = RngStream::new(seed, "flu/burn-in");
    let mut coverage = Vec::new();
    let mut attack = Vec::new();
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let w = cfg.window;
    let (mut dc, mut da) = (f64::INFINITY, f64::INFINITY);
    while coverage.len() < cfg.max_seasons {
        let o = model.season_step(&[], rng.next_seed())?;
        coverage.push(o.coverage);
        attack.push(o.attack_rate);
        let t = coverage.len();
        if cfg.tol.is_infinite() && t >= w {
            return Ok(t);
        }
        if t >= 2 * w {
            dc = (mean(&coverage[t - w..]) - mean(&coverage[t - 2 * w..t - w])).abs();
            da = (mean(&attack[t - w..]) - mean(&attack[t - 2 * w..t - w])).abs();
            if dc < cfg.tol && da < cfg.tol {
                return Ok(t);
            }
        }
    }
    Err(Error::BurnInExceeded {
        max_seasons: cfg.max_seasons,
        coverage_delta: dc,
        attack_delta: da,
    })
}

/// One season per step; learners control the vaccination decision of
/// `rl_nodes` and earn 1 for every season they stay uninfected.
#[derive(Clone, Debug)]
pub struct FluEnv {
    start: FluModel,
    model: FluModel,
    rl_nodes: Vec<usize>,
    horizon: usize,
    /// When set, the learner nodes follow the default model instead and the
    /// actions passed to `step` are ignored.
    autonomous: bool,
    seeds: Option<RngStream>,
    t: usize,
    done: bool,
}

impl FluEnv {
    /// `start` must have completed at least one season (normally the
    /// burned-in state).
    pub fn new(start: FluModel, rl_nodes: Vec<usize>, horizon: usize) -> Result<Self> {
        ensure!(start.last.is_some(), "starting state has no completed season");
        ensure!(horizon >= 1, "horizon must be at least 1");
        let mut sorted = rl_nodes.clone();
        sorted.sort_unstable();
        sorted.dedup();
        ensure!(sorted.len() == rl_nodes.len(), "duplicate learner node");
        ensure!(
            sorted.last().is_none_or(|&i| i < start.nodes()),
            "learner node outside the network"
        );
        Ok(Self {
            model: start.clone(),
            start,
            rl_nodes,
            horizon,
            autonomous: false,
            seeds: None,
            t: 0,
            done: false,
        })
    }

    /// The same environment with learner nodes handed back to the default
    /// model.
    pub fn autonomous_twin(&self) -> Self {
        let mut twin = self.clone();
        twin.autonomous = true;
        twin.seeds = None;
        twin
    }

    pub fn rl_nodes(&self) -> &[usize] {
        &self.rl_nodes
    }

    pub fn model(&self) -> &FluModel {
        &self.model
    }

    pub fn start(&self) -> &FluModel {
        &self.start
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn set_horizon(&mut self, horizon: usize) {
        self.horizon = horizon.max(1);
    }

    fn observations(&self) -> Result<Vec<Observation>> {
        self.rl_nodes.iter().map(|&n| self.model.observation(n)).collect()
    }
}

impl Environment for FluEnv {
    fn num_agents(&self) -> usize {
        self.rl_nodes.len()
    }

    fn observation_dim(&self) -> usize {
        FLU_OBS_DIM
    }

    fn num_actions(&self) -> usize {
        2
    }

    fn summary_columns(&self) -> Vec<String> {
        ["coverage", "attack_rate", "n_immune", "rl_mean_reward"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    fn describe(&self) -> String {
        format!(
            "{{\"nodes\":{},\"edges\":{},\"rl_nodes\":{:?},\"horizon\":{},\"autonomous\":{},\"behavior\":{},\"transmission\":{}}}",
            self.start.nodes(),
            self.start.network.edges().len(),
            self.rl_nodes,
            self.horizon,
            self.autonomous,
            serde_json::to_string(&self.start.behavior).unwrap_or_default(),
            serde_json::to_string(&self.start.transmission).unwrap_or_default(),
        )
    }

    fn reset(&mut self, seed: u64) -> Vec<Observation> {
        self.model = self.start.clone();
        self.seeds = Some(RngStream::new(seed, "flu/episode"));
        self.t = 0;
        self.done = false;
        self.observations().expect("start state has a completed season")
    }

    fn step(&mut self, actions: &[usize]) -> Result<StepResult> {
        let seeds = self.seeds.as_mut().ok_or_else(|| contract!("step before reset"))?;
        ensure!(!self.done, "step after the episode ended");
        ensure!(
            actions.len() == self.rl_nodes.len(),
            "expected {} actions, got {}",
            self.rl_nodes.len(),
            actions.len()
        );
        ensure!(actions.iter().all(|&a| a < 2), "actions must be 0 (abstain) or 1 (vaccinate)");
        let season_seed = seeds.next_seed();
        let overrides: Vec<(usize, bool)> = if self.autonomous {
            Vec::new()
        } else {
            self.rl_nodes.iter().zip(actions).map(|(&n, &a)| (n, a == 1)).collect()
        };
        let outcome = self.model.season_step(&overrides, season_seed)?;
        let rewards: Vec<f64> = self
            .rl_nodes
            .iter()
            .map(|&n| if outcome.outcomes[n].infected { 0.0 } else { 1.0 })
            .collect();
        self.t += 1;
        self.done = self.t >= self.horizon;
        let mean_reward = if rewards.is_empty() {
            0.0
        } else {
            rewards.iter().sum::<f64>() / rewards.len() as f64
        };
        Ok(StepResult {
            observations: self.observations()?,
            summary: vec![
                outcome.coverage,
                outcome.attack_rate,
                outcome.n_immune as f64,
                mean_reward,
            ],
            rewards,
            done: self.done,
        })
    }
}
