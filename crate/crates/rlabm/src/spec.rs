//! JSON experiment specs.

use std::path::{Path, PathBuf};

use rlabm_core::flu::{BehaviorParams, BurnInConfig, NetworkSpec, TransmissionParams};
use rlabm_core::mg::GameConfig;
use rlabm_core::rl::{Algorithm, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, HarnessResult};

pub const SCHEMA_VERSION: u32 = 1;

/// A complete, self-describing experiment.
///
/// `seed` has no default: a spec without one is rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub schema_version: u32,
    pub id: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub experiment: Experiment,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Experiment {
    MgSingleFixed(MgSingleSpec),
    MgResampled(MgResampledSpec),
    MgMulti(MgMultiSpec),
    FluSingle(FluSingleSpec),
    FluDegree(FluDegreeSpec),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::MgSingleFixed(_) => "mg_single_fixed",
            Experiment::MgResampled(_) => "mg_resampled",
            Experiment::MgMulti(_) => "mg_multi",
            Experiment::FluSingle(_) => "flu_single",
            Experiment::FluDegree(_) => "flu_degree",
        }
    }

    pub fn train(&self) -> &TrainConfig {
        match self {
            Experiment::MgSingleFixed(s) => &s.train,
            Experiment::MgResampled(s) => &s.train,
            Experiment::MgMulti(s) => &s.train,
            Experiment::FluSingle(s) => &s.train,
            Experiment::FluDegree(s) => &s.train,
        }
    }
}

fn mg_single_train() -> TrainConfig {
    // Gradients are summed over 500-step episodes, so step sizes are small.
    TrainConfig {
        actor_lr: 1e-3,
        critic_lr: 2e-3,
        entropy_coef: 1.0,
        ..TrainConfig::default()
    }
}

/// One learner against a population held fixed within each trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MgSingleSpec {
    pub game: GameConfig,
    pub train: TrainConfig,
    pub trials: usize,
    /// Greedy evaluation every this many epochs (and after the last one).
    pub eval_every: usize,
    /// Fresh populations the best trial's frozen policy is evaluated on.
    /// Zero skips the generalization sweep.
    pub generalization_populations: usize,
    /// Longest attendance period searched for.
    pub max_period: usize,
    /// Winner pattern looked for in the detected cycle, up to rotation and
    /// relabeling.
    pub pattern: Vec<u8>,
}

impl Default for MgSingleSpec {
    fn default() -> Self {
        Self {
            game: GameConfig::default(),
            train: mg_single_train(),
            trials: 10,
            eval_every: 10,
            generalization_populations: 100,
            max_period: 64,
            pattern: vec![1, 1, 1, 0, 0, 0, 1, 0],
        }
    }
}

/// One learner facing a freshly drawn population every epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MgResampledSpec {
    pub game: GameConfig,
    pub train: TrainConfig,
    pub rolling_window: usize,
}

impl Default for MgResampledSpec {
    fn default() -> Self {
        Self {
            game: GameConfig::default(),
            train: TrainConfig {
                epochs: 1000,
                ..mg_single_train()
            },
            rolling_window: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MgMultiSpec {
    pub game: GameConfig,
    pub train: TrainConfig,
    pub replicates: usize,
    /// Episodes played before and after training.
    pub eval_episodes: usize,
    /// Give every learner its own initial actor instead of one shared
    /// template.
    pub independent_init: bool,
}

impl Default for MgMultiSpec {
    fn default() -> Self {
        Self {
            game: GameConfig {
                n_agents: 10,
                memory_m: 3,
                strategies_k: 4,
                horizon: 200,
                rl_agent_ids: vec![0, 1, 2],
                rl_window: 3,
            },
            train: TrainConfig {
                algorithm: Algorithm::Mac,
                actor_lr: 1e-3,
                central_lr: 1e-4,
                epochs: 601,
                ..TrainConfig::default()
            },
            replicates: 10,
            eval_episodes: 20,
            independent_init: true,
        }
    }
}

/// Contact network and default-model parameters shared by the flu
/// experiments.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FluSetup {
    pub network: NetworkSpec,
    /// Edge list (`i,j,lambda`) used instead of generating `network`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub network_path: Option<PathBuf>,
    pub behavior: BehaviorParams,
    pub transmission: TransmissionParams,
    pub burn_in: BurnInConfig,
}


#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FluSingleSpec {
    pub flu: FluSetup,
    pub train: TrainConfig,
    /// Seasons per training episode.
    pub episode_seasons: usize,
    pub eval_seasons: usize,
    pub replicates: usize,
    /// Repeats every replicate with this vaccine efficacy and reports the
    /// learner's advantage there too.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ablation_efficacy: Option<f64>,
}

impl Default for FluSingleSpec {
    fn default() -> Self {
        Self {
            flu: FluSetup::default(),
            train: TrainConfig {
                epochs: 750,
                ..TrainConfig::default()
            },
            episode_seasons: 10,
            eval_seasons: 100,
            replicates: 10,
            ablation_efficacy: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FluDegreeSpec {
    pub flu: FluSetup,
    pub train: TrainConfig,
    pub ensemble_size: usize,
    pub episode_seasons: usize,
    pub eval_seasons: usize,
    pub replicates: usize,
    /// Independent post-training runs whose correlation matrices are
    /// averaged.
    pub sync_runs: usize,
    /// Monte Carlo draws for the independent-null band.
    pub null_draws: usize,
}

impl Default for FluDegreeSpec {
    fn default() -> Self {
        Self {
            flu: FluSetup::default(),
            train: TrainConfig {
                algorithm: Algorithm::Mac,
                actor_lr: 1e-2,
                central_lr: 1e-4,
                epochs: 1500,
                ..TrainConfig::default()
            },
            ensemble_size: 40,
            episode_seasons: 10,
            eval_seasons: 100,
            replicates: 3,
            sync_runs: 10,
            null_draws: 1000,
        }
    }
}

impl ExperimentSpec {
    /// Reads and validates a spec file.
    pub fn load(path: &Path) -> HarnessResult<Self> {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(HarnessError::MissingFile(path.to_path_buf()))
            }
            Err(e) => return Err(e.into()),
        };
        let spec = Self::from_json(&text).map_err(|e| match e {
            HarnessError::Config(msg) => HarnessError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        Ok(spec)
    }

    pub fn from_json(text: &str) -> HarnessResult<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| HarnessError::config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn validate(&self) -> HarnessResult<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(HarnessError::config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.id.is_empty()
            || !self
                .id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        {
            return Err(HarnessError::config(format!(
                "id {:?} must be non-empty and use only [A-Za-z0-9._-]",
                self.id
            )));
        }
        let cfg = |r: rlabm_core::Result<()>| r.map_err(|e| HarnessError::config(e.to_string()));
        cfg(self.experiment.train().validate())?;
        let positive = |name: &str, v: usize| {
            if v == 0 {
                Err(HarnessError::config(format!("{name} must be at least 1")))
            } else {
                Ok(())
            }
        };
        positive("train.epochs", self.experiment.train().epochs)?;
        match &self.experiment {
            Experiment::MgSingleFixed(s) => {
                cfg(s.game.validate())?;
                single_seat(&s.game)?;
                not_mac(&s.train)?;
                positive("trials", s.trials)?;
                positive("eval_every", s.eval_every)?;
                positive("max_period", s.max_period)?;
                if s.pattern.iter().any(|&b| b > 1) {
                    return Err(HarnessError::config("pattern must be binary"));
                }
            }
            Experiment::MgResampled(s) => {
                cfg(s.game.validate())?;
                single_seat(&s.game)?;
                not_mac(&s.train)?;
                positive("rolling_window", s.rolling_window)?;
            }
            Experiment::MgMulti(s) => {
                cfg(s.game.validate())?;
                positive("replicates", s.replicates)?;
                positive("eval_episodes", s.eval_episodes)?;
            }
            Experiment::FluSingle(s) => {
                validate_flu(&s.flu)?;
                not_mac(&s.train)?;
                positive("episode_seasons", s.episode_seasons)?;
                positive("eval_seasons", s.eval_seasons)?;
                positive("replicates", s.replicates)?;
                if let Some(e) = s.ablation_efficacy {
                    if !(0.0..=1.0).contains(&e) {
                        return Err(HarnessError::config("ablation_efficacy must lie in [0, 1]"));
                    }
                }
            }
            Experiment::FluDegree(s) => {
                validate_flu(&s.flu)?;
                positive("ensemble_size", s.ensemble_size)?;
                positive("episode_seasons", s.episode_seasons)?;
                positive("eval_seasons", s.eval_seasons)?;
                positive("replicates", s.replicates)?;
                positive("sync_runs", s.sync_runs)?;
                positive("null_draws", s.null_draws)?;
            }
        }
        Ok(())
    }

    /// Sets the dotted `path` (e.g. `experiment.train.actor_lr`) to `value`,
    /// parsed as JSON when possible and as a string otherwise.
    pub fn with_override(&self, path: &str, value: &str) -> HarnessResult<Self> {
        let mut json = serde_json::to_value(self)?;
        let parsed: serde_json::Value =
            serde_json::from_str(value).unwrap_or_else(|_| serde_json::Value::String(value.to_string()));
        let mut node = &mut json;
        let parts: Vec<&str> = path.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let obj = node
                .as_object_mut()
                .ok_or_else(|| HarnessError::config(format!("{path}: {part} is not inside an object")))?;
            if i + 1 == parts.len() {
                obj.insert(part.to_string(), parsed.clone());
                break;
            }
            node = obj
                .entry(part.to_string())
                .or_insert_with(|| serde_json::Value::Object(Default::default()));
        }
        let spec: Self =
            serde_json::from_value(json).map_err(|e| HarnessError::config(format!("{path}={value}: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }
}

fn single_seat(game: &GameConfig) -> HarnessResult<()> {
    if game.rl_agent_ids.len() != 1 {
        return Err(HarnessError::config("single-learner experiments need exactly one rl_agent_id"));
    }
    Ok(())
}

fn not_mac(train: &TrainConfig) -> HarnessResult<()> {
    if train.algorithm == Algorithm::Mac {
        return Err(HarnessError::config(
            "mac needs several learners; use reinforce, reinforce_baseline or actor_critic",
        ));
    }
    Ok(())
}

fn validate_flu(flu: &FluSetup) -> HarnessResult<()> {
    let cfg = |r: rlabm_core::Result<()>| r.map_err(|e| HarnessError::config(e.to_string()));
    cfg(flu.behavior.validate())?;
    cfg(flu.transmission.validate())?;
    if flu.burn_in.window == 0 || flu.burn_in.max_seasons == 0 {
        return Err(HarnessError::config("burn_in window and max_seasons must be at least 1"));
    }
    Ok(())
}
