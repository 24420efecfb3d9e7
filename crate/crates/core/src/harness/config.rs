//! Experiment configuration: every knob of a run with defaults, TOML
//! loading, and generic key=value overrides.

use serde::{Deserialize, Serialize};

use crate::advising::AdvisingHyper;
use crate::envs::{DomainId, Env};
use crate::heuristics::HeuristicKind;
use crate::qlearn::{Learner, TabularQ, TileCodedQ};
use crate::rewards::RewardKind;
use crate::{Error, Result};

/// Full description of an experiment. A config plus a seed determines every
/// byte of a run's outputs. Count fields set to 0 mean "per-domain default".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Domain: "repeated", "hallway", or "room".
    pub domain: String,
    /// Algorithm: "none", "lectr" (reward from `reward`), "lectr_<reward>",
    /// or a heuristic name such as "importance_advising".
    pub algorithm: String,
    /// Advising reward kind for learned advising.
    pub reward: String,
    /// Base seed; multi-seed commands use seed, seed+1, ...
    pub seed: u64,
    /// Seed count for multi-seed commands.
    pub seeds: usize,
    /// Task-level episodes per teaching generation (0: 50/100/150 by domain).
    pub episodes: usize,
    /// Teaching generations for learned advising; each re-initializes the
    /// task learners, teaches for `episodes`, then updates advising policies.
    pub generations: usize,

    // Task learning.
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    /// "auto" (tabular for the repeated game, tile-coded for grids),
    /// "tabular", or "tile_coded".
    pub learner: String,
    pub tilings: usize,
    pub tile_width: usize,

    // Advising level.
    pub advising_lr: f64,
    /// Actor step size; kept below `advising_lr` so advising policies move
    /// slower than the critic that evaluates them.
    pub advising_actor_lr: f64,
    pub advising_gamma: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub polyak: f64,
    pub gumbel_temperature: f64,
    pub reservoir_capacity: usize,
    /// L2 penalty on advising actor logits.
    pub logit_reg: f64,
    /// Ceiling on advising update passes per teaching generation; passes
    /// otherwise equal the steps the generation collected.
    pub max_update_passes: usize,

    // Advising rewards.
    /// Communication cost per piece of advice.
    pub cost: f64,
    /// Threshold for the value-gain reward; unset derives it from
    /// no-teaching reference runs.
    pub veg_tau: Option<f64>,
    /// Fraction of the reference start-state value used when deriving tau.
    pub veg_fraction: f64,
    pub jvg_rollouts: usize,

    // Heuristic baselines.
    pub importance_threshold: f64,
    /// Shared advice budget for budgeted heuristics.
    pub budget: usize,
    /// Ad hoc advising probability parameter.
    pub upsilon: f64,

    // Expert teachers and heterogeneity.
    /// Pretraining episodes for expert teachers (0: 500/3000/6000 by domain).
    pub expert_episodes: usize,
    pub expert_epsilon: f64,
    /// Rotation applied to advised actions (0, 90, 180, 270; 0 = identity).
    pub rotation_degrees: usize,

    // Evaluation and transfer.
    pub eval_rollouts: usize,
    /// Mirror axis for transfer: "identity", "horizontal", "vertical", "both".
    pub flip: String,
    /// Output directory for artifacts.
    pub out: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            domain: "repeated".into(),
            algorithm: "lectr".into(),
            reward: "veg".into(),
            seed: 0,
            seeds: 10,
            episodes: 0,
            generations: 10,
            alpha: 0.1,
            gamma: 0.95,
            epsilon: 0.1,
            learner: "auto".into(),
            tilings: 4,
            tile_width: 2,
            advising_lr: 1e-3,
            advising_actor_lr: 1e-4,
            advising_gamma: 0.99,
            batch_size: 64,
            replay_capacity: 100_000,
            polyak: 0.01,
            gumbel_temperature: 1.0,
            reservoir_capacity: 1000,
            logit_reg: 1e-3,
            max_update_passes: 2000,
            cost: 0.0,
            veg_tau: None,
            veg_fraction: 0.8,
            jvg_rollouts: 10,
            importance_threshold: 0.01,
            budget: 100,
            upsilon: 0.5,
            expert_episodes: 0,
            expert_epsilon: 0.2,
            rotation_degrees: 0,
            eval_rollouts: 10,
            flip: "horizontal".into(),
            out: "results".into(),
        }
    }
}

/// What a run trains, resolved from the config's algorithm and reward names.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgorithmKind {
    None,
    Lectr(RewardKind),
    Heuristic(HeuristicKind),
}

impl AlgorithmKind {
    pub fn name(&self) -> String {
        match self {
            AlgorithmKind::None => "none".into(),
            AlgorithmKind::Lectr(r) => format!("lectr_{}", r.name()),
            AlgorithmKind::Heuristic(h) => h.name().into(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Applies one `key=value` override. Values parse as TOML scalars, with
    /// a bare-string fallback; unknown keys are rejected.
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<()> {
        let parsed: toml::Value = match format!("v = {value}").parse::<toml::Table>() {
            Ok(mut t) => t.remove("v").unwrap(),
            Err(_) => toml::Value::String(value.to_string()),
        };
        let mut table = toml::Table::try_from(&*self)
            .map_err(|e| Error::Config(format!("config serialization: {e}")))?;
        // veg_tau serializes away when unset; every other key must exist.
        if !table.contains_key(key) && key != "veg_tau" {
            return Err(Error::Config(format!("unknown config key '{key}'")));
        }
        table.insert(key.to_string(), parsed);
        *self = table
            .try_into()
            .map_err(|e| Error::Config(format!("invalid value for '{key}': {e}")))?;
        Ok(())
    }

    pub fn domain_id(&self) -> Result<DomainId> {
        DomainId::parse(&self.domain)
    }

    pub fn reward_kind(&self) -> Result<RewardKind> {
        RewardKind::parse(&self.reward)
    }

    /// Resolves an algorithm name, defaulting learned advising's reward to
    /// the config's. "lectr_<reward>" pins the reward in the name.
    pub fn parse_algorithm(&self, name: &str) -> Result<AlgorithmKind> {
        match name {
            "none" => Ok(AlgorithmKind::None),
            "lectr" => Ok(AlgorithmKind::Lectr(self.reward_kind()?)),
            other => {
                if let Some(reward) = other.strip_prefix("lectr_") {
                    Ok(AlgorithmKind::Lectr(RewardKind::parse(reward)?))
                } else {
                    Ok(AlgorithmKind::Heuristic(HeuristicKind::parse(other)?))
                }
            }
        }
    }

    pub fn algorithm_kind(&self) -> Result<AlgorithmKind> {
        self.parse_algorithm(&self.algorithm)
    }

    /// Phase length in episodes, falling back to the per-domain default.
    pub fn episodes_for(&self, domain: DomainId) -> usize {
        if self.episodes > 0 {
            return self.episodes;
        }
        match domain {
            DomainId::Repeated => 50,
            DomainId::Hallway => 100,
            DomainId::Room => 150,
        }
    }

    /// Expert pretraining length, falling back to the per-domain default.
    pub fn expert_episodes_for(&self, domain: DomainId) -> usize {
        if self.expert_episodes > 0 {
            return self.expert_episodes;
        }
        match domain {
            DomainId::Repeated => 500,
            DomainId::Hallway => 3000,
            DomainId::Room => 6000,
        }
    }

    /// Builds one fresh task learner for an environment.
    pub fn make_learner(&self, env: &Env) -> Result<Learner> {
        let tabular = || {
            Learner::Tabular(TabularQ::new(env.action_count(), self.alpha, self.gamma, self.epsilon))
        };
        let tile_coded = || -> Result<Learner> {
            Ok(Learner::TileCoded(TileCodedQ::new(
                env.obs_dims(),
                self.tilings,
                self.tile_width,
                env.action_count(),
                self.alpha,
                self.gamma,
                self.epsilon,
            )))
        };
        match self.learner.as_str() {
            "auto" => match env {
                Env::Repeated(_) => Ok(tabular()),
                Env::Grid(_) => tile_coded(),
            },
            "tabular" => Ok(tabular()),
            "tile_coded" => tile_coded(),
            other => Err(Error::Config(format!("unknown learner kind '{other}'"))),
        }
    }

    pub fn advising_hyper(&self) -> AdvisingHyper {
        AdvisingHyper {
            lr: self.advising_lr,
            actor_lr: self.advising_actor_lr,
            gamma: self.advising_gamma,
            gumbel_temperature: self.gumbel_temperature,
            batch_size: self.batch_size,
            replay_capacity: self.replay_capacity,
            polyak: self.polyak,
            reservoir_capacity: self.reservoir_capacity,
            logit_reg: self.logit_reg,
        }
    }

    /// Checks that every name field parses and every count is usable.
    pub fn validate(&self) -> Result<()> {
        self.domain_id()?;
        self.algorithm_kind()?;
        self.reward_kind()?;
        if self.generations == 0 {
            return Err(Error::Config("generations must be at least 1".into()));
        }
        if self.eval_rollouts == 0 || self.jvg_rollouts == 0 {
            return Err(Error::Config("rollout counts must be at least 1".into()));
        }
        if self.batch_size == 0 || self.replay_capacity == 0 || self.reservoir_capacity == 0 {
            return Err(Error::Config("buffer sizes must be at least 1".into()));
        }
        if self.max_update_passes == 0 {
            return Err(Error::Config("max_update_passes must be at least 1".into()));
        }
        if self.advising_lr <= 0.0 || self.advising_actor_lr <= 0.0 {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if !matches!(self.rotation_degrees, 0 | 90 | 180 | 270) {
            return Err(Error::Config(format!(
                "rotation_degrees must be one of 0/90/180/270, got {}",
                self.rotation_degrees
            )));
        }
        crate::envs::FlipAxis::parse(&self.flip)?;
        Ok(())
    }
}
