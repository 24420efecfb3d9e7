//! Task-level Q-learning: tabular and tile-coded variants.
//!
//! Both learners expose the same surface: epsilon-greedy action selection
//! with deterministic tie-breaking (lowest index), online one-step updates,
//! and a per-update report of TD statistics consumed by the advising-reward
//! functions.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

/// TD statistics from a single online update. `*_pre` values are computed on
/// the parameters before the update, `*_post` and `v_hat_obs` after it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateReport {
    pub delta_pre: f64,
    pub delta_post: f64,
    pub loss_pre: f64,
    pub loss_post: f64,
    /// Squared norm of the semi-gradient of the squared TD loss.
    pub grad_sq_norm: f64,
    /// Max-action value estimate at the updated observation, post-update.
    pub v_hat_obs: f64,
}

/// Greedy argmax with ties resolved to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

// ----- tabular ---------------------------------------------------------------

/// Zero-initialized lookup table over (observation, action).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TabularQ {
    table: BTreeMap<usize, Vec<f64>>,
    actions: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
}

impl TabularQ {
    pub fn new(actions: usize, alpha: f64, gamma: f64, epsilon: f64) -> Self {
        TabularQ {
            table: BTreeMap::new(),
            actions,
            alpha,
            gamma,
            epsilon,
        }
    }

    fn row(&self, obs: usize) -> Vec<f64> {
        self.table
            .get(&obs)
            .cloned()
            .unwrap_or_else(|| vec![0.0; self.actions])
    }

    fn row_mut(&mut self, obs: usize) -> &mut Vec<f64> {
        let actions = self.actions;
        self.table.entry(obs).or_insert_with(|| vec![0.0; actions])
    }
}

// ----- tile coded --------------------------------------------------------------

/// Linear function approximation over overlapping tilings of the observation
/// coordinates. Each tiling is offset by a distinct per-dimension phase so
/// that tile boundaries interleave; with one tiling of unit-width tiles the
/// learner degenerates to a lookup table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TileCodedQ {
    dims: Vec<usize>,
    tile_width: usize,
    tilings: usize,
    tiles_per_dim: Vec<usize>,
    tiles_per_tiling: usize,
    /// Layout: weights[tiling][tile * actions + action].
    weights: Vec<Vec<f64>>,
    actions: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
}

impl TileCodedQ {
    pub fn new(
        dims: Vec<usize>,
        tilings: usize,
        tile_width: usize,
        actions: usize,
        alpha: f64,
        gamma: f64,
        epsilon: f64,
    ) -> Self {
        assert!(tilings >= 1 && tile_width >= 1 && !dims.is_empty());
        let tiles_per_dim: Vec<usize> = dims
            .iter()
            .map(|&d| (d - 1 + tile_width - 1) / tile_width + 1)
            .collect();
        let tiles_per_tiling = tiles_per_dim.iter().product();
        let weights = vec![vec![0.0; tiles_per_tiling * actions]; tilings];
        TileCodedQ {
            dims,
            tile_width,
            tilings,
            tiles_per_dim,
            tiles_per_tiling,
            weights,
            actions,
            alpha,
            gamma,
            epsilon,
        }
    }

    fn coords(&self, obs: usize) -> Vec<usize> {
        let mut rest = obs;
        self.dims
            .iter()
            .map(|&d| {
                let c = rest % d;
                rest /= d;
                c
            })
            .collect()
    }

    /// Offset phase of a tiling in a dimension, in whole cells. Enumerates
    /// base-`tile_width` digits of the tiling index so phases differ across
    /// dimensions.
    fn offset(&self, tiling: usize, dim: usize) -> usize {
        (tiling / self.tile_width.pow(dim as u32)) % self.tile_width
    }

    /// Flat index of the active tile of one tiling.
    fn active_tile(&self, tiling: usize, coords: &[usize]) -> usize {
        let mut idx = 0;
        let mut stride = 1;
        for (d, &c) in coords.iter().enumerate() {
            let t = (c + self.offset(tiling, d)) / self.tile_width;
            idx += t * stride;
            stride *= self.tiles_per_dim[d];
        }
        idx
    }

    fn q_one(&self, coords: &[usize], action: usize) -> f64 {
        (0..self.tilings)
            .map(|t| self.weights[t][self.active_tile(t, coords) * self.actions + action])
            .sum()
    }

    fn q_row(&self, obs: usize) -> Vec<f64> {
        let coords = self.coords(obs);
        (0..self.actions).map(|a| self.q_one(&coords, a)).collect()
    }
}

// ----- unified learner ----------------------------------------------------------

/// A task-level learner of either representation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Learner {
    Tabular(TabularQ),
    TileCoded(TileCodedQ),
}

impl Learner {
    pub fn action_count(&self) -> usize {
        match self {
            Learner::Tabular(l) => l.actions,
            Learner::TileCoded(l) => l.actions,
        }
    }

    pub fn epsilon(&self) -> f64 {
        match self {
            Learner::Tabular(l) => l.epsilon,
            Learner::TileCoded(l) => l.epsilon,
        }
    }

    pub fn set_epsilon(&mut self, epsilon: f64) {
        match self {
            Learner::Tabular(l) => l.epsilon = epsilon,
            Learner::TileCoded(l) => l.epsilon = epsilon,
        }
    }

    pub fn gamma(&self) -> f64 {
        match self {
            Learner::Tabular(l) => l.gamma,
            Learner::TileCoded(l) => l.gamma,
        }
    }

    /// Q-values for all actions at an observation.
    pub fn q_values(&self, obs: usize) -> Vec<f64> {
        match self {
            Learner::Tabular(l) => l.row(obs),
            Learner::TileCoded(l) => l.q_row(obs),
        }
    }

    /// Greedy action (ties to the lowest index).
    pub fn greedy(&self, obs: usize) -> usize {
        argmax(&self.q_values(obs))
    }

    /// Epsilon-greedy selection. With epsilon zero no randomness is consumed,
    /// so greedy evaluation leaves rng streams untouched.
    pub fn act<R: Rng + ?Sized>(&self, obs: usize, rng: &mut R) -> usize {
        let eps = self.epsilon();
        if eps > 0.0 && rng.gen::<f64>() < eps {
            rng.gen_range(0..self.action_count())
        } else {
            self.greedy(obs)
        }
    }

    /// Max-action value estimate at an observation.
    pub fn value_estimate(&self, obs: usize) -> f64 {
        self.q_values(obs)
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// One-step online update on (obs, action, reward, next_obs). The target
    /// is `reward` when done, otherwise `reward + gamma * max_a Q(next_obs)`.
    pub fn update(
        &mut self,
        obs: usize,
        action: usize,
        reward: f64,
        next_obs: usize,
        done: bool,
    ) -> UpdateReport {
        let (gamma, alpha) = match self {
            Learner::Tabular(l) => (l.gamma, l.alpha),
            Learner::TileCoded(l) => (l.gamma, l.alpha),
        };
        let target_pre = if done {
            reward
        } else {
            reward + gamma * self.value_estimate(next_obs)
        };
        let delta_pre = target_pre - self.q_values(obs)[action];

        let active_features = match self {
            Learner::Tabular(l) => {
                l.row_mut(obs)[action] += alpha * delta_pre;
                1
            }
            Learner::TileCoded(l) => {
                let coords = l.coords(obs);
                let step = alpha / l.tilings as f64;
                for t in 0..l.tilings {
                    let idx = l.active_tile(t, &coords) * l.actions + action;
                    l.weights[t][idx] += step * delta_pre;
                }
                l.tilings
            }
        };

        let target_post = if done {
            reward
        } else {
            reward + gamma * self.value_estimate(next_obs)
        };
        let delta_post = target_post - self.q_values(obs)[action];
        UpdateReport {
            delta_pre,
            delta_post,
            loss_pre: delta_pre * delta_pre,
            loss_post: delta_post * delta_post,
            grad_sq_norm: 4.0 * delta_pre * delta_pre * active_features as f64,
            v_hat_obs: self.value_estimate(obs),
        }
    }
}
