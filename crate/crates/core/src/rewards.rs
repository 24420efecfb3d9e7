//! Advising-level reward functions.
//!
//! Each teacher earns a directional reward for the advice it gave this step,
//! derived from its student's learning progress. Every variant is gated on
//! advice actually having been exchanged (zero otherwise) and pays a
//! communication cost per piece of advice.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::envs::Env;
use crate::qlearn::{Learner, UpdateReport};
use crate::{Error, Result};

/// The advising-reward variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    /// Joint value gain: change in the estimated joint start-state value.
    Jvg,
    /// Teacher's estimated advantage of its best action over the student's
    /// intended action.
    Qtr,
    /// Student's TD loss reduction across its update.
    Lg,
    /// Squared norm of the student's TD loss gradient.
    Lgg,
    /// Reduction in the magnitude of the student's TD error.
    Tdg,
    /// Indicator that the student's value estimate exceeds a threshold.
    Veg,
    /// The environment reward itself (known counterexample).
    TaskReward,
}

impl RewardKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "jvg" => Ok(RewardKind::Jvg),
            "qtr" => Ok(RewardKind::Qtr),
            "lg" => Ok(RewardKind::Lg),
            "lgg" => Ok(RewardKind::Lgg),
            "tdg" => Ok(RewardKind::Tdg),
            "veg" => Ok(RewardKind::Veg),
            "task_reward" => Ok(RewardKind::TaskReward),
            other => Err(Error::Config(format!("unknown reward kind '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            RewardKind::Jvg => "jvg",
            RewardKind::Qtr => "qtr",
            RewardKind::Lg => "lg",
            RewardKind::Lgg => "lgg",
            RewardKind::Tdg => "tdg",
            RewardKind::Veg => "veg",
            RewardKind::TaskReward => "task_reward",
        }
    }

    /// All variants except VEG pass through the reservoir scaler; VEG is
    /// already binary.
    pub fn uses_scaler(&self) -> bool {
        !matches!(self, RewardKind::Veg)
    }
}

/// Everything a directional advising reward can depend on.
#[derive(Debug, Clone)]
pub struct RewardContext {
    /// Whether advice was exchanged in this direction this step.
    pub advised: bool,
    /// The student's update report for this step.
    pub report: UpdateReport,
    /// Teacher knowledge Q-vector at the student's observation.
    pub teacher_q: Vec<f64>,
    /// Action the student intended before any advice.
    pub intended: usize,
    pub task_reward: f64,
    /// Estimated joint start-state values before and after this step's
    /// learner updates (used by JVG only).
    pub joint_value_before: f64,
    pub joint_value_after: f64,
    pub veg_threshold: f64,
    /// Communication cost per piece of advice.
    pub cost: f64,
}

/// Directional advising reward: zero when no advice was exchanged, otherwise
/// the variant's value minus the communication cost.
pub fn advising_reward(kind: RewardKind, ctx: &RewardContext) -> f64 {
    if !ctx.advised {
        return 0.0;
    }
    let value = match kind {
        RewardKind::Jvg => ctx.joint_value_after - ctx.joint_value_before,
        RewardKind::Qtr => {
            let best = ctx.teacher_q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            best - ctx.teacher_q[ctx.intended]
        }
        RewardKind::Lg => ctx.report.loss_pre - ctx.report.loss_post,
        RewardKind::Lgg => ctx.report.grad_sq_norm,
        RewardKind::Tdg => ctx.report.delta_pre.abs() - ctx.report.delta_post.abs(),
        RewardKind::Veg => {
            if ctx.report.v_hat_obs > ctx.veg_threshold {
                1.0
            } else {
                0.0
            }
        }
        RewardKind::TaskReward => ctx.task_reward,
    };
    value - ctx.cost
}

/// Mean discounted return of greedy advice-free rollouts from the initial
/// state, under the learners' task discount. Deterministic for the built-in
/// domains; the rng covers stochastic resets.
pub fn estimate_joint_value<R: Rng + ?Sized>(
    env: &Env,
    learners: &[Learner; 2],
    rollouts: usize,
    rng: &mut R,
) -> f64 {
    assert!(rollouts > 0, "joint value estimate needs at least one rollout");
    let gamma = learners[0].gamma();
    let mut total = 0.0;
    for _ in 0..rollouts {
        let mut e = env.clone();
        let mut obs = e.reset(rng);
        let mut ret = 0.0;
        let mut disc = 1.0;
        while !e.done() {
            let actions = [learners[0].greedy(obs.0[0]), learners[1].greedy(obs.0[1])];
            let step = e.step(actions).expect("stepping an unfinished episode");
            ret += disc * step.reward;
            disc *= gamma;
            obs = step.obs;
        }
        total += ret;
    }
    total / rollouts as f64
}

/// Empirical-CDF reward normalizer over a fixed-capacity uniform reservoir.
/// Every scaled value is first inserted, so the reservoir tracks the raw
/// reward distribution; outputs lie in [-1, 1].
#[derive(Debug, Clone)]
pub struct ReservoirScaler {
    capacity: usize,
    samples: Vec<f64>,
    seen: u64,
    rng: ChaCha8Rng,
}

impl ReservoirScaler {
    pub fn new(capacity: usize, seed: u64) -> Self {
        assert!(capacity > 0);
        ReservoirScaler {
            capacity,
            samples: Vec::with_capacity(capacity),
            seen: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Inserts the raw value with uniform reservoir replacement, then returns
    /// 2 * F(raw) - 1 where F is the empirical CDF (proportion of reservoir
    /// entries <= raw).
    pub fn scale(&mut self, raw: f64) -> f64 {
        self.seen += 1;
        if self.samples.len() < self.capacity {
            self.samples.push(raw);
        } else {
            let keep_prob = self.capacity as f64 / self.seen as f64;
            if self.rng.gen::<f64>() < keep_prob {
                let slot = self.rng.gen_range(0..self.capacity);
                self.samples[slot] = raw;
            }
        }
        let below = self.samples.iter().filter(|&&s| s <= raw).count();
        2.0 * (below as f64 / self.samples.len() as f64) - 1.0
    }
}
