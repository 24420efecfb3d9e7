//! Run metrics: final-policy value, learning-curve area, and the exact
//! domain optima used for normalization.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::envs::Env;
use crate::protocol::CurvePoint;

/// Optimal discounted joint return from the initial state, by exhaustive
/// memoized search over joint actions (exact for the small built-in domains).
pub fn domain_optimum(env: &Env, gamma: f64) -> f64 {
    fn best(env: &Env, t: usize, gamma: f64, memo: &mut HashMap<(usize, usize, usize), f64>) -> f64 {
        if env.done() {
            return 0.0;
        }
        let obs = env.current_obs();
        let key = (obs.0[0], obs.0[1], t);
        if let Some(&v) = memo.get(&key) {
            return v;
        }
        let n = env.action_count();
        let mut value = f64::NEG_INFINITY;
        for a0 in 0..n {
            for a1 in 0..n {
                let mut next = env.clone();
                let step = next.step([a0, a1]).expect("unfinished episode accepts actions");
                let v = step.reward + gamma * best(&next, t + 1, gamma, memo);
                value = value.max(v);
            }
        }
        memo.insert(key, value);
        value
    }
    let mut fresh = env.clone();
    fresh.reset(&mut ChaCha8Rng::seed_from_u64(0));
    best(&fresh, 0, gamma, &mut HashMap::new())
}

/// Metrics of one training run (one algorithm, one seed). The curve covers
/// the final teaching generation; earlier generations only shape the
/// advising policies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResult {
    pub algorithm: String,
    pub domain: String,
    pub seed: u64,
    /// Mean greedy advice-free return of the final task policies.
    pub final_value: f64,
    /// Sum of per-episode greedy returns over the reported curve.
    pub auc: f64,
    /// AUC divided by (episodes x domain optimum), in [0, 1] for exact play.
    pub norm_auc: f64,
    /// Advice delivered to each agent over the reported curve.
    pub advice_counts: [usize; 2],
    /// Requests issued by each agent over the reported curve.
    pub request_counts: [usize; 2],
    /// Mean delivered advice (both directions) per episode.
    pub advice_per_episode: f64,
    /// Mean discounted training return (exploration and advice included).
    pub train_return_mean: f64,
    pub curve: Vec<CurvePoint>,
}

impl RunResult {
    pub fn from_curve(
        algorithm: String,
        domain: String,
        seed: u64,
        curve: Vec<CurvePoint>,
        final_value: f64,
        optimum: f64,
    ) -> Self {
        let episodes = curve.len().max(1) as f64;
        let auc: f64 = curve.iter().map(|c| c.eval_return).sum();
        let advice_counts = curve.iter().fold([0usize; 2], |mut acc, c| {
            acc[0] += c.advice[0];
            acc[1] += c.advice[1];
            acc
        });
        let request_counts = curve.iter().fold([0usize; 2], |mut acc, c| {
            acc[0] += c.requests[0];
            acc[1] += c.requests[1];
            acc
        });
        let train_return_mean = curve.iter().map(|c| c.train_return).sum::<f64>() / episodes;
        RunResult {
            algorithm,
            domain,
            seed,
            final_value,
            auc,
            norm_auc: auc / (episodes * optimum),
            advice_counts,
            request_counts,
            advice_per_episode: (advice_counts[0] + advice_counts[1]) as f64 / episodes,
            train_return_mean,
            curve,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::DomainId;

    #[test]
    fn repeated_optimum_is_the_discounted_best_payoff_sum() {
        let opt = domain_optimum(&Env::standard(DomainId::Repeated), 0.95);
        let closed: f64 = (0..5).map(|t| 0.95f64.powi(t)).sum();
        assert!((opt - closed).abs() < 1e-12);
        assert!((opt - 4.52438125).abs() < 1e-9);
    }

    #[test]
    fn grid_optima_equal_six_step_coordination() {
        // Both corridors need six moves per agent; the reward lands on the
        // sixth step, discounted five times.
        let expected = 0.95f64.powi(5);
        for id in [DomainId::Hallway, DomainId::Room] {
            let opt = domain_optimum(&Env::standard(id), 0.95);
            assert!((opt - expected).abs() < 1e-12, "{id:?}: {opt}");
        }
    }

    #[test]
    fn curve_aggregation_arithmetic() {
        let curve = vec![
            CurvePoint {
                episode: 0,
                eval_return: 0.0,
                train_return: 0.2,
                advice: [1, 0],
                requests: [2, 0],
                steps: 5,
            },
            CurvePoint {
                episode: 1,
                eval_return: 1.0,
                train_return: 0.4,
                advice: [0, 3],
                requests: [0, 3],
                steps: 5,
            },
        ];
        let r = RunResult::from_curve("x".into(), "y".into(), 7, curve, 1.5, 2.0);
        assert_eq!(r.auc, 1.0);
        assert_eq!(r.norm_auc, 0.25);
        assert_eq!(r.advice_counts, [1, 3]);
        assert_eq!(r.request_counts, [2, 3]);
        assert_eq!(r.advice_per_episode, 2.0);
        assert!((r.train_return_mean - 0.3).abs() < 1e-12);
        assert_eq!(r.final_value, 1.5);
    }
}
