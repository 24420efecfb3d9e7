//! Training runners: single runs (with the teaching-generation outer loop),
//! policy evaluation, multi-seed comparisons, transfer, and sweeps.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::advising::{AdvisingDims, AdvisingPolicySet, AdvisingSnapshot};
use crate::envs::{flip, DomainId, Env, FlipAxis};
use crate::harness::config::{AlgorithmKind, ExperimentConfig};
use crate::harness::metrics::{domain_optimum, RunResult};
use crate::harness::persist::{load_policies, PolicyFile};
use crate::harness::stats::{summarize, welch_t_test, Summary};
use crate::heuristics::HeuristicState;
use crate::protocol::{
    evaluate_greedy, pretrain_experts, run_advising_updates, run_episode, run_training,
    BehavioralPolicy, TeachingAlgorithm, TeachingSession,
};
use crate::qlearn::Learner;
use crate::rewards::RewardKind;
use crate::{Error, Result};

/// Everything a finished training run produces.
pub struct TrainOutput {
    pub result: RunResult,
    pub learners: [Learner; 2],
    pub advising: Option<AdvisingSnapshot>,
    /// Input config with derived values (the value-gain threshold) filled in.
    pub resolved: ExperimentConfig,
}

/// Internal seeds for the no-teaching reference runs that calibrate the
/// value-gain threshold; far outside the default experiment seed range.
const VEG_REFERENCE_SEEDS: [u64; 5] =
    [0x5EED_0001, 0x5EED_0002, 0x5EED_0003, 0x5EED_0004, 0x5EED_0005];

/// Derives the value-gain reward threshold when the config leaves it unset:
/// the configured fraction of the mean final start-state value estimate of
/// no-teaching reference runs.
pub fn resolve_veg_tau(cfg: &ExperimentConfig) -> Result<f64> {
    if let Some(tau) = cfg.veg_tau {
        return Ok(tau);
    }
    let domain = cfg.domain_id()?;
    let env = Env::standard(domain);
    let episodes = cfg.episodes_for(domain);
    let mut total = 0.0;
    for &seed in &VEG_REFERENCE_SEEDS {
        let mut master = ChaCha8Rng::seed_from_u64(seed);
        let learners = [cfg.make_learner(&env)?, cfg.make_learner(&env)?];
        let mut session = TeachingSession::new(env.clone(), learners, TeachingAlgorithm::None);
        for _ in 0..episodes {
            run_episode(&mut session, &mut master)?;
        }
        let start = session.env.clone().reset(&mut ChaCha8Rng::seed_from_u64(0));
        total += (session.learners[0].value_estimate(start.0[0])
            + session.learners[1].value_estimate(start.0[1]))
            / 2.0;
    }
    let reference_bar = cfg.veg_fraction * total / VEG_REFERENCE_SEEDS.len() as f64;
    // Floor the bar halfway into one update quantum (alpha * max reward).
    // A single successful update deposits a full quantum at the cells it
    // touches, so the gate opens there, while neighbouring cells reached
    // only through tile-coding smear (at most half the tilings) stay below
    // it. Without this floor, a domain whose untaught reference value is
    // zero would gate on "any positive estimate", which pays for advising
    // at all rather than advising well.
    let quantum_bar = 0.5 * cfg.alpha * env.max_step_reward();
    Ok(reference_bar.max(quantum_bar))
}

fn behavior_pair(cfg: &ExperimentConfig, env: &Env) -> Result<[BehavioralPolicy; 2]> {
    if cfg.rotation_degrees == 0 {
        let n = env.action_count();
        Ok([BehavioralPolicy::identity(n), BehavioralPolicy::identity(n)])
    } else {
        Ok([
            BehavioralPolicy::rotated(cfg.rotation_degrees, env.action_count())?,
            BehavioralPolicy::rotated(cfg.rotation_degrees, env.action_count())?,
        ])
    }
}

/// Trains one run of the configured algorithm on the standard domain.
pub fn train_run(cfg: &ExperimentConfig, seed: u64) -> Result<TrainOutput> {
    cfg.validate()?;
    let domain = cfg.domain_id()?;
    run_on_env(cfg, seed, Env::standard(domain), cfg.domain.clone(), None)
}

/// Trains one run on an explicit environment. `fixed_knowledge`, when given,
/// pins both agents' teaching knowledge (transfer); otherwise heuristics
/// that need experts pretrain them here.
pub fn run_on_env(
    cfg: &ExperimentConfig,
    seed: u64,
    env: Env,
    domain_label: String,
    fixed_knowledge: Option<[Learner; 2]>,
) -> Result<TrainOutput> {
    let domain = cfg.domain_id()?;
    let algorithm = cfg.algorithm_kind()?;
    let episodes = cfg.episodes_for(domain);
    let optimum = domain_optimum(&env, cfg.gamma);
    let behavior = behavior_pair(cfg, &env)?;

    let mut resolved = cfg.clone();
    if matches!(algorithm, AlgorithmKind::Lectr(RewardKind::Veg)) && resolved.veg_tau.is_none() {
        resolved.veg_tau = Some(resolve_veg_tau(cfg)?);
    }

    // Independent random streams per run stage, so e.g. expert pretraining
    // cannot shift the main run's exploration.
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let expert_seed: u64 = master.gen();
    let advising_seed: u64 = master.gen();
    let episode_seed: u64 = master.gen();
    let update_seed: u64 = master.gen();

    let knowledge: [Option<Learner>; 2] = if let Some([k0, k1]) = fixed_knowledge {
        [Some(k0), Some(k1)]
    } else if let AlgorithmKind::Heuristic(kind) = algorithm {
        if kind.needs_expert() {
            let mut expert_rng = ChaCha8Rng::seed_from_u64(expert_seed);
            let fresh = [cfg.make_learner(&env)?, cfg.make_learner(&env)?];
            let experts = pretrain_experts(
                &env,
                fresh,
                cfg.expert_episodes_for(domain),
                cfg.expert_epsilon,
                &mut expert_rng,
            )?;
            let [e0, e1] = experts;
            [Some(e0), Some(e1)]
        } else {
            [None, None]
        }
    } else {
        [None, None]
    };

    let mut episode_rng = ChaCha8Rng::seed_from_u64(episode_seed);
    let mut update_rng = ChaCha8Rng::seed_from_u64(update_seed);

    let setup = |learners: [Learner; 2], algorithm: TeachingAlgorithm| -> TeachingSession {
        let mut session = TeachingSession::new(env.clone(), learners, algorithm);
        session.behavior = behavior.clone();
        session.knowledge = knowledge.clone();
        session.cost = cfg.cost;
        session.veg_threshold = resolved.veg_tau.unwrap_or(0.0);
        session.jvg_rollouts = cfg.jvg_rollouts;
        session
    };

    let (curve, final_learners, advising) = match algorithm {
        AlgorithmKind::None => {
            let learners = [cfg.make_learner(&env)?, cfg.make_learner(&env)?];
            let mut session = setup(learners, TeachingAlgorithm::None);
            let curve = run_training(&mut session, episodes, cfg.eval_rollouts, &mut episode_rng)?;
            (curve, session.learners, None)
        }
        AlgorithmKind::Heuristic(kind) => {
            let state =
                HeuristicState::new(cfg.importance_threshold, cfg.budget, cfg.upsilon);
            let learners = [cfg.make_learner(&env)?, cfg.make_learner(&env)?];
            let mut session = setup(learners, TeachingAlgorithm::Heuristic { kind, state });
            let curve = run_training(&mut session, episodes, cfg.eval_rollouts, &mut episode_rng)?;
            (curve, session.learners, None)
        }
        AlgorithmKind::Lectr(reward) => {
            let dims = AdvisingDims::new(env.obs_space(), env.action_count());
            let mut advising_rng = ChaCha8Rng::seed_from_u64(advising_seed);
            let mut policies =
                AdvisingPolicySet::new(dims, cfg.advising_hyper(), &mut advising_rng);
            let mut last = None;
            // Each teaching generation re-initializes the task learners,
            // teaches them for a full phase under the current advising
            // policies, then trains the advising level once per step the
            // generation collected. The reported curve is the final
            // generation's: what the trained teachers achieve on students
            // learning from scratch.
            for _ in 0..cfg.generations {
                let learners = [cfg.make_learner(&env)?, cfg.make_learner(&env)?];
                let mut session =
                    setup(learners, TeachingAlgorithm::Lectr { policies, reward });
                session.collect = true;
                let curve =
                    run_training(&mut session, episodes, cfg.eval_rollouts, &mut episode_rng)?;
                let TeachingAlgorithm::Lectr { policies: trained, .. } = session.algorithm else {
                    unreachable!("session algorithm cannot change");
                };
                policies = trained;
                let collected: usize = curve.iter().map(|c| c.steps).sum();
                let passes = collected.min(cfg.max_update_passes);
                run_advising_updates(&mut policies, passes, &mut update_rng)?;
                last = Some((curve, session.learners));
            }
            let (curve, learners) = last.expect("at least one generation");
            (curve, learners, Some(policies.snapshot()))
        }
    };

    let final_value = evaluate_greedy(&env, &final_learners, cfg.eval_rollouts);
    let result = RunResult::from_curve(
        algorithm.name(),
        domain_label,
        seed,
        curve,
        final_value,
        optimum,
    );
    Ok(TrainOutput { result, learners: final_learners, advising, resolved })
}

/// Mean greedy advice-free return of saved policies on their own domain.
pub fn evaluate_policies(path: &Path, rollouts: usize) -> Result<f64> {
    if rollouts == 0 {
        return Err(Error::Config("rollouts must be at least 1".into()));
    }
    let file = load_policies(path)?;
    let domain = DomainId::parse(&file.domain)?;
    let env = Env::standard(domain);
    file.check_compatible(&env)?;
    Ok(evaluate_greedy(&env, &file.learners, rollouts))
}

/// Per-algorithm aggregate of a comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub algorithm: String,
    pub final_value: Summary,
    pub auc: Summary,
    pub norm_auc: Summary,
    pub advice_per_episode: Summary,
    pub train_return: Summary,
    /// Statistically indistinguishable from the best final value (the
    /// best itself, or not separated from it at the test level).
    pub best_final_value: bool,
    pub best_auc: bool,
}

/// Two-sided Welch p-values for one pair of algorithms.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairwiseTest {
    pub a: String,
    pub b: String,
    pub p_final_value: f64,
    pub p_auc: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellFailure {
    pub algorithm: String,
    pub seed: u64,
    pub message: String,
}

/// Multi-seed comparison of several algorithms on one domain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub domain: String,
    pub seeds: Vec<u64>,
    pub veg_tau: Option<f64>,
    pub algorithms: Vec<AlgorithmSummary>,
    pub pairwise: Vec<PairwiseTest>,
    pub failures: Vec<CellFailure>,
}

/// Seeds used by multi-seed commands: seed, seed+1, ...
pub fn seed_list(cfg: &ExperimentConfig) -> Vec<u64> {
    (0..cfg.seeds as u64).map(|i| cfg.seed + i).collect()
}

/// Runs every (algorithm, seed) cell in parallel and aggregates. Cell
/// failures are recorded per cell without aborting the rest. The merged
/// output is identical to a serial run: cells own all their state,
/// parallelism only schedules them.
pub fn compare(
    cfg: &ExperimentConfig,
    algorithms: &[String],
    seeds: &[u64],
) -> Result<(ComparisonReport, Vec<RunResult>)> {
    cfg.validate()?;
    if algorithms.len() < 2 {
        return Err(Error::Config("compare needs at least two algorithms".into()));
    }
    if seeds.len() < 2 {
        return Err(Error::Config("compare needs at least two seeds".into()));
    }
    for name in algorithms {
        cfg.parse_algorithm(name)?;
    }

    let mut shared = cfg.clone();
    let wants_veg = algorithms.iter().any(|name| {
        matches!(shared.parse_algorithm(name), Ok(AlgorithmKind::Lectr(RewardKind::Veg)))
    });
    if wants_veg && shared.veg_tau.is_none() {
        shared.veg_tau = Some(resolve_veg_tau(cfg)?);
    }

    let cells: Vec<(usize, u64)> = algorithms
        .iter()
        .enumerate()
        .flat_map(|(ai, _)| seeds.iter().map(move |&s| (ai, s)))
        .collect();
    let outcomes: Vec<(usize, u64, Result<RunResult>)> = cells
        .par_iter()
        .map(|&(ai, seed)| {
            let mut cell_cfg = shared.clone();
            cell_cfg.algorithm = algorithms[ai].clone();
            (ai, seed, train_run(&cell_cfg, seed).map(|out| out.result))
        })
        .collect();

    let mut per_algorithm: Vec<Vec<RunResult>> = vec![Vec::new(); algorithms.len()];
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for (ai, seed, outcome) in outcomes {
        match outcome {
            Ok(result) => {
                per_algorithm[ai].push(result.clone());
                results.push(result);
            }
            Err(e) => failures.push(CellFailure {
                algorithm: algorithms[ai].clone(),
                seed,
                message: e.to_string(),
            }),
        }
    }

    let metric =
        |rows: &[RunResult], f: fn(&RunResult) -> f64| -> Vec<f64> { rows.iter().map(f).collect() };
    let mut summaries: Vec<AlgorithmSummary> = per_algorithm
        .iter()
        .enumerate()
        .map(|(ai, rows)| AlgorithmSummary {
            algorithm: cfg
                .parse_algorithm(&algorithms[ai])
                .expect("validated above")
                .name(),
            final_value: summarize(&metric(rows, |r| r.final_value)),
            auc: summarize(&metric(rows, |r| r.auc)),
            norm_auc: summarize(&metric(rows, |r| r.norm_auc)),
            advice_per_episode: summarize(&metric(rows, |r| r.advice_per_episode)),
            train_return: summarize(&metric(rows, |r| r.train_return_mean)),
            best_final_value: false,
            best_auc: false,
        })
        .collect();

    // Winner flags: the best mean, plus anything the test cannot separate
    // from it at the 0.05 level.
    let flag = |summaries: &mut [AlgorithmSummary],
                per: &[Vec<RunResult>],
                value: fn(&RunResult) -> f64,
                mark: fn(&mut AlgorithmSummary) -> &mut bool|
     -> Result<()> {
        let usable: Vec<usize> =
            (0..per.len()).filter(|&i| per[i].len() >= 2).collect();
        let Some(&best) = usable.iter().max_by(|&&a, &&b| {
            let ma = summarize(&per[a].iter().map(value).collect::<Vec<_>>()).mean;
            let mb = summarize(&per[b].iter().map(value).collect::<Vec<_>>()).mean;
            ma.total_cmp(&mb)
        }) else {
            return Ok(());
        };
        let best_samples: Vec<f64> = per[best].iter().map(value).collect();
        for &i in &usable {
            let here: Vec<f64> = per[i].iter().map(value).collect();
            let tied = i == best || welch_t_test(&best_samples, &here)? >= 0.05;
            *mark(&mut summaries[i]) = tied;
        }
        Ok(())
    };
    flag(&mut summaries, &per_algorithm, |r| r.final_value, |s| &mut s.best_final_value)?;
    flag(&mut summaries, &per_algorithm, |r| r.auc, |s| &mut s.best_auc)?;

    let mut pairwise = Vec::new();
    for i in 0..algorithms.len() {
        for j in i + 1..algorithms.len() {
            if per_algorithm[i].len() < 2 || per_algorithm[j].len() < 2 {
                continue;
            }
            let vi: Vec<f64> = per_algorithm[i].iter().map(|r| r.final_value).collect();
            let vj: Vec<f64> = per_algorithm[j].iter().map(|r| r.final_value).collect();
            let ai: Vec<f64> = per_algorithm[i].iter().map(|r| r.auc).collect();
            let aj: Vec<f64> = per_algorithm[j].iter().map(|r| r.auc).collect();
            pairwise.push(PairwiseTest {
                a: summaries[i].algorithm.clone(),
                b: summaries[j].algorithm.clone(),
                p_final_value: welch_t_test(&vi, &vj)?,
                p_auc: welch_t_test(&ai, &aj)?,
            });
        }
    }

    let report = ComparisonReport {
        domain: cfg.domain.clone(),
        seeds: seeds.to_vec(),
        veg_tau: shared.veg_tau,
        algorithms: summaries,
        pairwise,
        failures,
    };
    Ok((report, results))
}

/// Trains fresh learners on the mirrored domain, with the saved source
/// policies fixed as both agents' teaching knowledge.
pub fn transfer_run(cfg: &ExperimentConfig, source: &Path, seed: u64) -> Result<TrainOutput> {
    cfg.validate()?;
    let axis = FlipAxis::parse(&cfg.flip)?;
    let env = flip(&Env::standard(cfg.domain_id()?), axis)?;
    let file = load_policies(source)?;
    file.check_compatible(&env)?;
    let label = format!("{}_flip_{}", cfg.domain, cfg.flip);
    run_on_env(cfg, seed, env, label, Some(file.learners))
}

/// One swept value of a config key, with its full comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: String,
    pub report: ComparisonReport,
    pub rows: Vec<RunResult>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub key: String,
    pub points: Vec<SweepPoint>,
}

/// Repeats a comparison across several values of one config key (reward
/// kinds, rotations, communication costs, ...).
pub fn sweep(
    cfg: &ExperimentConfig,
    key: &str,
    values: &[String],
    algorithms: &[String],
    seeds: &[u64],
) -> Result<SweepReport> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let mut points = Vec::with_capacity(values.len());
    for value in values {
        let mut swept = cfg.clone();
        swept.apply_override(key, value)?;
        let (report, rows) = compare(&swept, algorithms, seeds)?;
        points.push(SweepPoint { value: value.clone(), report, rows });
    }
    Ok(SweepReport { key: key.to_string(), points })
}

/// Bundles a finished run into its on-disk policy representation.
pub fn policy_file_for(cfg: &ExperimentConfig, out: &TrainOutput) -> Result<PolicyFile> {
    let env = Env::standard(cfg.domain_id()?);
    Ok(PolicyFile::new(cfg.domain.clone(), &env, out.learners.clone(), out.advising.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_cfg(domain: &str, algorithm: &str) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.domain = domain.into();
        cfg.algorithm = algorithm.into();
        cfg.episodes = 5;
        cfg.generations = 2;
        cfg.expert_episodes = 50;
        cfg.seeds = 2;
        cfg
    }

    #[test]
    fn no_teaching_run_produces_a_clean_result() {
        let cfg = quick_cfg("repeated", "none");
        let out = train_run(&cfg, 3).unwrap();
        assert_eq!(out.result.curve.len(), 5);
        assert_eq!(out.result.algorithm, "none");
        assert_eq!(out.result.advice_counts, [0, 0]);
        assert!(out.advising.is_none());
        assert!(out.result.final_value >= 0.0 && out.result.final_value <= 4.53);
        assert!(out.result.norm_auc >= 0.0 && out.result.norm_auc <= 1.0 + 1e-9);
    }

    #[test]
    fn same_config_and_seed_reproduce_identical_results() {
        let cfg = quick_cfg("repeated", "lectr_qtr");
        let a = train_run(&cfg, 9).unwrap();
        let b = train_run(&cfg, 9).unwrap();
        assert_eq!(
            serde_json::to_string(&a.result).unwrap(),
            serde_json::to_string(&b.result).unwrap()
        );
        let c = train_run(&cfg, 10).unwrap();
        assert_ne!(
            serde_json::to_string(&a.result).unwrap(),
            serde_json::to_string(&c.result).unwrap(),
            "different seeds should explore differently"
        );
    }

    #[test]
    fn learned_advising_runs_collect_and_train() {
        let cfg = quick_cfg("repeated", "lectr_tdg");
        let out = train_run(&cfg, 1).unwrap();
        assert!(out.advising.is_some());
        assert_eq!(out.result.algorithm, "lectr_tdg");
        assert_eq!(out.result.curve.len(), 5, "curve covers the final generation only");
    }

    #[test]
    fn veg_threshold_resolves_once_and_sticks() {
        let cfg = quick_cfg("repeated", "lectr");
        let tau = resolve_veg_tau(&cfg).unwrap();
        assert!(tau > 0.0, "reference runs should learn some value, tau = {tau}");
        let out = train_run(&cfg, 2).unwrap();
        assert_eq!(out.resolved.veg_tau, Some(tau));

        let mut pinned = cfg.clone();
        pinned.veg_tau = Some(0.123);
        assert_eq!(resolve_veg_tau(&pinned).unwrap(), 0.123);
    }

    #[test]
    fn compare_requires_two_of_each() {
        let cfg = quick_cfg("repeated", "none");
        let seeds = [1, 2];
        assert!(compare(&cfg, &["none".into()], &seeds).is_err());
        assert!(compare(&cfg, &["none".into(), "lectr".into()], &[1]).is_err());
        assert!(compare(&cfg, &["none".into(), "what".into()], &seeds).is_err());
    }

    #[test]
    fn identical_algorithms_are_statistically_indistinguishable() {
        let cfg = quick_cfg("repeated", "none");
        let (report, rows) = compare(
            &cfg,
            &["none".into(), "none".into()],
            &[5, 6, 7],
        )
        .unwrap();
        assert_eq!(rows.len(), 6, "cell count is algorithms x seeds");
        assert!(report.failures.is_empty());
        let p = report.pairwise[0].p_final_value;
        assert_eq!(p, 1.0, "same algorithm on same seeds is identical");
        assert!(report.algorithms[0].best_final_value && report.algorithms[1].best_final_value);
    }

    #[test]
    fn parallel_comparison_matches_serial_runs() {
        let cfg = quick_cfg("repeated", "none");
        let algorithms = ["none".to_string(), "adhoc_visit".to_string()];
        let seeds = [11, 12];
        let (_, rows) = compare(&cfg, &algorithms, &seeds).unwrap();
        let mut serial = Vec::new();
        for name in &algorithms {
            for &seed in &seeds {
                let mut c = cfg.clone();
                c.algorithm = name.clone();
                serial.push(train_run(&c, seed).unwrap().result);
            }
        }
        assert_eq!(
            serde_json::to_string(&rows).unwrap(),
            serde_json::to_string(&serial).unwrap()
        );
    }

    #[test]
    fn transfer_trains_fresh_learners_with_loaded_knowledge() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("policies.json");
        let cfg = quick_cfg("hallway", "none");
        let out = train_run(&cfg, 4).unwrap();
        let file = policy_file_for(&cfg, &out).unwrap();
        crate::harness::persist::save_policies(&path, &file).unwrap();

        let mut tcfg = quick_cfg("hallway", "early_advising");
        tcfg.flip = "identity".into();
        let transferred = transfer_run(&tcfg, &path, 5).unwrap();
        assert_eq!(transferred.result.domain, "hallway_flip_identity");
        assert_eq!(
            transferred.result.curve[0].eval_return, 0.0,
            "fresh learners start from nothing"
        );

        // Mismatched shapes are refused.
        let mut room_cfg = quick_cfg("room", "none");
        room_cfg.flip = "identity".into();
        assert!(matches!(
            transfer_run(&room_cfg, &path, 5),
            Err(Error::PolicyFile(_))
        ));
    }

    #[test]
    fn sweep_reruns_the_comparison_per_value() {
        let cfg = quick_cfg("repeated", "none");
        let report = sweep(
            &cfg,
            "cost",
            &["0.0".into(), "0.5".into()],
            &["none".into(), "adhoc_visit".into()],
            &[1, 2],
        )
        .unwrap();
        assert_eq!(report.key, "cost");
        assert_eq!(report.points.len(), 2);
        assert_eq!(report.points[0].rows.len(), 4);
        assert!(sweep(&cfg, "cost", &[], &["none".into(), "none".into()], &[1, 2]).is_err());
    }
}
