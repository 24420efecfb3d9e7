//! The interaction protocol: episodes in which two task learners act,
//! possibly exchange action advice, and update online.
//!
//! Each training episode draws two independent random streams from the
//! caller's rng, one for task-level exploration and one for advising-level
//! decisions. Advising choices therefore never perturb the task stream: a
//! run whose teachers always decline produces bit-identical task learning to
//! a run without any teaching.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::advising::{
    build_advising_obs, AdvisingActions, AdvisingExperience, AdvisingPolicySet, JointAdvisingObs,
    SelectMode,
};
use crate::envs::{ActionRotation, Env, JointObservation};
use crate::heuristics::{decide_advise, decide_request, HeuristicKind, HeuristicState};
use crate::qlearn::Learner;
use crate::rewards::{advising_reward, estimate_joint_value, RewardContext, RewardKind};
use crate::Result;

/// Maps an advised action to the action the advised agent executes. Identity
/// for homogeneous pairs; a rotation when the agents' action semantics
/// differ, so advice arrives in the advisor's frame and lands rotated.
#[derive(Debug, Clone)]
pub struct BehavioralPolicy {
    rotation: ActionRotation,
}

impl BehavioralPolicy {
    pub fn identity(actions: usize) -> Self {
        BehavioralPolicy { rotation: ActionRotation::identity(actions) }
    }

    pub fn rotated(degrees: usize, actions: usize) -> Result<Self> {
        Ok(BehavioralPolicy { rotation: ActionRotation::new(degrees, actions)? })
    }

    pub fn is_identity(&self) -> bool {
        self.rotation.is_identity()
    }

    pub fn execute(&self, advised: usize) -> usize {
        self.rotation.execute(advised)
    }
}

/// How (and whether) the pair exchanges advice during training.
pub enum TeachingAlgorithm {
    /// Independent learning, no communication.
    None,
    /// A fixed advising rule.
    Heuristic { kind: HeuristicKind, state: HeuristicState },
    /// Learned advising policies with a reward for teaching.
    Lectr { policies: AdvisingPolicySet, reward: RewardKind },
}

impl TeachingAlgorithm {
    pub fn is_learned(&self) -> bool {
        matches!(self, TeachingAlgorithm::Lectr { .. })
    }
}

/// A running training configuration: environment, learners, teaching
/// algorithm, and the knobs that shape advising rewards.
pub struct TeachingSession {
    pub env: Env,
    pub learners: [Learner; 2],
    pub algorithm: TeachingAlgorithm,
    /// Per-agent map from advised to executed actions.
    pub behavior: [BehavioralPolicy; 2],
    /// Fixed teaching-knowledge policies; agents fall back to their own live
    /// learner when unset.
    pub knowledge: [Option<Learner>; 2],
    /// Communication cost subtracted from each piece of advice.
    pub cost: f64,
    /// Threshold for the value-gain advising reward.
    pub veg_threshold: f64,
    /// Rollouts per joint-value estimate.
    pub jvg_rollouts: usize,
    /// Store advising experiences (and feed the reward scaler) while running.
    pub collect: bool,
}

impl TeachingSession {
    pub fn new(env: Env, learners: [Learner; 2], algorithm: TeachingAlgorithm) -> Self {
        let actions = env.action_count();
        TeachingSession {
            env,
            learners,
            algorithm,
            behavior: [BehavioralPolicy::identity(actions), BehavioralPolicy::identity(actions)],
            knowledge: [None, None],
            cost: 0.0,
            veg_threshold: 0.0,
            jvg_rollouts: 10,
            collect: false,
        }
    }
}

/// What happened at one step of a training episode.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub obs: JointObservation,
    /// Actions the learners chose before any advice.
    pub intended: [usize; 2],
    /// Advice delivered to each agent, in the advisor's action frame.
    pub advice: [Option<usize>; 2],
    /// Actions actually taken after applying behavior maps.
    pub executed: [usize; 2],
    pub reward: f64,
    /// Joint advising reward stored with this step's experience (zero when
    /// not collecting).
    pub advising_reward: f64,
}

/// Aggregates of one training episode.
#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    /// Discounted task return of the episode as trained (exploration and
    /// advice included).
    pub train_return: f64,
    /// Pieces of advice delivered to each agent.
    pub advice_counts: [usize; 2],
    /// Advice requests issued by each agent.
    pub request_counts: [usize; 2],
    pub records: Vec<StepRecord>,
}

fn kref<'a>(knowledge: &'a [Option<Learner>; 2], learners: &'a [Learner; 2], agent: usize) -> &'a Learner {
    knowledge[agent].as_ref().unwrap_or(&learners[agent])
}

/// Runs one training episode. Draws two sub-seeds from `master` (task
/// exploration, then advising decisions) and steps the environment to
/// termination, updating both learners online.
pub fn run_episode<R: Rng + ?Sized>(
    session: &mut TeachingSession,
    master: &mut R,
) -> Result<EpisodeOutcome> {
    let task_seed: u64 = master.gen();
    let advising_seed: u64 = master.gen();
    let mut task_rng = ChaCha8Rng::seed_from_u64(task_seed);
    let mut adv_rng = ChaCha8Rng::seed_from_u64(advising_seed);

    let TeachingSession {
        env,
        learners,
        algorithm,
        behavior,
        knowledge,
        cost,
        veg_threshold,
        jvg_rollouts,
        collect,
    } = session;

    let gamma = learners[0].gamma();
    let mut obs = env.reset(&mut task_rng);
    let mut records = Vec::new();
    let mut train_return = 0.0;
    let mut discount = 1.0;
    let mut advice_counts = [0usize; 2];
    let mut request_counts = [0usize; 2];

    while !env.done() {
        let intended = [
            learners[0].act(obs.0[0], &mut task_rng),
            learners[1].act(obs.0[1], &mut task_rng),
        ];

        // Advising decisions, on their own random stream.
        let mut advice: [Option<usize>; 2] = [None, None];
        let mut lectr_step: Option<(JointAdvisingObs, AdvisingActions)> = None;
        match algorithm {
            TeachingAlgorithm::None => {}
            TeachingAlgorithm::Heuristic { kind, state } => {
                for s in 0..2 {
                    let t = 1 - s;
                    let consulted = if kind.student_initiated() {
                        let q = learners[s].q_values(obs.0[s]);
                        let requested = decide_request(*kind, state, &q, intended[s]);
                        if requested {
                            request_counts[s] += 1;
                        }
                        requested
                    } else {
                        true
                    };
                    if consulted {
                        let teacher_q = kref(knowledge, learners, t).q_values(obs.0[s]);
                        advice[s] = decide_advise(
                            *kind,
                            state,
                            t,
                            obs.0[s],
                            &teacher_q,
                            intended[s],
                            &mut adv_rng,
                        );
                    }
                }
            }
            TeachingAlgorithm::Lectr { policies, .. } => {
                let k = [kref(knowledge, learners, 0), kref(knowledge, learners, 1)];
                let advising_obs = build_advising_obs(obs, learners, k);
                let actions = policies.select_actions(&advising_obs, SelectMode::Sample, &mut adv_rng);
                for s in 0..2 {
                    let t = 1 - s;
                    if actions.requested(s) {
                        request_counts[s] += 1;
                        advice[s] = actions.advice_from(t, policies.dims());
                    }
                }
                lectr_step = Some((advising_obs, actions));
            }
        }
        for s in 0..2 {
            if advice[s].is_some() {
                advice_counts[s] += 1;
            }
        }

        let executed = [
            advice[0].map(|a| behavior[0].execute(a)).unwrap_or(intended[0]),
            advice[1].map(|a| behavior[1].execute(a)).unwrap_or(intended[1]),
        ];

        // Snapshots needed by advising rewards, taken before the learners
        // change: teacher knowledge at each student's observation, and the
        // joint value when learning progress is measured through it.
        let lectr_reward = match algorithm {
            TeachingAlgorithm::Lectr { reward, .. } if *collect => Some(*reward),
            _ => None,
        };
        let pre_teacher_q = lectr_reward.map(|_| {
            [
                kref(knowledge, learners, 1).q_values(obs.0[0]),
                kref(knowledge, learners, 0).q_values(obs.0[1]),
            ]
        });
        let advised_any = advice[0].is_some() || advice[1].is_some();
        let need_jvg = matches!(lectr_reward, Some(RewardKind::Jvg)) && advised_any;
        let value_before = if need_jvg {
            estimate_joint_value(env, learners, *jvg_rollouts, &mut adv_rng)
        } else {
            0.0
        };

        let step = env.step(executed)?;
        let reports = [
            learners[0].update(obs.0[0], executed[0], step.reward, step.obs.0[0], step.done),
            learners[1].update(obs.0[1], executed[1], step.reward, step.obs.0[1], step.done),
        ];

        if let TeachingAlgorithm::Heuristic { state, .. } = algorithm {
            for agent in 0..2 {
                state.record_visit(agent, obs.0[agent]);
                state.record_td(agent, reports[agent].delta_pre.abs());
            }
        }

        // Advising rewards and experience storage (learned advising only).
        let mut joint_advising_reward = 0.0;
        if let Some(kind) = lectr_reward {
            let value_after = if need_jvg {
                estimate_joint_value(env, learners, *jvg_rollouts, &mut adv_rng)
            } else {
                0.0
            };
            let teacher_q = pre_teacher_q.expect("snapshotted with the reward kind");
            if let (TeachingAlgorithm::Lectr { policies, .. }, Some((advising_obs, actions))) =
                (&mut *algorithm, lectr_step)
            {
                for (s, tq) in teacher_q.into_iter().enumerate() {
                    let ctx = RewardContext {
                        advised: advice[s].is_some(),
                        report: reports[s],
                        teacher_q: tq,
                        intended: intended[s],
                        task_reward: step.reward,
                        joint_value_before: value_before,
                        joint_value_after: value_after,
                        veg_threshold: *veg_threshold,
                        cost: *cost,
                    };
                    let raw = advising_reward(kind, &ctx);
                    joint_advising_reward += if ctx.advised && kind.uses_scaler() {
                        policies.scaler.scale(raw)
                    } else {
                        raw
                    };
                }
                let k = [kref(knowledge, learners, 0), kref(knowledge, learners, 1)];
                let next_obs = build_advising_obs(step.obs, learners, k);
                policies.buffer.push(AdvisingExperience {
                    obs: advising_obs,
                    actions,
                    reward: joint_advising_reward,
                    next_obs,
                });
            }
        }

        records.push(StepRecord {
            obs,
            intended,
            advice,
            executed,
            reward: step.reward,
            advising_reward: joint_advising_reward,
        });
        train_return += discount * step.reward;
        discount *= gamma;
        obs = step.obs;
        if step.done {
            break;
        }
    }

    Ok(EpisodeOutcome { train_return, advice_counts, request_counts, records })
}

/// Mean discounted return of greedy, advice-free rollouts of the current
/// learners. Consumes no caller randomness and mutates nothing.
pub fn evaluate_greedy(env: &Env, learners: &[Learner; 2], rollouts: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    estimate_joint_value(env, learners, rollouts, &mut rng)
}

/// One point of a learning curve: greedy performance after a training
/// episode, plus what that episode looked like.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct CurvePoint {
    pub episode: usize,
    /// Greedy advice-free return after this episode.
    pub eval_return: f64,
    /// Discounted return of the training episode itself.
    pub train_return: f64,
    pub advice: [usize; 2],
    pub requests: [usize; 2],
    /// Environment steps the training episode took.
    pub steps: usize,
}

/// Runs a block of training episodes, evaluating greedily after each one.
/// Evaluation is advice-free and non-mutating, so the training trajectory is
/// identical to running the episodes back to back.
pub fn run_training<R: Rng + ?Sized>(
    session: &mut TeachingSession,
    episodes: usize,
    eval_rollouts: usize,
    master: &mut R,
) -> Result<Vec<CurvePoint>> {
    let mut curve = Vec::with_capacity(episodes);
    for episode in 0..episodes {
        let outcome = run_episode(session, master)?;
        let eval_return = evaluate_greedy(&session.env, &session.learners, eval_rollouts);
        curve.push(CurvePoint {
            episode,
            eval_return,
            train_return: outcome.train_return,
            advice: outcome.advice_counts,
            requests: outcome.request_counts,
            steps: outcome.records.len(),
        });
    }
    Ok(curve)
}

/// How many critic regression steps run before each actor ascent step.
/// Actors that move faster than the critic can track lock onto critic noise,
/// so the critic gets a head start (the first half of the passes) and then
/// stays several steps ahead of every actor step.
pub const CRITIC_STEPS_PER_ACTOR_STEP: usize = 5;

/// Advising-level training: `passes` critic regression steps, with the first
/// half critic-only and one ascent step of all four actors woven into every
/// fifth pass of the second half.
pub fn run_advising_updates<R: Rng + ?Sized>(
    policies: &mut AdvisingPolicySet,
    passes: usize,
    rng: &mut R,
) -> Result<()> {
    let warmup = passes / 2;
    for pass in 0..passes {
        policies.critic_update(rng)?;
        if pass >= warmup && (pass - warmup) % CRITIC_STEPS_PER_ACTOR_STEP == 0 {
            policies.actor_update(rng)?;
        }
    }
    Ok(())
}

/// Trains a pair of independent learners without advising, for use as fixed
/// teaching knowledge. Exploration runs at `epsilon`; the returned learners
/// are set greedy.
pub fn pretrain_experts<R: Rng + ?Sized>(
    env: &Env,
    mut learners: [Learner; 2],
    episodes: usize,
    epsilon: f64,
    master: &mut R,
) -> Result<[Learner; 2]> {
    learners[0].set_epsilon(epsilon);
    learners[1].set_epsilon(epsilon);
    let mut session = TeachingSession::new(env.clone(), learners, TeachingAlgorithm::None);
    for _ in 0..episodes {
        run_episode(&mut session, master)?;
    }
    let mut experts = session.learners;
    experts[0].set_epsilon(0.0);
    experts[1].set_epsilon(0.0);
    Ok(experts)
}
