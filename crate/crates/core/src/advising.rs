//! Learned advising policies: per-agent student (ask) and teacher (advise)
//! actors trained against one centralized critic over replayed advising
//! experiences.
//!
//! Execution is decentralized: each actor reads only its own observation
//! block. The critic sees the joint advising observation and the joint
//! one-hot advising action, and regresses on rewards derived from student
//! learning progress.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envs::JointObservation;
use crate::neural::{gumbel_softmax, softmax, softmax_vjp, Adam, Mlp, OutputKind};
use crate::qlearn::{argmax, Learner};
use crate::rewards::ReservoirScaler;
use crate::{Error, Result};

/// Student actors choose between passing and requesting advice.
pub const ASK_ACTIONS: usize = 2;
/// Index of the "request advice" student action.
pub const ASK_REQUEST: usize = 1;

/// Input and action dimensions of the advising level for one domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdvisingDims {
    /// One-hot width of a task observation.
    pub obs_onehot: usize,
    /// Task action count.
    pub actions: usize,
}

impl AdvisingDims {
    pub fn new(obs_onehot: usize, actions: usize) -> Self {
        AdvisingDims { obs_onehot, actions }
    }

    /// Student observation: own task observation plus own Q-vector.
    pub fn ask_block(&self) -> usize {
        self.obs_onehot + self.actions
    }

    /// Teacher observation: the peer's task observation, the peer's Q-vector,
    /// and the teacher's own knowledge Q-vector at the peer's observation.
    pub fn teach_block(&self) -> usize {
        self.obs_onehot + 2 * self.actions
    }

    /// Teacher action space: every task action plus the null "no advice"
    /// action (the last index).
    pub fn teach_actions(&self) -> usize {
        self.actions + 1
    }

    pub fn joint_obs(&self) -> usize {
        2 * self.ask_block() + 2 * self.teach_block()
    }

    pub fn joint_action(&self) -> usize {
        2 * ASK_ACTIONS + 2 * self.teach_actions()
    }

    pub fn critic_input(&self) -> usize {
        self.joint_obs() + self.joint_action()
    }

    fn ask_obs_offset(&self, agent: usize) -> usize {
        agent * self.ask_block()
    }

    fn teach_obs_offset(&self, agent: usize) -> usize {
        2 * self.ask_block() + agent * self.teach_block()
    }

    fn ask_action_offset(&self, agent: usize) -> usize {
        self.joint_obs() + agent * ASK_ACTIONS
    }

    fn teach_action_offset(&self, agent: usize) -> usize {
        self.joint_obs() + 2 * ASK_ACTIONS + agent * self.teach_actions()
    }
}

/// One of the four advising actors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Ask(usize),
    Teach(usize),
}

impl Slot {
    pub const ALL: [Slot; 4] = [Slot::Ask(0), Slot::Ask(1), Slot::Teach(0), Slot::Teach(1)];
}

/// Joint advising observation in compact form: observation identifiers plus
/// Q-vectors, densified to one-hot blocks on demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointAdvisingObs {
    /// Per agent: own observation and own Q-vector.
    pub ask: [(usize, Vec<f64>); 2],
    /// Per agent: the peer's observation, the peer's Q-vector there, and the
    /// teacher-knowledge Q-vector there.
    pub teach: [(usize, Vec<f64>, Vec<f64>); 2],
}

/// Builds the joint advising observation for the current task observations.
/// `knowledge[a]` is agent a's teaching knowledge (its live learner by
/// default; a fixed pre-trained policy in transfer settings).
pub fn build_advising_obs(
    obs: JointObservation,
    learners: &[Learner; 2],
    knowledge: [&Learner; 2],
) -> JointAdvisingObs {
    let ask = [
        (obs.0[0], learners[0].q_values(obs.0[0])),
        (obs.0[1], learners[1].q_values(obs.0[1])),
    ];
    let teach = [
        (
            obs.0[1],
            learners[1].q_values(obs.0[1]),
            knowledge[0].q_values(obs.0[1]),
        ),
        (
            obs.0[0],
            learners[0].q_values(obs.0[0]),
            knowledge[1].q_values(obs.0[0]),
        ),
    ];
    JointAdvisingObs { ask, teach }
}

impl JointAdvisingObs {
    fn write_onehot(buf: &mut [f64], idx: usize) {
        buf[idx] = 1.0;
    }

    /// Dense observation block for one actor.
    pub fn block(&self, slot: Slot, dims: &AdvisingDims) -> Vec<f64> {
        match slot {
            Slot::Ask(agent) => {
                let (obs, q) = &self.ask[agent];
                let mut v = vec![0.0; dims.ask_block()];
                Self::write_onehot(&mut v[..dims.obs_onehot], *obs);
                v[dims.obs_onehot..].copy_from_slice(q);
                v
            }
            Slot::Teach(agent) => {
                let (obs, peer_q, own_q) = &self.teach[agent];
                let mut v = vec![0.0; dims.teach_block()];
                Self::write_onehot(&mut v[..dims.obs_onehot], *obs);
                v[dims.obs_onehot..dims.obs_onehot + dims.actions].copy_from_slice(peer_q);
                v[dims.obs_onehot + dims.actions..].copy_from_slice(own_q);
                v
            }
        }
    }

    /// Dense joint observation: both ask blocks then both teach blocks.
    pub fn dense(&self, dims: &AdvisingDims) -> Vec<f64> {
        let mut v = vec![0.0; dims.joint_obs()];
        for agent in 0..2 {
            let b = self.block(Slot::Ask(agent), dims);
            let off = dims.ask_obs_offset(agent);
            v[off..off + b.len()].copy_from_slice(&b);
            let b = self.block(Slot::Teach(agent), dims);
            let off = dims.teach_obs_offset(agent);
            v[off..off + b.len()].copy_from_slice(&b);
        }
        v
    }
}

/// Indices chosen by the four advising actors at one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdvisingActions {
    pub ask: [usize; 2],
    pub teach: [usize; 2],
}

impl AdvisingActions {
    pub fn requested(&self, student: usize) -> bool {
        self.ask[student] == ASK_REQUEST
    }

    /// Advice produced by a teacher, None for the null action.
    pub fn advice_from(&self, teacher: usize, dims: &AdvisingDims) -> Option<usize> {
        let a = self.teach[teacher];
        if a < dims.actions {
            Some(a)
        } else {
            None
        }
    }

    /// Joint one-hot encoding in critic layout.
    pub fn onehot(&self, dims: &AdvisingDims) -> Vec<f64> {
        let mut v = vec![0.0; dims.joint_action()];
        for agent in 0..2 {
            v[agent * ASK_ACTIONS + self.ask[agent]] = 1.0;
            v[2 * ASK_ACTIONS + agent * dims.teach_actions() + self.teach[agent]] = 1.0;
        }
        v
    }
}

/// One advising-level transition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdvisingExperience {
    pub obs: JointAdvisingObs,
    pub actions: AdvisingActions,
    pub reward: f64,
    pub next_obs: JointAdvisingObs,
}

/// Bounded FIFO replay memory with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: VecDeque<AdvisingExperience>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        ReplayBuffer {
            items: VecDeque::new(),
            capacity,
        }
    }

    pub fn push(&mut self, exp: AdvisingExperience) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(exp);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, idx: usize) -> &AdvisingExperience {
        &self.items[idx]
    }

    fn sample_indices<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Vec<usize> {
        (0..batch).map(|_| rng.gen_range(0..self.items.len())).collect()
    }
}

/// Action-selection mode: Gumbel-Softmax sampling during training, argmax
/// for bootstrap targets and deterministic inspection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectMode {
    Sample,
    Greedy,
}

/// Hyperparameters of the advising level.
#[derive(Debug, Clone, Copy)]
pub struct AdvisingHyper {
    pub lr: f64,
    /// Actor step size, kept an order of magnitude below the critic's
    /// (the usual actor-critic split). When the critic's action gradients
    /// flatten — e.g. once every advised step earns the same reward — Adam
    /// renormalizes the residual noise to full-size steps; a slow actor
    /// keeps that drift from dismantling a working advising policy.
    pub actor_lr: f64,
    pub gamma: f64,
    pub gumbel_temperature: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub polyak: f64,
    pub reservoir_capacity: usize,
    /// L2 penalty on actor logits. Keeps policies near-uniform while the
    /// critic is uninformative; without it Adam turns vanishing gradients
    /// into a random walk that locks actors into arbitrary actions.
    pub logit_reg: f64,
}

impl Default for AdvisingHyper {
    fn default() -> Self {
        AdvisingHyper {
            lr: 1e-3,
            actor_lr: 1e-4,
            gamma: 0.99,
            gumbel_temperature: 1.0,
            batch_size: 64,
            replay_capacity: 100_000,
            polyak: 0.01,
            reservoir_capacity: 1000,
            logit_reg: 1e-3,
        }
    }
}

const HIDDEN: [usize; 3] = [32, 32, 32];

/// Initial logit bias toward requesting advice (ask actors) and away from
/// the null advice action (teach actors): fresh policies ask with
/// probability sigmoid(3) = 0.95 and respond with advice ~0.99 of the time,
/// so early execution is close to uniform-random over task actions.
const INIT_ADVICE_BIAS: f64 = 3.0;

/// The full advising level: four actors, critic, their slow-moving target
/// copies, optimizers, replay memory, and the reward scaler.
pub struct AdvisingPolicySet {
    dims: AdvisingDims,
    pub hyper: AdvisingHyper,
    ask_actors: [Mlp; 2],
    teach_actors: [Mlp; 2],
    critic: Mlp,
    target_ask: [Mlp; 2],
    target_teach: [Mlp; 2],
    target_critic: Mlp,
    ask_opts: [Adam; 2],
    teach_opts: [Adam; 2],
    critic_opt: Adam,
    pub buffer: ReplayBuffer,
    pub scaler: ReservoirScaler,
}

/// Serializable snapshot of the advising networks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdvisingSnapshot {
    pub dims: AdvisingDims,
    pub ask_actors: [Mlp; 2],
    pub teach_actors: [Mlp; 2],
    pub critic: Mlp,
}

impl AdvisingPolicySet {
    pub fn new<R: Rng + ?Sized>(dims: AdvisingDims, hyper: AdvisingHyper, rng: &mut R) -> Self {
        let ask = |rng: &mut R| Mlp::new(dims.ask_block(), &HIDDEN, ASK_ACTIONS, OutputKind::Linear, rng);
        let teach = |rng: &mut R| {
            Mlp::new(dims.teach_block(), &HIDDEN, dims.teach_actions(), OutputKind::Linear, rng)
        };
        let mut ask_actors = [ask(rng), ask(rng)];
        let mut teach_actors = [teach(rng), teach(rng)];
        // Fresh policies start biased toward exchanging advice. Zero-knowledge
        // task learners break greedy ties deterministically, so flowing advice
        // is the only exploration pressure the advising level controls; with
        // no advice there is never an advising reward to learn from. Training
        // prunes the advising rate from there.
        for a in 0..2 {
            ask_actors[a].output_bias_mut()[ASK_REQUEST] = INIT_ADVICE_BIAS;
            teach_actors[a].output_bias_mut()[dims.actions] = -INIT_ADVICE_BIAS;
        }
        let critic = Mlp::new(dims.critic_input(), &HIDDEN, 1, OutputKind::Linear, rng);
        let target_ask = ask_actors.clone();
        let target_teach = teach_actors.clone();
        let target_critic = critic.clone();
        let ask_opts = [
            Adam::new(ask_actors[0].param_count(), hyper.actor_lr),
            Adam::new(ask_actors[1].param_count(), hyper.actor_lr),
        ];
        let teach_opts = [
            Adam::new(teach_actors[0].param_count(), hyper.actor_lr),
            Adam::new(teach_actors[1].param_count(), hyper.actor_lr),
        ];
        let critic_opt = Adam::new(critic.param_count(), hyper.lr);
        let scaler_seed = rng.gen();
        AdvisingPolicySet {
            dims,
            hyper,
            ask_actors,
            teach_actors,
            critic,
            target_ask,
            target_teach,
            target_critic,
            ask_opts,
            teach_opts,
            critic_opt,
            buffer: ReplayBuffer::new(hyper.replay_capacity),
            scaler: ReservoirScaler::new(hyper.reservoir_capacity, scaler_seed),
        }
    }

    pub fn dims(&self) -> &AdvisingDims {
        &self.dims
    }

    pub fn actor(&self, slot: Slot) -> &Mlp {
        match slot {
            Slot::Ask(a) => &self.ask_actors[a],
            Slot::Teach(a) => &self.teach_actors[a],
        }
    }

    pub fn actor_mut(&mut self, slot: Slot) -> &mut Mlp {
        match slot {
            Slot::Ask(a) => &mut self.ask_actors[a],
            Slot::Teach(a) => &mut self.teach_actors[a],
        }
    }

    fn actor_and_opt_mut(&mut self, slot: Slot) -> (&mut Mlp, &mut Adam) {
        match slot {
            Slot::Ask(a) => (&mut self.ask_actors[a], &mut self.ask_opts[a]),
            Slot::Teach(a) => (&mut self.teach_actors[a], &mut self.teach_opts[a]),
        }
    }

    pub fn snapshot(&self) -> AdvisingSnapshot {
        AdvisingSnapshot {
            dims: self.dims,
            ask_actors: self.ask_actors.clone(),
            teach_actors: self.teach_actors.clone(),
            critic: self.critic.clone(),
        }
    }

    /// Rebuilds a policy set around snapshot networks with fresh training
    /// state (optimizers, replay memory, scaler).
    pub fn from_snapshot<R: Rng + ?Sized>(
        snap: AdvisingSnapshot,
        hyper: AdvisingHyper,
        rng: &mut R,
    ) -> Self {
        let mut set = AdvisingPolicySet::new(snap.dims, hyper, rng);
        set.target_ask = snap.ask_actors.clone();
        set.target_teach = snap.teach_actors.clone();
        set.ask_actors = snap.ask_actors;
        set.teach_actors = snap.teach_actors;
        set.target_critic = snap.critic.clone();
        set.critic = snap.critic;
        set
    }

    /// Categorical action probabilities of both of an agent's actors.
    pub fn action_probabilities(
        &self,
        obs: &JointAdvisingObs,
        agent: usize,
    ) -> (Vec<f64>, Vec<f64>) {
        let ask = softmax(&self.ask_actors[agent].forward(&obs.block(Slot::Ask(agent), &self.dims)));
        let teach =
            softmax(&self.teach_actors[agent].forward(&obs.block(Slot::Teach(agent), &self.dims)));
        (ask, teach)
    }

    /// Runs all four actors on their own observation blocks. Sampling draws
    /// one Gumbel-Softmax hard sample per actor; greedy takes the argmax.
    pub fn select_actions<R: Rng + ?Sized>(
        &self,
        obs: &JointAdvisingObs,
        mode: SelectMode,
        rng: &mut R,
    ) -> AdvisingActions {
        let pick = |net: &Mlp, block: &[f64], rng: &mut R| -> usize {
            let logits = net.forward(block);
            match mode {
                SelectMode::Greedy => argmax(&logits),
                SelectMode::Sample => {
                    let (hard, _) = gumbel_softmax(&logits, self.hyper.gumbel_temperature, rng);
                    argmax(&hard)
                }
            }
        };
        let ask = [
            pick(&self.ask_actors[0], &obs.block(Slot::Ask(0), &self.dims), rng),
            pick(&self.ask_actors[1], &obs.block(Slot::Ask(1), &self.dims), rng),
        ];
        let teach = [
            pick(&self.teach_actors[0], &obs.block(Slot::Teach(0), &self.dims), rng),
            pick(&self.teach_actors[1], &obs.block(Slot::Teach(1), &self.dims), rng),
        ];
        AdvisingActions { ask, teach }
    }

    /// Greedy joint advising action of the target actors, used for
    /// bootstrap targets.
    fn greedy_actions(&self, obs: &JointAdvisingObs) -> AdvisingActions {
        let ask = [
            argmax(&self.target_ask[0].forward(&obs.block(Slot::Ask(0), &self.dims))),
            argmax(&self.target_ask[1].forward(&obs.block(Slot::Ask(1), &self.dims))),
        ];
        let teach = [
            argmax(&self.target_teach[0].forward(&obs.block(Slot::Teach(0), &self.dims))),
            argmax(&self.target_teach[1].forward(&obs.block(Slot::Teach(1), &self.dims))),
        ];
        AdvisingActions { ask, teach }
    }

    /// Critic value of a joint observation and joint advising action.
    pub fn critic_value(&self, obs: &JointAdvisingObs, actions: &AdvisingActions) -> f64 {
        let mut input = obs.dense(&self.dims);
        input.extend(actions.onehot(&self.dims));
        self.critic.forward(&input)[0]
    }

    /// One TD regression step of the centralized critic on a uniform
    /// minibatch: targets bootstrap through the target critic at the greedy
    /// joint action of the target actors. Returns the pre-step batch loss.
    pub fn critic_update<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<f64> {
        if self.buffer.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        let batch = self.buffer.sample_indices(self.hyper.batch_size, rng);
        let mut grads = self.critic.zero_grads();
        let mut loss = 0.0;
        let inv_b = 1.0 / batch.len() as f64;
        for &idx in &batch {
            let exp = self.buffer.get(idx);
            let next_actions = self.greedy_actions(&exp.next_obs);
            let mut next_input = exp.next_obs.dense(&self.dims);
            next_input.extend(next_actions.onehot(&self.dims));
            let target = exp.reward + self.hyper.gamma * self.target_critic.forward(&next_input)[0];

            let mut input = exp.obs.dense(&self.dims);
            input.extend(exp.actions.onehot(&self.dims));
            let cache = self.critic.forward_cached(&input);
            let pred = cache.output()[0];
            let err = pred - target;
            loss += err * err * inv_b;
            self.critic.backward(&cache, &[2.0 * err * inv_b], &mut grads);
        }
        self.critic_opt.step(self.critic.params_mut(), &grads)?;
        self.target_critic.polyak_from(&self.critic, self.hyper.polyak);
        Ok(loss)
    }

    /// Mean critic value of a minibatch when one actor's stored action is
    /// replaced by its relaxed Gumbel-Softmax sample, minus the logit
    /// penalty, together with the gradient of that objective with respect
    /// to the actor's parameters. `noise` holds one Gumbel perturbation
    /// vector per batch element.
    pub fn actor_surrogate(
        &self,
        batch: &[usize],
        slot: Slot,
        noise: &[Vec<f64>],
    ) -> (f64, Vec<f64>) {
        let actor = self.actor(slot);
        let dim = actor.output_dim();
        let action_offset = match slot {
            Slot::Ask(a) => self.dims.ask_action_offset(a),
            Slot::Teach(a) => self.dims.teach_action_offset(a),
        };
        let mut grads = actor.zero_grads();
        let mut critic_scratch = self.critic.zero_grads();
        let inv_b = 1.0 / batch.len() as f64;
        let tau = self.hyper.gumbel_temperature;
        let mut objective = 0.0;
        let reg = self.hyper.logit_reg * inv_b / dim as f64;
        for (b, &idx) in batch.iter().enumerate() {
            let exp = self.buffer.get(idx);
            let block = exp.obs.block(slot, &self.dims);
            let cache = actor.forward_cached(&block);
            let logits = cache.output();
            let perturbed: Vec<f64> = logits
                .iter()
                .zip(&noise[b])
                .map(|(&l, &g)| (l + g) / tau)
                .collect();
            let soft = softmax(&perturbed);

            let mut input = exp.obs.dense(&self.dims);
            input.extend(exp.actions.onehot(&self.dims));
            input[action_offset..action_offset + dim].copy_from_slice(&soft);
            let ccache = self.critic.forward_cached(&input);
            objective += ccache.output()[0] * inv_b;
            objective -= reg * logits.iter().map(|l| l * l).sum::<f64>();

            let input_grad = self.critic.backward(&ccache, &[inv_b], &mut critic_scratch);
            let upstream = &input_grad[action_offset..action_offset + dim];
            let mut dlogits: Vec<f64> = softmax_vjp(&soft, upstream)
                .into_iter()
                .map(|g| g / tau)
                .collect();
            for (d, &l) in dlogits.iter_mut().zip(logits) {
                *d -= 2.0 * reg * l;
            }
            actor.backward(&cache, &dlogits, &mut grads);
        }
        (objective, grads)
    }

    /// One ascent step for each of the four actors on a shared minibatch,
    /// with fresh Gumbel noise per sample. Returns per-actor gradient norms.
    pub fn actor_update<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<[f64; 4]> {
        if self.buffer.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        let batch = self.buffer.sample_indices(self.hyper.batch_size, rng);
        let mut norms = [0.0; 4];
        for (i, slot) in Slot::ALL.iter().enumerate() {
            let dim = self.actor(*slot).output_dim();
            let noise: Vec<Vec<f64>> = batch
                .iter()
                .map(|_| {
                    (0..dim)
                        .map(|_| {
                            let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
                            -(-u.ln()).ln()
                        })
                        .collect()
                })
                .collect();
            let (_, grads) = self.actor_surrogate(&batch, *slot, &noise);
            norms[i] = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
            // Ascent on the critic value.
            let descent: Vec<f64> = grads.iter().map(|g| -g).collect();
            let (actor, opt) = self.actor_and_opt_mut(*slot);
            opt.step(actor.params_mut(), &descent)?;
        }
        for a in 0..2 {
            self.target_ask[a].polyak_from(&self.ask_actors[a], self.hyper.polyak);
            self.target_teach[a].polyak_from(&self.teach_actors[a], self.hyper.polyak);
        }
        Ok(norms)
    }

    /// Copies every online network into its target.
    pub fn hard_sync_target(&mut self) {
        self.target_critic = self.critic.clone();
        self.target_ask = self.ask_actors.clone();
        self.target_teach = self.teach_actors.clone();
    }

    #[cfg(test)]
    fn critic_params_mut(&mut self) -> &mut [f64] {
        self.critic.params_mut()
    }

    #[cfg(test)]
    fn target_critic_params(&self) -> &[f64] {
        self.target_critic.params()
    }

    #[cfg(test)]
    fn critic_params(&self) -> &[f64] {
        self.critic.params()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qlearn::TabularQ;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn dims() -> AdvisingDims {
        AdvisingDims::new(6, 2)
    }

    fn obs_with(q0: [f64; 2], q1: [f64; 2]) -> JointAdvisingObs {
        JointAdvisingObs {
            ask: [(0, q0.to_vec()), (1, q1.to_vec())],
            teach: [(1, q1.to_vec(), q0.to_vec()), (0, q0.to_vec(), q1.to_vec())],
        }
    }

    #[test]
    fn dimension_arithmetic() {
        let d = dims();
        assert_eq!(d.ask_block(), 8);
        assert_eq!(d.teach_block(), 10);
        assert_eq!(d.teach_actions(), 3);
        assert_eq!(d.joint_obs(), 36);
        assert_eq!(d.joint_action(), 10);
        assert_eq!(d.critic_input(), 46);
    }

    #[test]
    fn advising_obs_blocks_follow_construction_rule() {
        let mut l0 = Learner::Tabular(TabularQ::new(2, 0.1, 0.95, 0.0));
        let l1 = Learner::Tabular(TabularQ::new(2, 0.1, 0.95, 0.0));
        l0.update(3, 1, 1.0, 4, true);
        let learners = [l0, l1];
        let joint = build_advising_obs(
            JointObservation([3, 5]),
            &learners,
            [&learners[0].clone(), &learners[1].clone()],
        );
        // Agent 0's student block: its own observation and Q-vector.
        assert_eq!(joint.ask[0].0, 3);
        assert_eq!(joint.ask[0].1, vec![0.0, 0.1]);
        // Agent 0's teacher block observes the peer: peer obs, peer Q, own Q
        // at the peer's observation.
        assert_eq!(joint.teach[0].0, 5);
        assert_eq!(joint.teach[0].1, vec![0.0, 0.0]);
        assert_eq!(joint.teach[0].2, learners[0].q_values(5));

        let d = AdvisingDims::new(6, 2);
        let block = joint.block(Slot::Ask(0), &d);
        assert_eq!(block.len(), 8);
        assert_eq!(block[3], 1.0, "one-hot of obs 3");
        assert_eq!(&block[6..], &[0.0, 0.1]);
        let dense = joint.dense(&d);
        assert_eq!(dense.len(), d.joint_obs());
        assert_eq!(&dense[..8], block.as_slice());
    }

    #[test]
    fn action_onehot_layout() {
        let d = dims();
        let acts = AdvisingActions { ask: [1, 0], teach: [2, 0] };
        assert!(acts.requested(0));
        assert!(!acts.requested(1));
        assert_eq!(acts.advice_from(0, &d), None, "index 2 is the null action");
        assert_eq!(acts.advice_from(1, &d), Some(0));
        let v = acts.onehot(&d);
        assert_eq!(v.len(), 10);
        let expect = [0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0];
        assert_eq!(v, expect);
    }

    #[test]
    fn replay_buffer_is_bounded_fifo() {
        let mut buf = ReplayBuffer::new(3);
        let exp = |r: f64| AdvisingExperience {
            obs: obs_with([0.0, 0.0], [0.0, 0.0]),
            actions: AdvisingActions { ask: [0, 0], teach: [0, 0] },
            reward: r,
            next_obs: obs_with([0.0, 0.0], [0.0, 0.0]),
        };
        for i in 0..5 {
            buf.push(exp(i as f64));
        }
        assert_eq!(buf.len(), 3);
        assert_eq!(buf.get(0).reward, 2.0, "oldest entries evicted first");
        assert_eq!(buf.get(2).reward, 4.0);
    }

    #[test]
    fn updates_on_empty_buffer_are_errors() {
        let mut set = AdvisingPolicySet::new(dims(), AdvisingHyper::default(), &mut rng(0));
        assert!(matches!(set.critic_update(&mut rng(1)), Err(Error::EmptyBuffer)));
        assert!(matches!(set.actor_update(&mut rng(1)), Err(Error::EmptyBuffer)));
    }

    #[test]
    fn fresh_target_critic_matches_online() {
        let set = AdvisingPolicySet::new(dims(), AdvisingHyper::default(), &mut rng(2));
        assert_eq!(set.critic_params(), set.target_critic_params());
    }

    #[test]
    fn zeroed_ask_actor_requests_half_the_time() {
        let mut set = AdvisingPolicySet::new(dims(), AdvisingHyper::default(), &mut rng(3));
        for p in set.ask_actors[0].params_mut() {
            *p = 0.0;
        }
        let obs = obs_with([0.3, 0.7], [0.0, 0.0]);
        let mut r = rng(4);
        let n = 10_000;
        let requests = (0..n)
            .filter(|_| set.select_actions(&obs, SelectMode::Sample, &mut r).requested(0))
            .count();
        let sigma = ((n as f64) * 0.25).sqrt();
        assert!(
            ((requests as f64) - (n as f64) * 0.5).abs() < 3.0 * sigma,
            "uniform logits should request about half the time, got {requests}/{n}"
        );
    }

    #[test]
    fn greedy_selection_is_deterministic() {
        let set = AdvisingPolicySet::new(dims(), AdvisingHyper::default(), &mut rng(5));
        let obs = obs_with([0.1, 0.9], [0.2, 0.2]);
        let a1 = set.select_actions(&obs, SelectMode::Greedy, &mut rng(6));
        let a2 = set.select_actions(&obs, SelectMode::Greedy, &mut rng(7));
        assert_eq!(a1, a2);
    }

    fn fill_buffer_with_reward_rule(
        set: &mut AdvisingPolicySet,
        obs: &JointAdvisingObs,
        reward: impl Fn(&AdvisingActions) -> f64,
        n: usize,
        seed: u64,
    ) {
        let mut r = rng(seed);
        for _ in 0..n {
            let actions = set.select_actions(obs, SelectMode::Sample, &mut r);
            set.buffer.push(AdvisingExperience {
                obs: obs.clone(),
                actions,
                reward: reward(&actions),
                next_obs: obs.clone(),
            });
        }
    }

    #[test]
    fn critic_regresses_to_constant_reward() {
        let mut hyper = AdvisingHyper::default();
        hyper.gamma = 0.0;
        let mut set = AdvisingPolicySet::new(dims(), hyper, &mut rng(8));
        let obs = obs_with([0.5, 0.1], [0.2, 0.8]);
        fill_buffer_with_reward_rule(&mut set, &obs, |_| 1.0, 256, 9);
        let mut r = rng(10);
        let mut last = f64::INFINITY;
        for i in 0..800 {
            let loss = set.critic_update(&mut r).unwrap();
            if i % 200 == 0 {
                assert!(loss <= last + 0.5, "loss should trend down, {last} -> {loss}");
                last = loss;
            }
        }
        let sample = set.buffer.get(0);
        let v = set.critic_value(&sample.obs, &sample.actions);
        assert!((v - 1.0).abs() < 0.1, "critic should predict ~1.0, got {v}");
    }

    #[test]
    fn constant_critic_yields_zero_actor_gradients() {
        // Regularization off: this isolates the critic path.
        let hyper = AdvisingHyper { logit_reg: 0.0, ..AdvisingHyper::default() };
        let mut set = AdvisingPolicySet::new(dims(), hyper, &mut rng(11));
        for p in set.critic_params_mut() {
            *p = 0.0;
        }
        let obs = obs_with([0.5, 0.1], [0.2, 0.8]);
        fill_buffer_with_reward_rule(&mut set, &obs, |_| 0.0, 64, 12);
        let batch: Vec<usize> = (0..16).collect();
        for slot in Slot::ALL {
            let dim = set.actor(slot).output_dim();
            let noise: Vec<Vec<f64>> = (0..16).map(|_| vec![0.3; dim]).collect();
            let (_, grads) = set.actor_surrogate(&batch, slot, &noise);
            let norm: f64 = grads.iter().map(|g| g * g).sum::<f64>();
            assert!(
                norm.sqrt() < 1e-8,
                "critic constant in actions must give zero actor gradient"
            );
        }
    }

    #[test]
    fn actor_surrogate_gradient_matches_finite_differences() {
        let mut set = AdvisingPolicySet::new(dims(), AdvisingHyper::default(), &mut rng(13));
        let obs = obs_with([0.4, 0.6], [0.9, 0.1]);
        fill_buffer_with_reward_rule(&mut set, &obs, |a| a.teach[0] as f64 - a.ask[1] as f64, 32, 14);
        let batch: Vec<usize> = (0..8).collect();
        let mut r = rng(15);
        for slot in [Slot::Ask(0), Slot::Teach(1)] {
            let dim = set.actor(slot).output_dim();
            let noise: Vec<Vec<f64>> = (0..8)
                .map(|_| {
                    (0..dim)
                        .map(|_| {
                            let u: f64 = r.gen::<f64>().max(f64::MIN_POSITIVE);
                            -(-u.ln()).ln()
                        })
                        .collect()
                })
                .collect();
            let (_, grads) = set.actor_surrogate(&batch, slot, &noise);

            // Probe a spread of parameter indices with central differences.
            let count = set.actor(slot).param_count();
            let h = 1e-5;
            for probe in 0..60 {
                let idx = (probe * 997) % count;
                let perturbed_obj = |set: &mut AdvisingPolicySet, delta: f64| -> f64 {
                    let (actor, _) = set.actor_and_opt_mut(slot);
                    actor.params_mut()[idx] += delta;
                    let (j, _) = set.actor_surrogate(&batch, slot, &noise);
                    let (actor, _) = set.actor_and_opt_mut(slot);
                    actor.params_mut()[idx] -= delta;
                    j
                };
                let plus = perturbed_obj(&mut set, h);
                let minus = perturbed_obj(&mut set, -h);
                let num = (plus - minus) / (2.0 * h);
                let ana = grads[idx];
                let rel = (num - ana).abs() / (num.abs() + ana.abs()).max(1e-3);
                assert!(
                    rel < 1e-3,
                    "{slot:?} param {idx}: numeric {num} vs analytic {ana}"
                );
            }
        }
    }

    #[test]
    fn actors_learn_to_take_rewarded_advising_actions() {
        // Reward 1 when teacher 0 advises action 1; the advising level should
        // discover this through the critic.
        let mut hyper = AdvisingHyper::default();
        hyper.gamma = 0.0;
        let mut set = AdvisingPolicySet::new(dims(), hyper, &mut rng(16));
        let obs = obs_with([0.5, 0.1], [0.2, 0.8]);
        fill_buffer_with_reward_rule(
            &mut set,
            &obs,
            |a| if a.teach[0] == 1 { 1.0 } else { 0.0 },
            512,
            17,
        );
        let (_, before) = set.action_probabilities(&obs, 0);
        let mut r = rng(18);
        for _ in 0..400 {
            set.critic_update(&mut r).unwrap();
        }
        for _ in 0..300 {
            set.actor_update(&mut r).unwrap();
        }
        let (_, after) = set.action_probabilities(&obs, 0);
        assert!(
            after[1] > before[1] && after[1] > 0.8,
            "teach actor should favor the rewarded action: {before:?} -> {after:?}"
        );
    }

    #[test]
    fn snapshot_round_trip_preserves_networks() {
        let mut set = AdvisingPolicySet::new(dims(), AdvisingHyper::default(), &mut rng(19));
        let obs = obs_with([0.4, 0.6], [0.9, 0.1]);
        fill_buffer_with_reward_rule(&mut set, &obs, |_| 0.5, 64, 20);
        let mut r = rng(21);
        for _ in 0..10 {
            set.critic_update(&mut r).unwrap();
            set.actor_update(&mut r).unwrap();
        }
        let snap = set.snapshot();
        let json = serde_json::to_string(&snap).unwrap();
        let back: AdvisingSnapshot = serde_json::from_str(&json).unwrap();
        let restored = AdvisingPolicySet::from_snapshot(back, AdvisingHyper::default(), &mut rng(22));
        let a1 = set.select_actions(&obs, SelectMode::Greedy, &mut rng(23));
        let a2 = restored.select_actions(&obs, SelectMode::Greedy, &mut rng(24));
        assert_eq!(a1, a2);
        assert_eq!(
            set.critic_value(&obs, &a1),
            restored.critic_value(&obs, &a2)
        );
    }
}
