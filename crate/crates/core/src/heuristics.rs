//! Heuristic advising baselines.
//!
//! Student-initiated kinds decide when to request advice from their own
//! state importance; teacher-initiated kinds decide unilaterally when to
//! advise. All variants advise the teacher's greedy action at the student's
//! observation; the teacher Q-vector is supplied by the caller, which selects
//! between a pre-trained expert policy and the live teammate learner.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::qlearn::argmax;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeuristicKind {
    /// Student asks when its own state importance is at least k.
    AskImportant,
    /// Student asks when its own state importance is below k.
    AskUncertain,
    /// Teacher advises every step until its advice budget depletes.
    EarlyAdvising,
    /// Teacher advises when its state importance for the student's intended
    /// action is at least k.
    ImportanceAdvising,
    /// Teacher advises whenever the student's intended action differs from
    /// the teacher's greedy action.
    EarlyCorrecting,
    /// Teacher advises when the actions differ and importance is at least k.
    CorrectImportant,
    /// Teacher advises probabilistically, trusting well-visited states.
    AdHocVisit,
    /// Visit-based advising additionally scaled by TD-error confidence.
    AdHocTd,
}

impl HeuristicKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ask_important" => Ok(Self::AskImportant),
            "ask_uncertain" => Ok(Self::AskUncertain),
            "early_advising" => Ok(Self::EarlyAdvising),
            "importance_advising" => Ok(Self::ImportanceAdvising),
            "early_correcting" => Ok(Self::EarlyCorrecting),
            "correct_important" => Ok(Self::CorrectImportant),
            "adhoc_visit" => Ok(Self::AdHocVisit),
            "adhoc_td" => Ok(Self::AdHocTd),
            other => Err(Error::Config(format!("unknown heuristic '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::AskImportant => "ask_important",
            Self::AskUncertain => "ask_uncertain",
            Self::EarlyAdvising => "early_advising",
            Self::ImportanceAdvising => "importance_advising",
            Self::EarlyCorrecting => "early_correcting",
            Self::CorrectImportant => "correct_important",
            Self::AdHocVisit => "adhoc_visit",
            Self::AdHocTd => "adhoc_td",
        }
    }

    /// Whether advice flows only on an explicit student request.
    pub fn student_initiated(&self) -> bool {
        matches!(self, Self::AskImportant | Self::AskUncertain)
    }

    /// Whether the teacher side draws on a pre-trained expert policy. The
    /// ad hoc variants instead advise from the live teammate learner.
    pub fn needs_expert(&self) -> bool {
        !matches!(self, Self::AdHocVisit | Self::AdHocTd)
    }

    /// Whether advice consumes the finite advice budget.
    pub fn budgeted(&self) -> bool {
        matches!(self, Self::EarlyAdvising)
    }
}

/// State importance of an intended action: gap between the best Q-value and
/// the intended action's Q-value.
pub fn state_importance(q: &[f64], intended: usize) -> f64 {
    let best = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    best - q[intended]
}

/// Probability that an ad hoc teacher gives advice for a state it has
/// visited n times: 1 - (1 + upsilon)^(-n). Zero for unvisited states,
/// approaching one with familiarity.
pub fn adhoc_give_probability(upsilon: f64, n: u64) -> f64 {
    1.0 - (1.0 + upsilon).powi(-(n.min(i32::MAX as u64) as i32))
}

/// Exponential statistics over one agent's absolute TD errors.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct TdStats {
    ema_abs: f64,
    max_abs: f64,
    seen: bool,
}

/// Mutable state shared by the heuristic baselines.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeuristicState {
    /// Importance threshold k.
    pub threshold: f64,
    /// Remaining advice budget for budgeted kinds.
    pub budget: usize,
    /// Familiarity growth rate of the ad hoc confidence function.
    pub upsilon: f64,
    visit_counts: [BTreeMap<usize, u64>; 2],
    td_stats: [TdStats; 2],
}

impl HeuristicState {
    pub fn new(threshold: f64, budget: usize, upsilon: f64) -> Self {
        HeuristicState {
            threshold,
            budget,
            upsilon,
            visit_counts: [BTreeMap::new(), BTreeMap::new()],
            td_stats: [TdStats::default(), TdStats::default()],
        }
    }

    /// Records that an agent observed `obs` (its own observation).
    pub fn record_visit(&mut self, agent: usize, obs: usize) {
        *self.visit_counts[agent].entry(obs).or_insert(0) += 1;
    }

    pub fn visits(&self, agent: usize, obs: usize) -> u64 {
        self.visit_counts[agent].get(&obs).copied().unwrap_or(0)
    }

    /// Records the magnitude of an agent's TD error after its online update.
    pub fn record_td(&mut self, agent: usize, abs_delta: f64) {
        let s = &mut self.td_stats[agent];
        if !s.seen {
            s.ema_abs = abs_delta;
            s.seen = true;
        } else {
            s.ema_abs += 0.01 * (abs_delta - s.ema_abs);
        }
        s.max_abs = s.max_abs.max(abs_delta);
    }

    /// Confidence in an agent's knowledge from its TD-error trajectory: near
    /// zero while errors are as large as ever seen, approaching one as the
    /// running error shrinks relative to the historical maximum.
    pub fn td_confidence(&self, agent: usize) -> f64 {
        let s = &self.td_stats[agent];
        if !s.seen || s.max_abs <= 0.0 {
            return 0.0;
        }
        (1.0 - s.ema_abs / s.max_abs).clamp(0.0, 1.0)
    }
}

/// Student-side request decision. Teacher-initiated kinds never request.
pub fn decide_request(
    kind: HeuristicKind,
    state: &HeuristicState,
    student_q: &[f64],
    intended: usize,
) -> bool {
    match kind {
        HeuristicKind::AskImportant => state_importance(student_q, intended) >= state.threshold,
        HeuristicKind::AskUncertain => state_importance(student_q, intended) < state.threshold,
        _ => false,
    }
}

/// Teacher-side advising decision. `teacher_q` is the teacher's knowledge at
/// the student's observation, `intended` the student's pre-advice action, and
/// `teacher` the teacher's agent index (for visit counts and TD confidence).
/// Returns the advised action, or None to stay silent.
pub fn decide_advise<R: Rng + ?Sized>(
    kind: HeuristicKind,
    state: &mut HeuristicState,
    teacher: usize,
    student_obs: usize,
    teacher_q: &[f64],
    intended: usize,
    rng: &mut R,
) -> Option<usize> {
    let greedy = argmax(teacher_q);
    let importance = state_importance(teacher_q, intended);
    let advise = match kind {
        HeuristicKind::AskImportant | HeuristicKind::AskUncertain => true,
        HeuristicKind::EarlyAdvising => state.budget > 0,
        HeuristicKind::ImportanceAdvising => importance >= state.threshold,
        HeuristicKind::EarlyCorrecting => intended != greedy,
        HeuristicKind::CorrectImportant => intended != greedy && importance >= state.threshold,
        HeuristicKind::AdHocVisit | HeuristicKind::AdHocTd => {
            let mut p =
                adhoc_give_probability(state.upsilon, state.visits(teacher, student_obs));
            if kind == HeuristicKind::AdHocTd {
                p *= state.td_confidence(teacher);
            }
            p > 0.0 && rng.gen::<f64>() < p
        }
    };
    if !advise {
        return None;
    }
    if kind.budgeted() {
        state.budget -= 1;
    }
    Some(greedy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(0)
    }

    fn state() -> HeuristicState {
        HeuristicState::new(0.01, 100, 0.5)
    }

    #[test]
    fn importance_is_gap_to_best() {
        assert!((state_importance(&[0.5, 0.9], 0) - 0.4).abs() < 1e-12);
        assert_eq!(state_importance(&[0.5, 0.9], 1), 0.0);
        assert_eq!(state_importance(&[0.0, 0.0], 0), 0.0);
    }

    #[test]
    fn ask_variants_split_on_threshold() {
        let st = state();
        let q = [0.5, 0.9];
        assert!(decide_request(HeuristicKind::AskImportant, &st, &q, 0));
        assert!(!decide_request(HeuristicKind::AskUncertain, &st, &q, 0));
        assert!(!decide_request(HeuristicKind::AskImportant, &st, &q, 1));
        assert!(decide_request(HeuristicKind::AskUncertain, &st, &q, 1));
        // Teacher-initiated kinds never request.
        assert!(!decide_request(HeuristicKind::ImportanceAdvising, &st, &q, 0));
        assert!(!decide_request(HeuristicKind::EarlyAdvising, &st, &q, 0));
    }

    #[test]
    fn fresh_q_vector_asks_uncertain_not_important() {
        let st = state();
        let q = [0.0, 0.0];
        assert!(!decide_request(HeuristicKind::AskImportant, &st, &q, 0));
        assert!(decide_request(HeuristicKind::AskUncertain, &st, &q, 0));
    }

    #[test]
    fn early_advising_spends_budget_exactly() {
        let mut st = HeuristicState::new(0.01, 3, 0.5);
        let q = [0.0, 1.0];
        let mut given = 0;
        for _ in 0..10 {
            if decide_advise(HeuristicKind::EarlyAdvising, &mut st, 0, 5, &q, 0, &mut rng())
                .is_some()
            {
                given += 1;
            }
        }
        assert_eq!(given, 3);
        assert_eq!(st.budget, 0);
    }

    #[test]
    fn importance_advising_ignores_unimportant_states() {
        let mut st = state();
        let q = [0.5, 0.9];
        assert_eq!(
            decide_advise(HeuristicKind::ImportanceAdvising, &mut st, 0, 5, &q, 0, &mut rng()),
            Some(1)
        );
        assert_eq!(
            decide_advise(HeuristicKind::ImportanceAdvising, &mut st, 0, 5, &q, 1, &mut rng()),
            None
        );
        // An ignorant teacher (flat Q) stays silent.
        let flat = [0.0, 0.0];
        assert_eq!(
            decide_advise(HeuristicKind::ImportanceAdvising, &mut st, 0, 5, &flat, 0, &mut rng()),
            None
        );
    }

    #[test]
    fn early_correcting_corrects_any_mismatch() {
        let mut st = state();
        let q = [0.9, 0.8999];
        assert_eq!(
            decide_advise(HeuristicKind::EarlyCorrecting, &mut st, 0, 5, &q, 1, &mut rng()),
            Some(0)
        );
        assert_eq!(
            decide_advise(HeuristicKind::EarlyCorrecting, &mut st, 0, 5, &q, 0, &mut rng()),
            None
        );
    }

    #[test]
    fn correct_important_needs_mismatch_and_importance() {
        let mut st = state();
        // Mismatch but the gap is below threshold.
        let near = [0.9, 0.8999];
        assert_eq!(
            decide_advise(HeuristicKind::CorrectImportant, &mut st, 0, 5, &near, 1, &mut rng()),
            None
        );
        let wide = [0.9, 0.5];
        assert_eq!(
            decide_advise(HeuristicKind::CorrectImportant, &mut st, 0, 5, &wide, 1, &mut rng()),
            Some(0)
        );
        assert_eq!(
            decide_advise(HeuristicKind::CorrectImportant, &mut st, 0, 5, &wide, 0, &mut rng()),
            None
        );
    }

    #[test]
    fn adhoc_probability_grows_with_familiarity() {
        assert_eq!(adhoc_give_probability(0.5, 0), 0.0);
        let p1 = adhoc_give_probability(0.5, 1);
        assert!((p1 - (1.0 - 1.0 / 1.5)).abs() < 1e-12);
        let p5 = adhoc_give_probability(0.5, 5);
        assert!(p1 < p5 && p5 < 1.0);
        assert!(adhoc_give_probability(0.5, 200) > 0.999999);
    }

    #[test]
    fn adhoc_visit_never_advises_fresh_states() {
        let mut st = state();
        let q = [0.0, 1.0];
        let mut r = rng();
        for _ in 0..100 {
            assert_eq!(
                decide_advise(HeuristicKind::AdHocVisit, &mut st, 0, 7, &q, 0, &mut r),
                None
            );
        }
    }

    #[test]
    fn adhoc_visit_advises_familiar_states_mostly() {
        let mut st = state();
        for _ in 0..50 {
            st.record_visit(0, 7);
        }
        let q = [0.0, 1.0];
        let mut r = rng();
        let given = (0..1000)
            .filter(|_| {
                decide_advise(HeuristicKind::AdHocVisit, &mut st, 0, 7, &q, 0, &mut r).is_some()
            })
            .count();
        assert!(given > 990, "50 visits should advise almost always, got {given}");
    }

    #[test]
    fn adhoc_td_waits_for_confidence() {
        let mut st = state();
        for _ in 0..50 {
            st.record_visit(0, 7);
        }
        // Errors as large as ever seen: zero confidence, no advice.
        st.record_td(0, 1.0);
        assert_eq!(st.td_confidence(0), 0.0);
        let q = [0.0, 1.0];
        let mut r = rng();
        assert_eq!(
            decide_advise(HeuristicKind::AdHocTd, &mut st, 0, 7, &q, 0, &mut r),
            None
        );
        // Errors shrink far below the maximum: confidence rises.
        for _ in 0..2000 {
            st.record_td(0, 0.001);
        }
        assert!(st.td_confidence(0) > 0.9);
        let given = (0..100)
            .filter(|_| decide_advise(HeuristicKind::AdHocTd, &mut st, 0, 7, &q, 0, &mut r).is_some())
            .count();
        assert!(given > 80, "confident teacher should advise, got {given}");
    }

    #[test]
    fn visit_counts_are_per_agent() {
        let mut st = state();
        st.record_visit(0, 3);
        st.record_visit(0, 3);
        st.record_visit(1, 3);
        assert_eq!(st.visits(0, 3), 2);
        assert_eq!(st.visits(1, 3), 1);
        assert_eq!(st.visits(1, 4), 0);
    }
}
