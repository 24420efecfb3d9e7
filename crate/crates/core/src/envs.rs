//! Benchmark domains: a repeated coordination game and two grid worlds.
//!
//! All domains are fully deterministic two-agent games with a shared reward.
//! Observations are small integer identifiers suitable for table lookup and
//! one-hot encoding.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Per-agent observation identifiers for both agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointObservation(pub [usize; 2]);

/// Outcome of one environment step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub reward: f64,
    pub obs: JointObservation,
    pub done: bool,
}

/// The three benchmark domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainId {
    Repeated,
    Hallway,
    Room,
}

impl DomainId {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "repeated" => Ok(DomainId::Repeated),
            "hallway" => Ok(DomainId::Hallway),
            "room" => Ok(DomainId::Room),
            other => Err(Error::Config(format!("unknown domain '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DomainId::Repeated => "repeated",
            DomainId::Hallway => "hallway",
            DomainId::Room => "room",
        }
    }
}

// ----- repeated coordination game -------------------------------------------

/// Five-round matrix game. Both agents observe the round index; the payoff is
/// asymmetric so that one joint action earns 1.0, the swapped pair only 0.1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepeatedGame {
    payoff: [[f64; 2]; 2],
    horizon: usize,
    t: usize,
    done: bool,
}

impl RepeatedGame {
    pub fn new(horizon: usize) -> Self {
        RepeatedGame {
            payoff: [[0.0, 1.0], [0.1, 0.0]],
            horizon,
            t: 0,
            done: false,
        }
    }
}

// ----- grid worlds -----------------------------------------------------------

/// Grid cell as (col, row).
pub type Cell = (usize, usize);

/// Rectangular grid in which both agents move simultaneously. The team earns
/// reward 1 on the transition that first places the agents on the two distinct
/// goal cells (one agent on each); the episode then ends. Agents may occupy
/// the same cell; moves off the grid leave the position unchanged.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridWorld {
    pub width: usize,
    pub height: usize,
    start_cells: [Cell; 2],
    goal_cells: [Cell; 2],
    horizon: usize,
    positions: [Cell; 2],
    t: usize,
    done: bool,
}

impl GridWorld {
    pub fn new(
        width: usize,
        height: usize,
        start_cells: [Cell; 2],
        goal_cells: [Cell; 2],
        horizon: usize,
    ) -> Result<Self> {
        let in_bounds = |c: &Cell| c.0 < width && c.1 < height;
        if !start_cells.iter().all(in_bounds) || !goal_cells.iter().all(in_bounds) {
            return Err(Error::Config("start/goal cell outside grid".into()));
        }
        if goal_cells[0] == goal_cells[1] {
            return Err(Error::Config("goal cells must be distinct".into()));
        }
        Ok(GridWorld {
            width,
            height,
            start_cells,
            goal_cells,
            horizon,
            positions: start_cells,
            t: 0,
            done: false,
        })
    }

    /// Actions are indexed up/right/down/left for 2-D grids and left/right for
    /// single-row grids.
    pub fn action_count(&self) -> usize {
        if self.height == 1 {
            2
        } else {
            4
        }
    }

    fn apply_move(&self, pos: Cell, action: usize) -> Cell {
        let (col, row) = pos;
        if self.height == 1 {
            // left, right
            match action {
                0 => (col.saturating_sub(1), row),
                _ => ((col + 1).min(self.width - 1), row),
            }
        } else {
            // up, right, down, left
            match action {
                0 => (col, row.saturating_sub(1)),
                1 => ((col + 1).min(self.width - 1), row),
                2 => (col, (row + 1).min(self.height - 1)),
                _ => (col.saturating_sub(1), row),
            }
        }
    }

    fn obs_of(&self, pos: Cell) -> usize {
        pos.1 * self.width + pos.0
    }

    fn at_goals(&self) -> bool {
        let [p0, p1] = self.positions;
        let [g0, g1] = self.goal_cells;
        (p0 == g0 && p1 == g1) || (p0 == g1 && p1 == g0)
    }

    pub fn goal_cells(&self) -> [Cell; 2] {
        self.goal_cells
    }

    pub fn start_cells(&self) -> [Cell; 2] {
        self.start_cells
    }

    pub fn positions(&self) -> [Cell; 2] {
        self.positions
    }
}

// ----- unified environment ---------------------------------------------------

/// A two-agent benchmark environment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Env {
    Repeated(RepeatedGame),
    Grid(GridWorld),
}

impl Env {
    /// Standard instance of a named domain.
    pub fn standard(id: DomainId) -> Self {
        match id {
            DomainId::Repeated => Env::Repeated(RepeatedGame::new(5)),
            DomainId::Hallway => Env::Grid(
                GridWorld::new(17, 1, [(6, 0), (10, 0)], [(0, 0), (16, 0)], 30)
                    .expect("hallway layout is valid"),
            ),
            DomainId::Room => Env::Grid(
                GridWorld::new(17, 5, [(6, 2), (10, 2)], [(0, 2), (16, 2)], 60)
                    .expect("room layout is valid"),
            ),
        }
    }

    /// Restores the initial state and returns the initial observations. The
    /// rng parameter is part of the interface for stochastic domains; the
    /// built-in domains ignore it.
    pub fn reset<R: Rng + ?Sized>(&mut self, _rng: &mut R) -> JointObservation {
        match self {
            Env::Repeated(g) => {
                g.t = 0;
                g.done = false;
                JointObservation([0, 0])
            }
            Env::Grid(g) => {
                g.positions = g.start_cells;
                g.t = 0;
                g.done = false;
                JointObservation([g.obs_of(g.positions[0]), g.obs_of(g.positions[1])])
            }
        }
    }

    /// Advances the environment by one joint action.
    pub fn step(&mut self, actions: [usize; 2]) -> Result<StepResult> {
        if self.done() {
            return Err(Error::Contract("step on finished episode".into()));
        }
        let n = self.action_count();
        if actions.iter().any(|&a| a >= n) {
            return Err(Error::Contract(format!(
                "action index out of range (got {actions:?}, action count {n})"
            )));
        }
        match self {
            Env::Repeated(g) => {
                let reward = g.payoff[actions[0]][actions[1]];
                g.t += 1;
                g.done = g.t >= g.horizon;
                Ok(StepResult {
                    reward,
                    obs: JointObservation([g.t, g.t]),
                    done: g.done,
                })
            }
            Env::Grid(g) => {
                g.positions = [
                    g.apply_move(g.positions[0], actions[0]),
                    g.apply_move(g.positions[1], actions[1]),
                ];
                g.t += 1;
                let reward = if g.at_goals() { 1.0 } else { 0.0 };
                g.done = reward > 0.0 || g.t >= g.horizon;
                Ok(StepResult {
                    reward,
                    obs: JointObservation([g.obs_of(g.positions[0]), g.obs_of(g.positions[1])]),
                    done: g.done,
                })
            }
        }
    }

    pub fn done(&self) -> bool {
        match self {
            Env::Repeated(g) => g.done,
            Env::Grid(g) => g.done,
        }
    }

    /// Observations of the current state, without advancing anything.
    pub fn current_obs(&self) -> JointObservation {
        match self {
            Env::Repeated(g) => JointObservation([g.t, g.t]),
            Env::Grid(g) => {
                JointObservation([g.obs_of(g.positions[0]), g.obs_of(g.positions[1])])
            }
        }
    }

    pub fn action_count(&self) -> usize {
        match self {
            Env::Repeated(_) => 2,
            Env::Grid(g) => g.action_count(),
        }
    }

    /// Largest reward a single step can pay. Used to express value floors in
    /// units of one learning-rate quantum (`alpha * max_step_reward`).
    pub fn max_step_reward(&self) -> f64 {
        match self {
            Env::Repeated(g) => g
                .payoff
                .iter()
                .flatten()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max),
            Env::Grid(_) => 1.0,
        }
    }

    /// Number of distinct observation identifiers (the one-hot width).
    pub fn obs_space(&self) -> usize {
        match self {
            Env::Repeated(g) => g.horizon + 1,
            Env::Grid(g) => g.width * g.height,
        }
    }

    /// Per-dimension extents of the observation coordinates used by tile
    /// coding: (horizon+1) for the repeated game, (width, height) for grids.
    pub fn obs_dims(&self) -> Vec<usize> {
        match self {
            Env::Repeated(g) => vec![g.horizon + 1],
            Env::Grid(g) => vec![g.width, g.height],
        }
    }

    /// Decodes an observation identifier into tile-coding coordinates.
    pub fn obs_coords(&self, obs: usize) -> Vec<usize> {
        match self {
            Env::Repeated(_) => vec![obs],
            Env::Grid(g) => vec![obs % g.width, obs / g.width],
        }
    }

    pub fn horizon(&self) -> usize {
        match self {
            Env::Repeated(g) => g.horizon,
            Env::Grid(g) => g.horizon,
        }
    }
}

// ----- heterogeneous action spaces -------------------------------------------

/// Rotation of a grid action space, as a permutation of action indices.
/// For four actions the listing order rotates by 90-degree increments:
/// `apply` maps a physical move to the index that names it in the rotated
/// frame, and `execute` maps an index chosen in the canonical frame to the
/// physical move it produces when executed in the rotated frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionRotation {
    shift: usize,
    actions: usize,
}

impl ActionRotation {
    pub fn new(degrees: usize, actions: usize) -> Result<Self> {
        let shift = match (actions, degrees % 360) {
            (_, 0) => 0,
            (4, 90) => 1,
            (4, 180) => 2,
            (4, 270) => 3,
            (2, 180) => 1,
            (a, d) => {
                return Err(Error::Config(format!(
                    "rotation {d} degrees undefined for {a} actions"
                )))
            }
        };
        Ok(ActionRotation { shift, actions })
    }

    pub fn identity(actions: usize) -> Self {
        ActionRotation { shift: 0, actions }
    }

    pub fn is_identity(&self) -> bool {
        self.shift == 0
    }

    /// Index of the given physical move in the rotated frame.
    pub fn apply(&self, action: usize) -> usize {
        (action + self.shift) % self.actions
    }

    /// Physical move produced when the given index is executed in the rotated
    /// frame.
    pub fn execute(&self, action: usize) -> usize {
        (action + self.actions - self.shift) % self.actions
    }
}

/// Mirror axes for grid transfer variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlipAxis {
    Identity,
    Horizontal,
    Vertical,
    Both,
}

impl FlipAxis {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(FlipAxis::Identity),
            "horizontal" => Ok(FlipAxis::Horizontal),
            "vertical" => Ok(FlipAxis::Vertical),
            "both" => Ok(FlipAxis::Both),
            other => Err(Error::Config(format!("unknown flip axis '{other}'"))),
        }
    }
}

/// Returns a copy of a grid environment with start and goal cells mirrored
/// across the given axis; dynamics are otherwise identical.
pub fn flip(env: &Env, axis: FlipAxis) -> Result<Env> {
    let g = match env {
        Env::Grid(g) => g,
        Env::Repeated(_) => {
            return Err(Error::Contract("flip requires a grid domain".into()));
        }
    };
    let mirror = |c: Cell| -> Cell {
        let col = match axis {
            FlipAxis::Horizontal | FlipAxis::Both => g.width - 1 - c.0,
            _ => c.0,
        };
        let row = match axis {
            FlipAxis::Vertical | FlipAxis::Both => g.height - 1 - c.1,
            _ => c.1,
        };
        (col, row)
    };
    let flipped = GridWorld::new(
        g.width,
        g.height,
        [mirror(g.start_cells[0]), mirror(g.start_cells[1])],
        [mirror(g.goal_cells[0]), mirror(g.goal_cells[1])],
        g.horizon,
    )?;
    Ok(Env::Grid(flipped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(0)
    }

    #[test]
    fn repeated_payoffs_match_matrix() {
        let mut env = Env::standard(DomainId::Repeated);
        env.reset(&mut rng());
        assert_eq!(env.step([0, 0]).unwrap().reward, 0.0);
        assert_eq!(env.step([0, 1]).unwrap().reward, 1.0);
        assert_eq!(env.step([1, 0]).unwrap().reward, 0.1);
        assert_eq!(env.step([1, 1]).unwrap().reward, 0.0);
    }

    #[test]
    fn repeated_runs_five_rounds_and_observes_round_index() {
        let mut env = Env::standard(DomainId::Repeated);
        let obs = env.reset(&mut rng());
        assert_eq!(obs, JointObservation([0, 0]));
        for t in 1..=5 {
            let r = env.step([0, 1]).unwrap();
            assert_eq!(r.obs, JointObservation([t, t]));
            assert_eq!(r.done, t == 5);
        }
        assert!(env.step([0, 0]).is_err(), "stepping a finished episode");
    }

    #[test]
    fn hallway_reset_matches_layout() {
        let mut env = Env::standard(DomainId::Hallway);
        let obs = env.reset(&mut rng());
        assert_eq!(obs, JointObservation([6, 10]));
        assert_eq!(env.action_count(), 2);
        assert_eq!(env.obs_space(), 17);
    }

    #[test]
    fn hallway_rewards_both_goal_assignments() {
        // Near assignment: agent 0 to cell 0, agent 1 to cell 16.
        let mut env = Env::standard(DomainId::Hallway);
        env.reset(&mut rng());
        for step in 1..=6 {
            let r = env.step([0, 1]).unwrap();
            assert_eq!(r.reward, if step == 6 { 1.0 } else { 0.0 });
            assert_eq!(r.done, step == 6);
        }
        // Crossed assignment: agent 0 to cell 16, agent 1 to cell 0.
        let mut env = Env::standard(DomainId::Hallway);
        env.reset(&mut rng());
        for step in 1..=10 {
            let r = env.step([1, 0]).unwrap();
            assert_eq!(r.reward, if step == 10 { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn hallway_no_reward_when_sharing_one_goal() {
        let mut env = Env::standard(DomainId::Hallway);
        env.reset(&mut rng());
        // Both move left; agent 0 reaches cell 0 and parks against the wall.
        for _ in 0..30 {
            let r = env.step([0, 0]).unwrap();
            assert_eq!(r.reward, 0.0);
            if r.done {
                return;
            }
        }
        unreachable!("horizon should have ended the episode");
    }

    #[test]
    fn walls_leave_position_unchanged() {
        let mut env = Env::standard(DomainId::Room);
        env.reset(&mut rng());
        // Agent 0 at (6,2): up twice reaches row 0, a third up is a no-op.
        env.step([0, 0]).unwrap();
        env.step([0, 0]).unwrap();
        let r = env.step([0, 0]).unwrap();
        let Env::Grid(g) = &env else { unreachable!() };
        assert_eq!(g.positions()[0], (6, 0));
        assert_eq!(r.obs.0[0], 6);
    }

    #[test]
    fn room_reset_and_spaces() {
        let mut env = Env::standard(DomainId::Room);
        let obs = env.reset(&mut rng());
        assert_eq!(obs, JointObservation([2 * 17 + 6, 2 * 17 + 10]));
        assert_eq!(env.action_count(), 4);
        assert_eq!(env.obs_space(), 85);
        assert_eq!(env.obs_coords(2 * 17 + 6), vec![6, 2]);
    }

    #[test]
    fn room_horizon_ends_episode() {
        let mut env = Env::standard(DomainId::Room);
        env.reset(&mut rng());
        for step in 1..=60 {
            let r = env.step([0, 0]).unwrap();
            assert_eq!(r.done, step == 60);
        }
    }

    #[test]
    fn agents_may_share_a_cell() {
        let mut env = Env::standard(DomainId::Hallway);
        env.reset(&mut rng());
        // 6 and 10 converge: right for agent 0, left for agent 1.
        env.step([1, 0]).unwrap();
        let r = env.step([1, 0]).unwrap();
        assert_eq!(r.obs, JointObservation([8, 8]));
        assert!(!r.done);
    }

    #[test]
    fn rotation_indices_follow_listing_order() {
        let rot = ActionRotation::new(90, 4).unwrap();
        // Physical up (0) is named by index 1 in the 90-degree frame.
        assert_eq!(rot.apply(0), 1);
        // Executing canonical up (0) in the 90-degree frame moves left (3).
        assert_eq!(rot.execute(0), 3);
        for a in 0..4 {
            assert_eq!(rot.execute(rot.apply(a)), a);
        }
        let opposite = ActionRotation::new(180, 4).unwrap();
        assert_eq!(opposite.execute(0), 2);
        assert_eq!(opposite.execute(1), 3);
        let two = ActionRotation::new(180, 2).unwrap();
        assert_eq!(two.execute(0), 1);
        assert!(ActionRotation::new(90, 2).is_err());
    }

    #[test]
    fn flip_mirrors_starts_and_goals() {
        let env = Env::standard(DomainId::Hallway);
        let flipped = flip(&env, FlipAxis::Horizontal).unwrap();
        let Env::Grid(g) = &flipped else { unreachable!() };
        assert_eq!(g.start_cells(), [(10, 0), (6, 0)]);
        assert_eq!(g.goal_cells(), [(16, 0), (0, 0)]);
        // Flipping twice restores the original layout.
        let twice = flip(&flipped, FlipAxis::Horizontal).unwrap();
        let Env::Grid(g2) = &twice else { unreachable!() };
        let Env::Grid(g0) = &env else { unreachable!() };
        assert_eq!(g2.start_cells(), g0.start_cells());
        assert_eq!(g2.goal_cells(), g0.goal_cells());
    }

    #[test]
    fn vertical_flip_of_room_is_layout_neutral() {
        // All landmark cells sit on the middle row, so a vertical flip leaves
        // the layout unchanged while remaining a legal transformation.
        let env = Env::standard(DomainId::Room);
        let flipped = flip(&env, FlipAxis::Vertical).unwrap();
        let Env::Grid(g) = &flipped else { unreachable!() };
        assert_eq!(g.start_cells(), [(6, 2), (10, 2)]);
        assert_eq!(g.goal_cells(), [(0, 2), (16, 2)]);
    }

    #[test]
    fn flip_rejects_matrix_game() {
        let env = Env::standard(DomainId::Repeated);
        assert!(flip(&env, FlipAxis::Horizontal).is_err());
    }
}
