//! Finite-horizon two-agent stochastic games behind one stepping interface.

pub mod grid;
mod matrix;
mod visitation;

use std::fmt;

use rand::Rng;

pub use grid::{BoulderPush, Grid, GridWorld, Lbf};
pub use matrix::{matrix_game_ids, MatrixGame};
pub use visitation::{true_visitation, VisitationDistribution, DEFAULT_STATE_CAP};

use crate::error::{Error, Result};

/// Canonical integer encoding of a joint state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JointState(pub u32);

impl fmt::Display for JointState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

/// Row-major indexing of joint actions: agent 0 is the most significant
/// digit, so for two agents `index = a0 * k1 + a1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointActionSpace {
    counts: Vec<usize>,
}

impl JointActionSpace {
    pub fn new(counts: Vec<usize>) -> Self {
        JointActionSpace { counts }
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn size(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn encode(&self, actions: &[usize]) -> usize {
        actions
            .iter()
            .zip(&self.counts)
            .fold(0, |idx, (a, k)| idx * k + a)
    }

    pub fn decode(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.counts.len()];
        for (slot, k) in out.iter_mut().zip(&self.counts).rev() {
            *slot = index % k;
            index /= k;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Dynamics {
    Matrix(MatrixGame),
    GridWorld(GridWorld),
    BoulderPush(BoulderPush),
    Lbf(Lbf),
}

/// Result of applying one joint action.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub next: JointState,
    pub rewards: Vec<f64>,
    /// A genuine terminal event (not a horizon cut-off).
    pub terminal: bool,
    /// The game's success event fired on this step.
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next: JointState,
    pub rewards: Vec<f64>,
    pub terminal: bool,
    pub truncated: bool,
    pub success: bool,
}

impl StepResult {
    pub fn done(&self) -> bool {
        self.terminal || self.truncated
    }
}

/// An immutable game definition.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec {
    pub id: String,
    pub horizon: usize,
    actions: JointActionSpace,
    obs_dim: usize,
    pub dynamics: Dynamics,
}

pub const GRIDWORLD_HORIZON: usize = 8;
pub const BOULDERPUSH_HORIZON: usize = 20;
pub const LBF_HORIZON: usize = 20;

pub fn game_ids() -> Vec<String> {
    let mut ids = matrix_game_ids();
    ids.extend(["gridworld", "boulderpush", "lbf"].map(String::from));
    ids
}

impl GameSpec {
    pub fn by_id(id: &str) -> Result<Self> {
        match id {
            "gridworld" => Ok(gridworld()),
            "boulderpush" => Ok(boulderpush()),
            "lbf" => Ok(lbf()),
            _ => matrix_game(id),
        }
    }

    pub fn n_agents(&self) -> usize {
        self.actions.counts().len()
    }

    pub fn action_counts(&self) -> &[usize] {
        self.actions.counts()
    }

    pub fn joint_actions(&self) -> &JointActionSpace {
        &self.actions
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn joint_obs_dim(&self) -> usize {
        self.obs_dim * self.n_agents()
    }

    pub fn is_matrix(&self) -> bool {
        matches!(self.dynamics, Dynamics::Matrix(_))
    }

    pub fn initial_state(&self) -> JointState {
        JointState(match &self.dynamics {
            Dynamics::Matrix(_) => 0,
            Dynamics::GridWorld(g) => g.encode(g.starts[0], g.starts[1]),
            Dynamics::BoulderPush(b) => b.encode(b.starts[0], b.starts[1], b.boulder_start_row),
            Dynamics::Lbf(l) => l.encode(l.starts[0], l.starts[1]),
        })
    }

    /// All games start deterministically.
    pub fn initial_distribution(&self) -> Vec<(JointState, f64)> {
        vec![(self.initial_state(), 1.0)]
    }

    pub fn observe(&self, state: JointState, agent: usize) -> Vec<f64> {
        match &self.dynamics {
            Dynamics::Matrix(_) => vec![1.0],
            Dynamics::GridWorld(g) => g.observe(state.0, agent),
            Dynamics::BoulderPush(b) => b.observe(state.0, agent),
            Dynamics::Lbf(l) => l.observe(state.0, agent),
        }
    }

    /// Concatenation of every agent's observation.
    pub fn joint_observation(&self, state: JointState) -> Vec<f64> {
        (0..self.n_agents())
            .flat_map(|i| self.observe(state, i))
            .collect()
    }

    fn check_actions(&self, actions: &[usize]) -> Result<()> {
        if actions.len() != self.n_agents() {
            return Err(Error::invalid(format!(
                "expected {} actions, got {}",
                self.n_agents(),
                actions.len()
            )));
        }
        for (i, (&a, &k)) in actions.iter().zip(self.action_counts()).enumerate() {
            if a >= k {
                return Err(Error::invalid(format!(
                    "agent {i} action {a} out of range 0..{k}"
                )));
            }
        }
        Ok(())
    }

    /// Next-state distribution of `p(s, a)`. Every bundled game is
    /// deterministic, so this is a single outcome with probability one.
    pub fn transition(
        &self,
        state: JointState,
        actions: &[usize],
    ) -> Result<Vec<(f64, Transition)>> {
        self.check_actions(actions)?;
        let t = match &self.dynamics {
            Dynamics::Matrix(m) => Transition {
                next: state,
                rewards: m.rewards(actions[0], actions[1]).to_vec(),
                terminal: true,
                success: m
                    .optimal_joint_actions()
                    .contains(&(actions[0], actions[1])),
            },
            Dynamics::GridWorld(g) => shared(g.step(state.0, actions)),
            Dynamics::BoulderPush(b) => shared(b.step(state.0, actions)),
            Dynamics::Lbf(l) => shared(l.step(state.0, actions)),
        };
        Ok(vec![(1.0, t)])
    }

    /// Advances one step from `state` at time `t` (0-based).
    pub fn step<R: Rng + ?Sized>(
        &self,
        state: JointState,
        t: usize,
        actions: &[usize],
        rng: &mut R,
    ) -> Result<StepResult> {
        let outcomes = self.transition(state, actions)?;
        let chosen = if outcomes.len() == 1 {
            &outcomes[0].1
        } else {
            let probs: Vec<f64> = outcomes.iter().map(|(p, _)| *p).collect();
            &outcomes[crate::nn::categorical_sample(&probs, rng)].1
        };
        let truncated = !chosen.terminal && t + 1 >= self.horizon;
        Ok(StepResult {
            next: chosen.next,
            rewards: chosen.rewards.clone(),
            terminal: chosen.terminal,
            truncated,
            success: chosen.success,
        })
    }
}

fn shared(o: grid::GridOutcome) -> Transition {
    Transition {
        next: JointState(o.next),
        rewards: vec![o.reward, o.reward],
        terminal: o.terminal,
        success: o.success,
    }
}

pub fn matrix_game(id: &str) -> Result<GameSpec> {
    let game = MatrixGame::by_id(id)?;
    Ok(GameSpec {
        id: id.to_string(),
        horizon: 1,
        actions: JointActionSpace::new(game.action_counts().to_vec()),
        obs_dim: 1,
        dynamics: Dynamics::Matrix(game),
    })
}

pub fn gridworld() -> GameSpec {
    let g = GridWorld::default();
    GameSpec {
        id: "gridworld".into(),
        horizon: GRIDWORLD_HORIZON,
        actions: JointActionSpace::new(vec![5, 5]),
        obs_dim: 2 * g.grid.cells(),
        dynamics: Dynamics::GridWorld(g),
    }
}

pub fn boulderpush() -> GameSpec {
    let b = BoulderPush::default();
    GameSpec {
        id: "boulderpush".into(),
        horizon: BOULDERPUSH_HORIZON,
        actions: JointActionSpace::new(vec![4, 4]),
        obs_dim: b.obs_dim(),
        dynamics: Dynamics::BoulderPush(b),
    }
}

pub fn lbf() -> GameSpec {
    let l = Lbf::default();
    GameSpec {
        id: "lbf".into(),
        horizon: LBF_HORIZON,
        actions: JointActionSpace::new(vec![5, 5]),
        obs_dim: 2 * l.grid.cells(),
        dynamics: Dynamics::Lbf(l),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::{BTreeSet, VecDeque};

    fn reachable(spec: &GameSpec) -> BTreeSet<JointState> {
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([spec.initial_state()]);
        seen.insert(spec.initial_state());
        while let Some(s) = queue.pop_front() {
            for j in 0..spec.joint_actions().size() {
                let a = spec.joint_actions().decode(j);
                for (_, t) in spec.transition(s, &a).unwrap() {
                    if !t.terminal && seen.insert(t.next) {
                        queue.push_back(t.next);
                    }
                }
            }
        }
        seen
    }

    #[test]
    fn joint_action_encoding_is_a_bijection() {
        let space = JointActionSpace::new(vec![3, 3]);
        for j in 0..9 {
            assert_eq!(space.encode(&space.decode(j)), j);
        }
        assert_eq!(space.encode(&[1, 2]), 5);
        let space = JointActionSpace::new(vec![2, 5]);
        assert_eq!(space.decode(7), vec![1, 2]);
    }

    #[test]
    fn matrix_games_finish_in_one_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for id in matrix_game_ids() {
            let spec = GameSpec::by_id(&id).unwrap();
            let r = spec
                .step(spec.initial_state(), 0, &[0, 1], &mut rng)
                .unwrap();
            assert!(r.done(), "{id}");
        }
    }

    #[test]
    fn out_of_range_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let spec = GameSpec::by_id("g1").unwrap();
        assert!(matches!(
            spec.step(spec.initial_state(), 0, &[2, 0], &mut rng),
            Err(Error::InvalidArgument(_))
        ));
        assert!(GameSpec::by_id("nope").is_err());
    }

    #[test]
    fn gridworld_truncates_at_horizon() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let spec = gridworld();
        let mut s = spec.initial_state();
        for t in 0..spec.horizon {
            let r = spec
                .step(s, t, &[grid::STAY, grid::STAY], &mut rng)
                .unwrap();
            assert_eq!(r.rewards, vec![0.0, 0.0]);
            assert_eq!(r.truncated, t + 1 == spec.horizon);
            assert!(!r.terminal);
            s = r.next;
        }
    }

    #[test]
    fn cooperative_games_pay_equal_rewards() {
        for id in [
            "gridworld",
            "boulderpush",
            "lbf",
            "climbing",
            "penalty",
            "g1",
        ] {
            let spec = GameSpec::by_id(id).unwrap();
            for s in reachable(&spec) {
                for j in 0..spec.joint_actions().size() {
                    let a = spec.joint_actions().decode(j);
                    for (p, t) in spec.transition(s, &a).unwrap() {
                        assert_eq!(p, 1.0);
                        assert_eq!(t.rewards[0], t.rewards[1], "{id} {s} {a:?}");
                        assert!(t.rewards.iter().all(|r| r.is_finite()));
                    }
                }
            }
        }
    }

    #[test]
    fn observations_round_trip_state() {
        for spec in [gridworld(), boulderpush(), lbf()] {
            let states = reachable(&spec);
            let mut seen = std::collections::HashMap::new();
            for s in &states {
                let obs = spec.joint_observation(*s);
                assert_eq!(obs.len(), spec.joint_obs_dim());
                let key: Vec<u8> = obs.iter().map(|&v| v as u8).collect();
                assert_eq!(*seen.entry(key).or_insert(*s), *s, "{}", spec.id);
            }
        }
    }

    #[test]
    fn decode_encode_round_trip() {
        let gw = GridWorld::default();
        for p1 in 0..9 {
            for p2 in 0..9 {
                assert_eq!(gw.decode(gw.encode(p1, p2)), (p1, p2));
            }
        }
        let bp = BoulderPush::default();
        for p1 in 0..20 {
            for p2 in 0..20 {
                for br in 0..3 {
                    assert_eq!(bp.decode(bp.encode(p1, p2, br)), (p1, p2, br));
                }
            }
        }
    }
}
