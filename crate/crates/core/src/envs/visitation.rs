use std::collections::{BTreeMap, HashMap};

use super::{GameSpec, JointState};
use crate::error::{Error, Result};

pub const DEFAULT_STATE_CAP: usize = 10_000;

/// Probability mass over (joint state, joint action index) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct VisitationDistribution {
    n_joint_actions: usize,
    mass: BTreeMap<(JointState, usize), f64>,
}

impl VisitationDistribution {
    pub fn new(n_joint_actions: usize) -> Self {
        VisitationDistribution {
            n_joint_actions,
            mass: BTreeMap::new(),
        }
    }

    /// Empirical distribution of a sample of (state, joint action) pairs.
    pub fn empirical<I>(n_joint_actions: usize, samples: I) -> Self
    where
        I: IntoIterator<Item = (JointState, usize)>,
    {
        let mut out = Self::new(n_joint_actions);
        let mut n = 0usize;
        for key in samples {
            *out.mass.entry(key).or_insert(0.0) += 1.0;
            n += 1;
        }
        if n > 0 {
            out.mass.values_mut().for_each(|v| *v /= n as f64);
        }
        out
    }

    pub fn from_masses<I>(n_joint_actions: usize, masses: I) -> Self
    where
        I: IntoIterator<Item = ((JointState, usize), f64)>,
    {
        let mut out = Self::new(n_joint_actions);
        for (key, m) in masses {
            *out.mass.entry(key).or_insert(0.0) += m;
        }
        out
    }

    pub fn n_joint_actions(&self) -> usize {
        self.n_joint_actions
    }

    pub fn get(&self, state: JointState, joint_action: usize) -> f64 {
        self.mass
            .get(&(state, joint_action))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(JointState, usize), &f64)> {
        self.mass.iter()
    }

    pub fn total(&self) -> f64 {
        self.mass.values().sum()
    }

    pub fn state_marginal(&self) -> BTreeMap<JointState, f64> {
        let mut out = BTreeMap::new();
        for (&(s, _), &m) in &self.mass {
            *out.entry(s).or_insert(0.0) += m;
        }
        out
    }
}

/// Exact `d_pi(s, a)` of a stationary joint policy.
///
/// Propagates the time-indexed state distribution forward over the horizon,
/// accumulating state-action mass at every step, then normalizes by the
/// expected episode length. This is the limit of the fraction of collected
/// samples at each pair under continual episodic collection.
pub fn true_visitation<F>(
    spec: &GameSpec,
    joint_policy: F,
    state_cap: usize,
) -> Result<VisitationDistribution>
where
    F: Fn(JointState) -> Vec<f64>,
{
    let space = spec.joint_actions();
    let n_joint = space.size();
    let mut cache: HashMap<JointState, Vec<f64>> = HashMap::new();
    let mut acc: BTreeMap<(JointState, usize), f64> = BTreeMap::new();
    let mut current: BTreeMap<JointState, f64> = spec.initial_distribution().into_iter().collect();

    for t in 0..spec.horizon {
        let mut next: BTreeMap<JointState, f64> = BTreeMap::new();
        for (&s, &ms) in &current {
            if !cache.contains_key(&s) {
                if cache.len() >= state_cap {
                    return Err(Error::UnsupportedGame(format!(
                        "{} visits more than {state_cap} states",
                        spec.id
                    )));
                }
                let probs = joint_policy(s);
                if probs.len() != n_joint {
                    return Err(Error::invalid(format!(
                        "policy returned {} probabilities for {n_joint} joint actions",
                        probs.len()
                    )));
                }
                cache.insert(s, probs);
            }
            let probs = &cache[&s];
            for (j, &p) in probs.iter().enumerate() {
                if p <= 0.0 {
                    continue;
                }
                let m = ms * p;
                *acc.entry((s, j)).or_insert(0.0) += m;
                if t + 1 == spec.horizon {
                    continue;
                }
                for (q, tr) in spec.transition(s, &space.decode(j))? {
                    if !tr.terminal {
                        *next.entry(tr.next).or_insert(0.0) += m * q;
                    }
                }
            }
        }
        current = next;
        if current.is_empty() {
            break;
        }
    }

    let total: f64 = acc.values().sum();
    Ok(VisitationDistribution::from_masses(
        n_joint,
        acc.into_iter().map(|(k, m)| (k, m / total)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{grid, gridworld, matrix_game};

    #[test]
    fn uniform_matrix_game() {
        let spec = matrix_game("climbing").unwrap();
        let d = true_visitation(&spec, |_| vec![1.0 / 9.0; 9], DEFAULT_STATE_CAP).unwrap();
        for j in 0..9 {
            assert!((d.get(spec.initial_state(), j) - 1.0 / 9.0).abs() < 1e-15);
        }
    }

    #[test]
    fn intro_game_expected_rewards() {
        let spec = matrix_game("intro").unwrap();
        let d = true_visitation(&spec, |_| vec![0.25; 4], DEFAULT_STATE_CAP).unwrap();
        let s = spec.initial_state();
        let space = spec.joint_actions();
        // agent 1's expected reward conditioned on its own action
        let mut value = [0.0; 2];
        let mut mass = [0.0; 2];
        for j in 0..4 {
            let a = space.decode(j);
            let (_, t) = &spec.transition(s, &a).unwrap()[0];
            value[a[0]] += d.get(s, j) * t.rewards[0];
            mass[a[0]] += d.get(s, j);
        }
        assert!((value[0] / mass[0] - 6.0).abs() < 1e-12);
        assert!((value[1] / mass[1] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic_gridworld_chain() {
        let spec = gridworld();
        let space = spec.joint_actions().clone();
        // agent 0 walks left, agent 1 walks up: both reach the goal at t = 1
        let policy = |_| {
            let mut p = vec![0.0; 25];
            p[space.encode(&[grid::LEFT, grid::UP])] = 1.0;
            p
        };
        let d = true_visitation(&spec, policy, DEFAULT_STATE_CAP).unwrap();
        assert_eq!(d.iter().count(), 2);
        assert!((d.total() - 1.0).abs() < 1e-12);
        for (_, &m) in d.iter() {
            assert!((m - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn state_cap_is_enforced() {
        let spec = gridworld();
        let err = true_visitation(&spec, |_| vec![1.0 / 25.0; 25], 3).unwrap_err();
        assert!(matches!(err, Error::UnsupportedGame(_)));
    }
}
