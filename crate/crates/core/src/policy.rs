//! Target policies and the behavior policies used to collect data for them.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;

use crate::envs::{GameSpec, JointState};
use crate::error::{Error, Result};
use crate::nn::{self, Mlp, MlpSpec};

/// One agent's softmax policy over its own actions.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentPolicy {
    pub net: Mlp,
}

impl AgentPolicy {
    pub fn init<R: Rng + ?Sized>(obs_dim: usize, n_actions: usize, rng: &mut R) -> Result<Self> {
        Ok(AgentPolicy {
            net: Mlp::init(MlpSpec::new(obs_dim, n_actions), rng)?,
        })
    }

    pub fn n_actions(&self) -> usize {
        self.net.spec.output_dim
    }

    pub fn log_probs(&self, obs: &[f64]) -> Result<Vec<f64>> {
        Ok(nn::log_softmax(&self.net.forward(obs)?))
    }
}

pub fn agent_dist(policy: &AgentPolicy, obs: &[f64]) -> Result<Vec<f64>> {
    Ok(nn::softmax(&policy.net.forward(obs)?))
}

/// The factored joint policy `pi_theta(a | s) = prod_i pi_i(a_i | s_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTargetPolicy {
    pub agents: Vec<AgentPolicy>,
}

impl JointTargetPolicy {
    pub fn init<R: Rng + ?Sized>(game: &GameSpec, rng: &mut R) -> Result<Self> {
        let agents = game
            .action_counts()
            .iter()
            .map(|&k| AgentPolicy::init(game.obs_dim(), k, rng))
            .collect::<Result<_>>()?;
        Ok(JointTargetPolicy { agents })
    }

    /// Per-agent log-probability vectors at `state`.
    pub fn agent_log_probs(&self, game: &GameSpec, state: JointState) -> Result<Vec<Vec<f64>>> {
        self.agents
            .iter()
            .enumerate()
            .map(|(i, a)| a.log_probs(&game.observe(state, i)))
            .collect()
    }

    /// Joint log-probabilities over the row-major joint action space.
    pub fn joint_log_probs(&self, game: &GameSpec, state: JointState) -> Result<Vec<f64>> {
        Ok(combine_log_probs(game, &self.agent_log_probs(game, state)?))
    }

    pub fn joint_dist(&self, game: &GameSpec, state: JointState) -> Result<Vec<f64>> {
        Ok(self
            .joint_log_probs(game, state)?
            .into_iter()
            .map(f64::exp)
            .collect())
    }
}

/// Sums per-agent log-probabilities into the joint log-probability table.
pub fn combine_log_probs(game: &GameSpec, per_agent: &[Vec<f64>]) -> Vec<f64> {
    let space = game.joint_actions();
    (0..space.size())
        .map(|j| {
            space
                .decode(j)
                .iter()
                .zip(per_agent)
                .map(|(&a, lp)| lp[a])
                .sum()
        })
        .collect()
}

pub fn joint_log_prob(
    joint: &JointTargetPolicy,
    game: &GameSpec,
    state: JointState,
    actions: &[usize],
) -> Result<f64> {
    if actions.len() != joint.agents.len() {
        return Err(Error::invalid("one action per agent required"));
    }
    let mut total = 0.0;
    for (i, (agent, &a)) in joint.agents.iter().zip(actions).enumerate() {
        if a >= agent.n_actions() {
            return Err(Error::invalid(format!("agent {i} action {a} out of range")));
        }
        total += agent.log_probs(&game.observe(state, i))?[a];
    }
    Ok(total)
}

/// Everything about a state that stays fixed while the target policy does.
#[derive(Debug, Clone, PartialEq)]
pub struct StateFeatures {
    pub obs: Vec<Vec<f64>>,
    pub joint_obs: Vec<f64>,
    pub agent_log_probs: Vec<Vec<f64>>,
    pub joint_log_probs: Vec<f64>,
}

/// Memoizes [`StateFeatures`] per joint state. Must be cleared whenever the
/// target parameters change.
#[derive(Debug, Default, Clone)]
pub struct TargetCache {
    map: HashMap<JointState, Arc<StateFeatures>>,
}

impl TargetCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clear(&mut self) {
        self.map.clear();
    }

    pub fn get(
        &mut self,
        game: &GameSpec,
        joint: &JointTargetPolicy,
        state: JointState,
    ) -> Result<Arc<StateFeatures>> {
        if let Some(f) = self.map.get(&state) {
            return Ok(Arc::clone(f));
        }
        let obs: Vec<Vec<f64>> = (0..game.n_agents())
            .map(|i| game.observe(state, i))
            .collect();
        let agent_log_probs = joint
            .agents
            .iter()
            .zip(&obs)
            .map(|(a, o)| a.log_probs(o))
            .collect::<Result<Vec<_>>>()?;
        let features = Arc::new(StateFeatures {
            joint_obs: obs.concat(),
            joint_log_probs: combine_log_probs(game, &agent_log_probs),
            obs,
            agent_log_probs,
        });
        self.map.insert(state, Arc::clone(&features));
        Ok(features)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SamplerMode {
    OnPolicy,
    Props,
    MaProps,
}

impl SamplerMode {
    pub const ALL: [SamplerMode; 3] = [
        SamplerMode::OnPolicy,
        SamplerMode::Props,
        SamplerMode::MaProps,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SamplerMode::OnPolicy => "on-policy",
            SamplerMode::Props => "props",
            SamplerMode::MaProps => "ma-props",
        }
    }
}

impl fmt::Display for SamplerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SamplerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('_', "-").as_str() {
            "on-policy" => Ok(SamplerMode::OnPolicy),
            "props" => Ok(SamplerMode::Props),
            "ma-props" => Ok(SamplerMode::MaProps),
            _ => Err(Error::invalid(format!(
                "unknown sampler {s:?} (expected on-policy, props, ma-props)"
            ))),
        }
    }
}

/// Data-collection distribution, defined relative to the frozen target.
#[derive(Debug, Clone, PartialEq)]
pub enum BehaviorPolicy {
    /// Sample from the target policies directly.
    OnPolicy,
    /// Independent per-agent behavior networks `phi_i`, same shape as `theta_i`.
    Props { agents: Vec<Mlp> },
    /// Centralized logit adjustment on top of the joint target log-probs.
    MaProps { adjust: Mlp },
}

impl BehaviorPolicy {
    pub fn mode(&self) -> SamplerMode {
        match self {
            BehaviorPolicy::OnPolicy => SamplerMode::OnPolicy,
            BehaviorPolicy::Props { .. } => SamplerMode::Props,
            BehaviorPolicy::MaProps { .. } => SamplerMode::MaProps,
        }
    }
}

/// Adjustment network: joint observation in, one logit per joint action out,
/// final layer zeroed so the behavior starts equal to the target.
pub fn adjustment_spec(game: &GameSpec) -> MlpSpec {
    MlpSpec::new(game.joint_obs_dim(), game.joint_actions().size()).with_zero_final_layer()
}

pub fn init_behavior<R: Rng + ?Sized>(
    mode: SamplerMode,
    joint: &JointTargetPolicy,
    game: &GameSpec,
    rng: &mut R,
) -> Result<BehaviorPolicy> {
    Ok(match mode {
        SamplerMode::OnPolicy => BehaviorPolicy::OnPolicy,
        SamplerMode::Props => BehaviorPolicy::Props {
            agents: joint.agents.iter().map(|a| a.net.clone()).collect(),
        },
        SamplerMode::MaProps => BehaviorPolicy::MaProps {
            adjust: Mlp::init(adjustment_spec(game), rng)?,
        },
    })
}

/// Behavior log-probabilities over joint actions given cached target features.
pub fn behavior_log_probs(
    b: &BehaviorPolicy,
    game: &GameSpec,
    f: &StateFeatures,
) -> Result<Vec<f64>> {
    match b {
        BehaviorPolicy::OnPolicy => Ok(f.joint_log_probs.clone()),
        BehaviorPolicy::Props { agents } => {
            let per_agent = agents
                .iter()
                .zip(&f.obs)
                .map(|(net, o)| Ok(nn::log_softmax(&net.forward(o)?)))
                .collect::<Result<Vec<_>>>()?;
            Ok(combine_log_probs(game, &per_agent))
        }
        BehaviorPolicy::MaProps { adjust } => {
            let delta = adjust.forward(&f.joint_obs)?;
            let logits: Vec<f64> = f
                .joint_log_probs
                .iter()
                .zip(&delta)
                .map(|(lp, d)| lp + d)
                .collect();
            Ok(nn::log_softmax(&logits))
        }
    }
}

pub fn behavior_dist(
    b: &BehaviorPolicy,
    joint: &JointTargetPolicy,
    game: &GameSpec,
    state: JointState,
) -> Result<Vec<f64>> {
    let f = TargetCache::new().get(game, joint, state)?;
    Ok(behavior_log_probs(b, game, &f)?
        .into_iter()
        .map(f64::exp)
        .collect())
}

/// A joint action drawn from the behavior policy.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSample {
    pub joint_action: usize,
    pub actions: Vec<usize>,
    /// `log pi_theta_i(a_i | s_i)` under the target policies.
    pub target_log_probs: Vec<f64>,
}

pub fn sample_with_features<R: Rng + ?Sized>(
    b: &BehaviorPolicy,
    game: &GameSpec,
    f: &StateFeatures,
    rng: &mut R,
) -> Result<JointSample> {
    let probs: Vec<f64> = behavior_log_probs(b, game, f)?
        .into_iter()
        .map(f64::exp)
        .collect();
    let joint_action = nn::categorical_sample(&probs, rng);
    let actions = game.joint_actions().decode(joint_action);
    let target_log_probs = actions
        .iter()
        .zip(&f.agent_log_probs)
        .map(|(&a, lp)| lp[a])
        .collect();
    Ok(JointSample {
        joint_action,
        actions,
        target_log_probs,
    })
}

pub fn sample_joint<R: Rng + ?Sized>(
    b: &BehaviorPolicy,
    joint: &JointTargetPolicy,
    game: &GameSpec,
    state: JointState,
    rng: &mut R,
) -> Result<JointSample> {
    let f = TargetCache::new().get(game, joint, state)?;
    sample_with_features(b, game, &f, rng)
}
