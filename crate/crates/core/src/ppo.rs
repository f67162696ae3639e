//! Independent PPO updates for each agent's target policy, with either
//! decentralized (IPPO) or centralized (MAPPO) critics.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::behavior::partition;
use crate::envs::{GameSpec, JointState};
use crate::error::{Error, Result};
use crate::nn::{self, AdamState, Mlp, MlpSpec, Objective};
use crate::policy::JointTargetPolicy;

#[derive(Debug, Clone, PartialEq)]
pub struct PpoConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub n_epochs: usize,
    pub n_minibatches: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip: f64,
    pub entropy_coef: f64,
    pub vf_coef: f64,
    pub max_grad_norm: f64,
    pub normalize_advantages: bool,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            batch_size: 20,
            lr: 0.1,
            n_epochs: 4,
            n_minibatches: 4,
            gamma: 0.99,
            gae_lambda: 0.95,
            clip: 0.2,
            entropy_coef: 0.01,
            vf_coef: 0.5,
            max_grad_norm: 0.5,
            normalize_advantages: true,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::invalid("gamma must be in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(Error::invalid("gae lambda must be in [0, 1]"));
        }
        if !(self.clip > 0.0) {
            return Err(Error::invalid("ppo clip must be positive"));
        }
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return Err(Error::invalid(
                "learning rate must be finite and non-negative",
            ));
        }
        if self.batch_size == 0 || self.n_epochs == 0 || self.n_minibatches == 0 {
            return Err(Error::invalid(
                "batch size, epochs and minibatches must be at least 1",
            ));
        }
        if !(self.max_grad_norm > 0.0) {
            return Err(Error::invalid("max grad norm must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Mappo,
    Ippo,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Mappo => "mappo",
            Algorithm::Ippo => "ippo",
        }
    }

    pub fn critic_input(&self) -> CriticInput {
        match self {
            Algorithm::Mappo => CriticInput::JointState,
            Algorithm::Ippo => CriticInput::OwnObs,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mappo" => Ok(Algorithm::Mappo),
            "ippo" => Ok(Algorithm::Ippo),
            _ => Err(Error::invalid(format!(
                "unknown algorithm {s:?} (expected mappo, ippo)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriticInput {
    OwnObs,
    JointState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Critic {
    pub net: Mlp,
    pub input: CriticInput,
    pub agent: usize,
}

impl Critic {
    pub fn init<R: Rng + ?Sized>(
        game: &GameSpec,
        input: CriticInput,
        agent: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let dim = match input {
            CriticInput::OwnObs => game.obs_dim(),
            CriticInput::JointState => game.joint_obs_dim(),
        };
        Ok(Critic {
            net: Mlp::init(MlpSpec::critic(dim), rng)?,
            input,
            agent,
        })
    }

    pub fn features(&self, game: &GameSpec, state: JointState) -> Vec<f64> {
        match self.input {
            CriticInput::OwnObs => game.observe(state, self.agent),
            CriticInput::JointState => game.joint_observation(state),
        }
    }

    pub fn value(&self, game: &GameSpec, state: JointState) -> Result<f64> {
        Ok(self.net.forward(&self.features(game, state))?[0])
    }
}

/// One environment step as stored for the target update.
#[derive(Debug, Clone, PartialEq)]
pub struct BufferedTransition {
    pub state: JointState,
    pub joint_action: usize,
    pub actions: Vec<usize>,
    /// Per-agent target log-probabilities at collection time.
    pub target_log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub next_state: JointState,
    pub terminal: bool,
    pub truncated: bool,
}

impl BufferedTransition {
    pub fn episode_end(&self) -> bool {
        self.terminal || self.truncated
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionBuffer {
    capacity: usize,
    items: Vec<BufferedTransition>,
}

impl TransitionBuffer {
    pub fn new(capacity: usize) -> Self {
        TransitionBuffer {
            capacity,
            items: Vec::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: BufferedTransition) -> Result<()> {
        if self.is_full() {
            return Err(Error::Precondition("transition buffer is full".into()));
        }
        if t.target_log_probs.iter().any(|lp| !lp.is_finite()) {
            return Err(Error::invalid("non-finite target log-probability"));
        }
        self.items.push(t);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.items.len() >= self.capacity
    }

    pub fn clear(&mut self) {
        self.items.clear();
    }

    pub fn items(&self) -> &[BufferedTransition] {
        &self.items
    }

    pub fn state_actions(&self) -> Vec<(JointState, usize)> {
        self.items
            .iter()
            .map(|t| (t.state, t.joint_action))
            .collect()
    }
}

/// Generalized advantage estimates and value targets.
///
/// `next_values[t]` is the bootstrap value of the successor state (zero at a
/// terminal). The recursion is cut wherever `episode_ends[t]` is set and at
/// the end of the sequence.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    next_values: &[f64],
    episode_ends: &[bool],
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    if values.len() != n || next_values.len() != n || episode_ends.len() != n {
        return Err(Error::invalid("GAE inputs must have equal length"));
    }
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        if episode_ends[t] {
            running = 0.0;
        }
        let delta = rewards[t] + gamma * next_values[t] - values[t];
        running = delta + gamma * lambda * running;
        adv[t] = running;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

/// Subtracts the mean and divides by the population standard deviation.
pub fn normalize(values: &mut [f64]) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    for v in values.iter_mut() {
        *v = (*v - mean) / (std + 1e-8);
    }
}

/// Clipped-surrogate PPO loss for one agent on one minibatch, with samples
/// sharing a state evaluated through a single network row.
pub struct PpoMinibatchLoss<'a> {
    pub actor: &'a MlpSpec,
    pub critic: &'a MlpSpec,
    actor_inputs: Vec<f64>,
    critic_inputs: Vec<f64>,
    rows: usize,
    /// (row, action, old log-prob, advantage, return)
    samples: Vec<(usize, usize, f64, f64, f64)>,
    clip: f64,
    entropy_coef: f64,
    vf_coef: f64,
}

/// Loss value, gradients and diagnostics for one minibatch.
#[derive(Debug, Clone)]
pub struct MinibatchEval {
    pub loss: f64,
    pub actor_grad: Vec<f64>,
    pub critic_grad: Vec<f64>,
    pub ratios: Vec<f64>,
}

impl<'a> PpoMinibatchLoss<'a> {
    /// `samples` holds (state row, action, old log-prob, advantage, return);
    /// advantages are used as given.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        actor: &'a MlpSpec,
        critic: &'a MlpSpec,
        actor_inputs: Vec<f64>,
        critic_inputs: Vec<f64>,
        samples: Vec<(usize, usize, f64, f64, f64)>,
        cfg: &PpoConfig,
    ) -> Result<Self> {
        let rows = actor_inputs.len() / actor.input_dim.max(1);
        if actor_inputs.len() != rows * actor.input_dim
            || critic_inputs.len() != rows * critic.input_dim
            || samples.is_empty()
            || samples
                .iter()
                .any(|s| s.0 >= rows || s.1 >= actor.output_dim)
        {
            return Err(Error::invalid("minibatch does not match network shapes"));
        }
        Ok(PpoMinibatchLoss {
            actor,
            critic,
            actor_inputs,
            critic_inputs,
            rows,
            samples,
            clip: cfg.clip,
            entropy_coef: cfg.entropy_coef,
            vf_coef: cfg.vf_coef,
        })
    }

    pub fn eval(
        &self,
        actor_params: &[f64],
        critic_params: &[f64],
        want_grad: bool,
    ) -> Result<MinibatchEval> {
        let k = self.actor.output_dim;
        let n = self.samples.len() as f64;
        let a_acts = nn::forward_batch(self.actor, actor_params, &self.actor_inputs, self.rows)?;
        let c_acts = nn::forward_batch(self.critic, critic_params, &self.critic_inputs, self.rows)?;
        let logits = a_acts.output();
        let values = c_acts.output();

        let lps: Vec<Vec<f64>> = (0..self.rows)
            .map(|r| nn::log_softmax(&logits[r * k..(r + 1) * k]))
            .collect();
        let mut d_logits = vec![0.0; self.rows * k];
        let mut d_values = vec![0.0; self.rows];
        let mut ratios = Vec::with_capacity(self.samples.len());
        let (mut pg, mut ent, mut vl) = (0.0, 0.0, 0.0);

        for &(r, a, old_lp, adv, ret) in &self.samples {
            let lp = &lps[r];
            let ratio = (lp[a] - old_lp).exp();
            ratios.push(ratio);
            let unclipped = -adv * ratio;
            let clipped = -adv * ratio.clamp(1.0 - self.clip, 1.0 + self.clip);
            pg += unclipped.max(clipped);
            let h = -lp.iter().map(|l| l.exp() * l).sum::<f64>();
            ent += h;
            let v = values[r];
            vl += (v - ret).powi(2);
            if !want_grad {
                continue;
            }
            let d = &mut d_logits[r * k..(r + 1) * k];
            if unclipped >= clipped {
                let s = -adv * ratio / n;
                for (j, (d, l)) in d.iter_mut().zip(lp).enumerate() {
                    *d += s * (f64::from(u8::from(j == a)) - l.exp());
                }
            }
            // d(-c H)/dz_j = c p_j (log p_j + H)
            let s = self.entropy_coef / n;
            for (d, l) in d.iter_mut().zip(lp) {
                *d += s * l.exp() * (l + h);
            }
            d_values[r] += 2.0 * self.vf_coef * (v - ret) / n;
        }
        let loss = pg / n - self.entropy_coef * ent / n + self.vf_coef * vl / n;
        if !loss.is_finite() {
            return Err(Error::Numeric {
                layer: self.actor.layers().len(),
                context: "ppo loss".into(),
            });
        }
        let mut actor_grad = Vec::new();
        let mut critic_grad = Vec::new();
        if want_grad {
            actor_grad = vec![0.0; actor_params.len()];
            critic_grad = vec![0.0; critic_params.len()];
            nn::backward(
                self.actor,
                actor_params,
                &a_acts,
                &d_logits,
                &mut actor_grad,
            )?;
            nn::backward(
                self.critic,
                critic_params,
                &c_acts,
                &d_values,
                &mut critic_grad,
            )?;
        }
        Ok(MinibatchEval {
            loss,
            actor_grad,
            critic_grad,
            ratios,
        })
    }
}

/// Objective view over the concatenation (actor params, critic params).
impl Objective for PpoMinibatchLoss<'_> {
    fn value(&self, params: &[f64]) -> Result<f64> {
        let (a, c) = params.split_at(self.actor.param_count());
        Ok(self.eval(a, c, false)?.loss)
    }

    fn value_and_grad(&self, params: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (a, c) = params.split_at(self.actor.param_count());
        let e = self.eval(a, c, true)?;
        let mut g = e.actor_grad;
        g.extend(e.critic_grad);
        Ok((e.loss, g))
    }
}

/// Target policies, critics and their optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct Learner {
    pub joint: JointTargetPolicy,
    pub critics: Vec<Critic>,
    pub cfg: PpoConfig,
    actor_adam: Vec<AdamState>,
    critic_adam: Vec<AdamState>,
}

/// Diagnostics from one target update.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UpdateStats {
    /// Largest |ratio - 1| in the first minibatch of the first epoch.
    pub first_ratio_deviation: f64,
    /// Largest gradient norm seen after clipping.
    pub max_clipped_grad_norm: f64,
    /// Per minibatch: (mean, population std) of the normalized advantages.
    pub advantage_moments: Vec<(f64, f64)>,
}

impl Learner {
    pub fn new<R: Rng + ?Sized>(
        game: &GameSpec,
        algorithm: Algorithm,
        cfg: PpoConfig,
        rng: &mut R,
    ) -> Result<Self> {
        cfg.validate()?;
        let joint = JointTargetPolicy::init(game, rng)?;
        let critics = (0..game.n_agents())
            .map(|i| Critic::init(game, algorithm.critic_input(), i, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_parts(joint, critics, cfg))
    }

    pub fn from_parts(joint: JointTargetPolicy, critics: Vec<Critic>, cfg: PpoConfig) -> Self {
        let actor_adam = joint
            .agents
            .iter()
            .map(|a| AdamState::new(a.net.param_count()))
            .collect();
        let critic_adam = critics
            .iter()
            .map(|c| AdamState::new(c.net.param_count()))
            .collect();
        Learner {
            joint,
            critics,
            cfg,
            actor_adam,
            critic_adam,
        }
    }
}

/// Per-agent advantages and returns for the whole buffer.
pub fn buffer_advantages(
    game: &GameSpec,
    critic: &Critic,
    buffer: &TransitionBuffer,
    cfg: &PpoConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut cache: HashMap<JointState, f64> = HashMap::new();
    let mut value = |s: JointState| -> Result<f64> {
        if let Some(&v) = cache.get(&s) {
            return Ok(v);
        }
        let v = critic.value(game, s)?;
        cache.insert(s, v);
        Ok(v)
    };
    let items = buffer.items();
    let mut values = Vec::with_capacity(items.len());
    let mut next_values = Vec::with_capacity(items.len());
    for t in items {
        values.push(value(t.state)?);
        next_values.push(if t.terminal {
            0.0
        } else {
            value(t.next_state)?
        });
    }
    let rewards: Vec<f64> = items.iter().map(|t| t.rewards[critic.agent]).collect();
    let ends: Vec<bool> = items.iter().map(BufferedTransition::episode_end).collect();
    compute_gae(
        &rewards,
        &values,
        &next_values,
        &ends,
        cfg.gamma,
        cfg.gae_lambda,
    )
}

/// Runs the PPO epochs for every agent on a full buffer, then clears it.
pub fn ppo_update<R: Rng + ?Sized>(
    learner: &mut Learner,
    game: &GameSpec,
    buffer: &mut TransitionBuffer,
    rng: &mut R,
) -> Result<UpdateStats> {
    if !buffer.is_full() {
        return Err(Error::Precondition(format!(
            "target update needs a full buffer ({} of {})",
            buffer.len(),
            buffer.capacity()
        )));
    }
    let cfg = learner.cfg.clone();
    let n_agents = learner.joint.agents.len();
    let per_agent = (0..n_agents)
        .map(|i| buffer_advantages(game, &learner.critics[i], buffer, &cfg))
        .collect::<Result<Vec<_>>>()?;
    let items = buffer.items();
    let mut obs_cache: HashMap<JointState, (Vec<Vec<f64>>, Vec<f64>)> = HashMap::new();
    for t in items {
        obs_cache.entry(t.state).or_insert_with(|| {
            let obs: Vec<Vec<f64>> = (0..n_agents).map(|i| game.observe(t.state, i)).collect();
            let joint = obs.concat();
            (obs, joint)
        });
    }

    let mut stats = UpdateStats::default();
    let mut order: Vec<usize> = (0..items.len()).collect();
    let mut first = true;
    for _ in 0..cfg.n_epochs {
        order.shuffle(rng);
        for range in partition(items.len(), cfg.n_minibatches) {
            let idx = &order[range];
            for i in 0..n_agents {
                let (adv_all, ret_all) = &per_agent[i];
                let mut adv: Vec<f64> = idx.iter().map(|&j| adv_all[j]).collect();
                if cfg.normalize_advantages {
                    normalize(&mut adv);
                    let m = adv.iter().sum::<f64>() / adv.len() as f64;
                    let sd = (adv.iter().map(|a| (a - m).powi(2)).sum::<f64>() / adv.len() as f64)
                        .sqrt();
                    stats.advantage_moments.push((m, sd));
                }
                let mut row_of: HashMap<JointState, usize> = HashMap::new();
                let (mut a_in, mut c_in) = (Vec::new(), Vec::new());
                let critic = &learner.critics[i];
                let mut samples = Vec::with_capacity(idx.len());
                for (pos, &j) in idx.iter().enumerate() {
                    let t = &items[j];
                    let r = *row_of.entry(t.state).or_insert_with(|| {
                        let (obs, joint) = &obs_cache[&t.state];
                        a_in.extend_from_slice(&obs[i]);
                        match critic.input {
                            CriticInput::OwnObs => c_in.extend_from_slice(&obs[i]),
                            CriticInput::JointState => c_in.extend_from_slice(joint),
                        }
                        a_in.len() / obs[i].len() - 1
                    });
                    samples.push((r, t.actions[i], t.target_log_probs[i], adv[pos], ret_all[j]));
                }
                let actor = &learner.joint.agents[i].net;
                let loss = PpoMinibatchLoss::new(
                    &actor.spec,
                    &critic.net.spec,
                    a_in,
                    c_in,
                    samples,
                    &cfg,
                )?;
                let mut e =
                    loss.eval(actor.params.as_slice(), critic.net.params.as_slice(), true)?;
                if first {
                    let dev = e.ratios.iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max);
                    stats.first_ratio_deviation = stats.first_ratio_deviation.max(dev);
                }
                nn::clip_grad_norm(
                    &mut [&mut e.actor_grad, &mut e.critic_grad],
                    cfg.max_grad_norm,
                );
                let norm = e
                    .actor_grad
                    .iter()
                    .chain(&e.critic_grad)
                    .map(|g| g * g)
                    .sum::<f64>()
                    .sqrt();
                stats.max_clipped_grad_norm = stats.max_clipped_grad_norm.max(norm);
                learner.actor_adam[i].step(
                    learner.joint.agents[i].net.params.as_mut_slice(),
                    &e.actor_grad,
                    cfg.lr,
                )?;
                learner.critic_adam[i].step(
                    learner.critics[i].net.params.as_mut_slice(),
                    &e.critic_grad,
                    cfg.lr,
                )?;
            }
            first = false;
        }
    }
    buffer.clear();
    Ok(stats)
}

/// Monte Carlo policy-gradient estimate for agent `agent` of a two-action
/// tabular policy with direct parameterization `pi(A) = theta`.
///
/// Returns the coefficient `c` such that the estimate equals
/// `c * grad log pi(A)`. `advantage` maps a joint action `[a_1, a_2]` to its
/// joint advantage.
pub fn reinforce_coefficient<F>(
    dataset: &[[usize; 2]],
    advantage: F,
    agent: usize,
    theta: f64,
) -> Result<f64>
where
    F: Fn([usize; 2]) -> f64,
{
    if dataset.is_empty() || agent > 1 || !(theta > 0.0 && theta < 1.0) {
        return Err(Error::invalid(
            "need a nonempty dataset, agent 0 or 1, theta in (0, 1)",
        ));
    }
    // d/dtheta log pi(A) = 1/theta, d/dtheta log pi(B) = -1/(1 - theta)
    let grad: f64 = dataset
        .iter()
        .map(|&a| {
            let score = if a[agent] == 0 {
                1.0 / theta
            } else {
                -1.0 / (1.0 - theta)
            };
            advantage(a) * score
        })
        .sum::<f64>()
        / dataset.len() as f64;
    Ok(grad * theta)
}
