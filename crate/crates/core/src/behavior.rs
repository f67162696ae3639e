//! Behavior-policy updates that steer collection toward under-sampled joint
//! actions, and the tabular oracle samplers they approximate.

use std::collections::HashMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::envs::{GameSpec, JointState};
use crate::error::{Error, Result};
use crate::nn::{self, AdamState, MlpSpec, Objective};
use crate::policy::{
    combine_log_probs, init_behavior, BehaviorPolicy, JointTargetPolicy, SamplerMode,
    StateFeatures, TargetCache,
};

/// Smallest target probability for which a likelihood ratio is formed.
pub const MIN_TARGET_PROB: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorUpdateConfig {
    pub lr: f64,
    pub clip: f64,
    pub target_kl: f64,
    pub n_epoch: usize,
    pub n_minibatch: usize,
    /// Behavior update period `m` in environment steps.
    pub batch_size: usize,
}

impl Default for BehaviorUpdateConfig {
    fn default() -> Self {
        BehaviorUpdateConfig {
            lr: 0.03,
            clip: 1.0,
            target_kl: 6.0,
            n_epoch: 4,
            n_minibatch: 1,
            batch_size: 1,
        }
    }
}

impl BehaviorUpdateConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.clip > 0.0) {
            return Err(Error::invalid("behavior clip must be positive"));
        }
        if !(self.target_kl >= 0.0) {
            return Err(Error::invalid("behavior target KL must be non-negative"));
        }
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return Err(Error::invalid(
                "behavior learning rate must be finite and non-negative",
            ));
        }
        if self.batch_size == 0 || self.n_epoch == 0 || self.n_minibatch == 0 {
            return Err(Error::invalid(
                "behavior batch size, epochs and minibatches must be at least 1",
            ));
        }
        Ok(())
    }
}

/// One distinct input row of a categorical objective, with how often each
/// output class was observed there.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitRow<'a> {
    pub input: &'a [f64],
    /// Added to the network output before the softmax (empty for none).
    pub base: &'a [f64],
    /// Log-probabilities that ratios are taken against (empty for NLL).
    pub reference: &'a [f64],
    pub counts: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LogitLoss {
    /// Mean clipped surrogate `min(-rho, -clip(rho, 1 - eps, 1 + eps))`.
    Surrogate { clip: f64 },
    /// Mean negative log-likelihood.
    Nll,
}

/// A categorical loss over softmax(base + net(input)), averaged over every
/// counted observation.
pub struct LogitObjective<'a> {
    spec: &'a MlpSpec,
    rows: &'a [LogitRow<'a>],
    inputs: Vec<f64>,
    total: f64,
    loss: LogitLoss,
}

impl<'a> LogitObjective<'a> {
    pub fn new(spec: &'a MlpSpec, rows: &'a [LogitRow<'a>], loss: LogitLoss) -> Result<Self> {
        let k = spec.output_dim;
        let mut inputs = Vec::with_capacity(rows.len() * spec.input_dim);
        let mut total = 0.0;
        for row in rows {
            if row.input.len() != spec.input_dim || !(row.base.is_empty() || row.base.len() == k) {
                return Err(Error::invalid("logit row does not match network shape"));
            }
            if matches!(loss, LogitLoss::Surrogate { .. }) && row.reference.len() != k {
                return Err(Error::invalid("surrogate rows need reference log-probs"));
            }
            for &(a, c) in &row.counts {
                if a >= k {
                    return Err(Error::invalid(format!("class {a} out of range")));
                }
                total += c;
            }
            inputs.extend_from_slice(row.input);
        }
        if rows.is_empty() || total <= 0.0 {
            return Err(Error::invalid("objective needs at least one observation"));
        }
        Ok(LogitObjective {
            spec,
            rows,
            inputs,
            total,
            loss,
        })
    }

    fn eval(&self, params: &[f64], want_grad: bool) -> Result<(f64, Vec<f64>)> {
        self.eval_full(params, want_grad).map(|e| (e.value, e.grad))
    }

    /// Also returns the mean of `reference - log p` over the counted
    /// observations, which is a KL estimate when rows carry a reference.
    pub(crate) fn eval_full(&self, params: &[f64], want_grad: bool) -> Result<LogitEval> {
        let k = self.spec.output_dim;
        let acts = nn::forward_batch(self.spec, params, &self.inputs, self.rows.len())?;
        let out = acts.output();
        let mut d_out = vec![0.0; if want_grad { out.len() } else { 0 }];
        let mut value = 0.0;
        let mut divergence = 0.0;
        let mut z = vec![0.0; k];
        for (r, row) in self.rows.iter().enumerate() {
            z.copy_from_slice(&out[r * k..(r + 1) * k]);
            if !row.base.is_empty() {
                z.iter_mut().zip(row.base).for_each(|(z, b)| *z += b);
            }
            let lp = nn::log_softmax(&z);
            for &(a, c) in &row.counts {
                let w = c / self.total;
                if !row.reference.is_empty() {
                    divergence += w * (row.reference[a] - lp[a]);
                }
                let scale = match self.loss {
                    LogitLoss::Nll => {
                        value -= w * lp[a];
                        -w
                    }
                    LogitLoss::Surrogate { clip } => {
                        let rho = (lp[a] - row.reference[a]).exp();
                        let clipped = rho.clamp(1.0 - clip, 1.0 + clip);
                        value += w * (-rho).min(-clipped);
                        if rho >= 1.0 - clip {
                            -w * rho
                        } else {
                            0.0
                        }
                    }
                };
                if want_grad && scale != 0.0 {
                    // d log p_a / dz = e_a - p
                    let d = &mut d_out[r * k..(r + 1) * k];
                    for (j, (d, l)) in d.iter_mut().zip(&lp).enumerate() {
                        let indicator = if j == a { 1.0 } else { 0.0 };
                        *d += scale * (indicator - l.exp());
                    }
                }
            }
        }
        if !value.is_finite() {
            return Err(Error::Numeric {
                layer: self.spec.layers().len(),
                context: "categorical loss".into(),
            });
        }
        let mut grad = vec![0.0; if want_grad { params.len() } else { 0 }];
        if want_grad {
            nn::backward(self.spec, params, &acts, &d_out, &mut grad)?;
        }
        Ok(LogitEval {
            value,
            grad,
            divergence,
        })
    }
}

pub(crate) struct LogitEval {
    pub value: f64,
    pub grad: Vec<f64>,
    pub divergence: f64,
}

impl Objective for LogitObjective<'_> {
    fn value(&self, params: &[f64]) -> Result<f64> {
        Ok(self.eval(params, false)?.0)
    }

    fn value_and_grad(&self, params: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.eval(params, true)
    }
}

/// Groups sample indices by a dense key, reusing scratch space across calls.
#[derive(Debug, Default)]
pub(crate) struct Grouper {
    slot: Vec<usize>,
    touched: Vec<usize>,
}

impl Grouper {
    pub(crate) fn new(n_keys: usize) -> Self {
        Grouper {
            slot: vec![usize::MAX; n_keys],
            touched: Vec::new(),
        }
    }

    /// `(key, [(class, count)])` in first-seen key order.
    pub(crate) fn group<I>(&mut self, items: I) -> Vec<(usize, Vec<(usize, f64)>)>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut out: Vec<(usize, Vec<(usize, f64)>)> = Vec::new();
        for (key, class) in items {
            if self.slot[key] == usize::MAX {
                self.slot[key] = out.len();
                self.touched.push(key);
                out.push((key, Vec::new()));
            }
            let counts = &mut out[self.slot[key]].1;
            match counts.iter_mut().find(|(b, _)| *b == class) {
                Some((_, c)) => *c += 1.0,
                None => counts.push((class, 1.0)),
            }
        }
        for key in self.touched.drain(..) {
            self.slot[key] = usize::MAX;
        }
        out
    }
}

/// Buffer samples indexed by distinct state, with cached target features.
struct Prepared {
    features: Vec<Arc<StateFeatures>>,
    /// Per sample: (state index, joint action).
    keys: Vec<(usize, usize)>,
    /// Per agent, per sample: that agent's action.
    agent_actions: Vec<Vec<usize>>,
    /// Per state: joint action counts over the whole buffer.
    state_counts: Vec<Vec<(usize, f64)>>,
}

impl Prepared {
    fn new(
        game: &GameSpec,
        joint: &JointTargetPolicy,
        samples: &[(JointState, usize)],
        cache: &mut TargetCache,
    ) -> Result<Self> {
        Self::build(game, joint, samples, cache, false)
    }

    /// Like [`Prepared::new`], but drops samples whose target probability is
    /// below [`MIN_TARGET_PROB`] instead of failing.
    fn skipping_degenerate(
        game: &GameSpec,
        joint: &JointTargetPolicy,
        samples: &[(JointState, usize)],
        cache: &mut TargetCache,
    ) -> Result<Self> {
        Self::build(game, joint, samples, cache, true)
    }

    fn build(
        game: &GameSpec,
        joint: &JointTargetPolicy,
        samples: &[(JointState, usize)],
        cache: &mut TargetCache,
        skip_degenerate: bool,
    ) -> Result<Self> {
        let space = game.joint_actions();
        let mut index: HashMap<JointState, usize> = HashMap::new();
        let mut features = Vec::new();
        let mut keys = Vec::with_capacity(samples.len());
        let mut agent_actions = vec![Vec::with_capacity(samples.len()); game.n_agents()];
        for &(s, a) in samples {
            if a >= space.size() {
                return Err(Error::invalid(format!("joint action {a} out of range")));
            }
            let si = match index.get(&s) {
                Some(&i) => i,
                None => {
                    features.push(cache.get(game, joint, s)?);
                    index.insert(s, features.len() - 1);
                    features.len() - 1
                }
            };
            let prob = features[si].joint_log_probs[a].exp();
            if prob < MIN_TARGET_PROB {
                if skip_degenerate {
                    continue;
                }
                return Err(Error::DegenerateRatio { prob });
            }
            keys.push((si, a));
            for (i, &ai) in space.decode(a).iter().enumerate() {
                agent_actions[i].push(ai);
            }
        }
        let mut grouper = Grouper::new(features.len());
        let mut state_counts = vec![Vec::new(); features.len()];
        for (si, counts) in grouper.group(keys.iter().copied()) {
            state_counts[si] = counts;
        }
        Ok(Prepared {
            features,
            keys,
            agent_actions,
            state_counts,
        })
    }

    fn joint_rows(&self, groups: Vec<(usize, Vec<(usize, f64)>)>) -> Vec<LogitRow<'_>> {
        groups
            .into_iter()
            .map(|(si, counts)| {
                let f = &self.features[si];
                LogitRow {
                    input: &f.joint_obs,
                    base: &f.joint_log_probs,
                    reference: &f.joint_log_probs,
                    counts,
                }
            })
            .collect()
    }

    fn agent_rows(
        &self,
        agent: usize,
        groups: Vec<(usize, Vec<(usize, f64)>)>,
    ) -> Vec<LogitRow<'_>> {
        groups
            .into_iter()
            .map(|(si, counts)| {
                let f = &self.features[si];
                LogitRow {
                    input: &f.obs[agent],
                    base: &[],
                    reference: &f.agent_log_probs[agent],
                    counts,
                }
            })
            .collect()
    }

    fn joint_groups(
        &self,
        grouper: &mut Grouper,
        idx: &[usize],
    ) -> Vec<(usize, Vec<(usize, f64)>)> {
        grouper.group(idx.iter().map(|&i| self.keys[i]))
    }

    fn agent_groups(
        &self,
        grouper: &mut Grouper,
        agent: usize,
        idx: &[usize],
    ) -> Vec<(usize, Vec<(usize, f64)>)> {
        grouper.group(
            idx.iter()
                .map(|&i| (self.keys[i].0, self.agent_actions[agent][i])),
        )
    }

    /// Monte Carlo `KL(pi_theta || pi_phi)` over all buffer samples.
    fn kl(&self, b: &BehaviorPolicy, game: &GameSpec) -> Result<f64> {
        let lps = behavior_log_probs_batch(b, game, &self.features)?;
        let mut total = 0.0;
        for (si, counts) in self.state_counts.iter().enumerate() {
            let target = &self.features[si].joint_log_probs;
            for &(a, c) in counts {
                total += c * (target[a] - lps[si][a]);
            }
        }
        Ok(total / self.keys.len() as f64)
    }
}

/// Behavior log-probabilities at many states with one batched pass per network.
pub fn behavior_log_probs_batch(
    b: &BehaviorPolicy,
    game: &GameSpec,
    features: &[Arc<StateFeatures>],
) -> Result<Vec<Vec<f64>>> {
    let rows = features.len();
    match b {
        BehaviorPolicy::OnPolicy => {
            Ok(features.iter().map(|f| f.joint_log_probs.clone()).collect())
        }
        BehaviorPolicy::MaProps { adjust } => {
            let inputs: Vec<f64> = features
                .iter()
                .flat_map(|f| f.joint_obs.iter().copied())
                .collect();
            let acts = adjust.forward_batch(&inputs, rows)?;
            let k = adjust.spec.output_dim;
            Ok(features
                .iter()
                .enumerate()
                .map(|(r, f)| {
                    let z: Vec<f64> = acts.output()[r * k..(r + 1) * k]
                        .iter()
                        .zip(&f.joint_log_probs)
                        .map(|(d, lp)| d + lp)
                        .collect();
                    nn::log_softmax(&z)
                })
                .collect())
        }
        BehaviorPolicy::Props { agents } => {
            let mut per_agent: Vec<Vec<Vec<f64>>> = Vec::with_capacity(agents.len());
            for (i, net) in agents.iter().enumerate() {
                let inputs: Vec<f64> = features
                    .iter()
                    .flat_map(|f| f.obs[i].iter().copied())
                    .collect();
                let acts = net.forward_batch(&inputs, rows)?;
                let k = net.spec.output_dim;
                per_agent.push(
                    (0..rows)
                        .map(|r| nn::log_softmax(&acts.output()[r * k..(r + 1) * k]))
                        .collect(),
                );
            }
            Ok((0..rows)
                .map(|r| {
                    let lps: Vec<Vec<f64>> = per_agent.iter().map(|p| p[r].clone()).collect();
                    combine_log_probs(game, &lps)
                })
                .collect())
        }
    }
}

/// Mean clipped surrogate of the joint ratio `pi_phi(a|s) / pi_theta(a|s)`.
pub fn props_loss(
    b: &BehaviorPolicy,
    joint: &JointTargetPolicy,
    game: &GameSpec,
    batch: &[(JointState, usize)],
    clip: f64,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let prep = Prepared::new(game, joint, batch, &mut TargetCache::new())?;
    let lps = behavior_log_probs_batch(b, game, &prep.features)?;
    let mut total = 0.0;
    for &(si, a) in &prep.keys {
        let rho = (lps[si][a] - prep.features[si].joint_log_probs[a]).exp();
        total += (-rho).min(-rho.clamp(1.0 - clip, 1.0 + clip));
    }
    Ok(total / batch.len() as f64)
}

/// Gradient of [`props_loss`] with respect to the trainable behavior
/// parameters: the adjustment network for MA-PROPS, or agent `agent`'s
/// network under its own per-agent ratio for PROPS.
pub fn props_loss_grad(
    b: &BehaviorPolicy,
    joint: &JointTargetPolicy,
    game: &GameSpec,
    batch: &[(JointState, usize)],
    clip: f64,
    agent: usize,
) -> Result<(f64, Vec<f64>)> {
    behavior_objective_grad(b, joint, game, batch, LogitLoss::Surrogate { clip }, agent)
}

/// Gradient of the mean negative log-likelihood of `batch` under the behavior
/// policy, with respect to the same parameters as [`props_loss_grad`].
pub fn behavior_nll_grad(
    b: &BehaviorPolicy,
    joint: &JointTargetPolicy,
    game: &GameSpec,
    batch: &[(JointState, usize)],
    agent: usize,
) -> Result<(f64, Vec<f64>)> {
    behavior_objective_grad(b, joint, game, batch, LogitLoss::Nll, agent)
}

fn behavior_objective_grad(
    b: &BehaviorPolicy,
    joint: &JointTargetPolicy,
    game: &GameSpec,
    batch: &[(JointState, usize)],
    loss: LogitLoss,
    agent: usize,
) -> Result<(f64, Vec<f64>)> {
    let prep = Prepared::new(game, joint, batch, &mut TargetCache::new())?;
    let mut grouper = Grouper::new(prep.features.len());
    let all: Vec<usize> = (0..batch.len()).collect();
    match b {
        BehaviorPolicy::OnPolicy => Err(Error::invalid("on-policy behavior has no parameters")),
        BehaviorPolicy::MaProps { adjust } => {
            let rows = prep.joint_rows(prep.joint_groups(&mut grouper, &all));
            LogitObjective::new(&adjust.spec, &rows, loss)?.value_and_grad(adjust.params.as_slice())
        }
        BehaviorPolicy::Props { agents } => {
            let net = agents
                .get(agent)
                .ok_or_else(|| Error::invalid(format!("no agent {agent}")))?;
            let rows = prep.agent_rows(agent, prep.agent_groups(&mut grouper, agent, &all));
            LogitObjective::new(&net.spec, &rows, loss)?.value_and_grad(net.params.as_slice())
        }
    }
}

/// Monte Carlo estimate of `KL(pi_theta || pi_phi)` over buffer samples.
pub fn behavior_kl_estimate(
    b: &BehaviorPolicy,
    joint: &JointTargetPolicy,
    game: &GameSpec,
    samples: &[(JointState, usize)],
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    Prepared::new(game, joint, samples, &mut TargetCache::new())?.kl(b, game)
}

/// Splits `0..n` into `parts` contiguous chunks whose sizes differ by at most
/// one. Produces fewer chunks when `n < parts`.
pub(crate) fn partition(n: usize, parts: usize) -> Vec<std::ops::Range<usize>> {
    let parts = parts.min(n).max(1);
    let (base, extra) = (n / parts, n % parts);
    let mut start = 0;
    (0..parts)
        .map(|p| {
            let len = base + usize::from(p < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .filter(|r| !r.is_empty())
        .collect()
}

/// Re-initializes the behavior policy against `joint` and trains it on the
/// buffer's (state, joint action) pairs. Pairs whose target probability is
/// below [`MIN_TARGET_PROB`] are left out.
#[allow(clippy::too_many_arguments)]
pub fn update_behavior<R: Rng + ?Sized>(
    mode: SamplerMode,
    joint: &JointTargetPolicy,
    game: &GameSpec,
    samples: &[(JointState, usize)],
    cfg: &BehaviorUpdateConfig,
    cache: &mut TargetCache,
    init_rng: &mut R,
    shuffle_rng: &mut R,
) -> Result<BehaviorPolicy> {
    cfg.validate()?;
    let mut b = init_behavior(mode, joint, game, init_rng)?;
    if mode == SamplerMode::OnPolicy {
        return Ok(b);
    }
    if samples.is_empty() {
        return Err(Error::Precondition(
            "behavior update needs a nonempty buffer".into(),
        ));
    }
    let prep = Prepared::skipping_degenerate(game, joint, samples, cache)?;
    if prep.keys.is_empty() {
        return Ok(b);
    }
    let mut grouper = Grouper::new(prep.features.len());
    let loss = LogitLoss::Surrogate { clip: cfg.clip };
    let mut adams: Vec<AdamState> = match &b {
        BehaviorPolicy::MaProps { adjust } => vec![AdamState::new(adjust.param_count())],
        BehaviorPolicy::Props { agents } => agents
            .iter()
            .map(|n| AdamState::new(n.param_count()))
            .collect(),
        BehaviorPolicy::OnPolicy => unreachable!(),
    };
    let mut order: Vec<usize> = (0..prep.keys.len()).collect();
    let parts = partition(prep.keys.len(), cfg.n_minibatch);
    // With one minibatch covering the buffer, each epoch's forward pass
    // already yields the KL at the current parameters.
    let full_batch = parts.len() == 1;
    for epoch in 0..cfg.n_epoch {
        order.shuffle(shuffle_rng);
        for range in parts.iter().cloned() {
            let idx = &order[range];
            let check = full_batch && epoch > 0;
            match &mut b {
                BehaviorPolicy::MaProps { adjust } => {
                    let rows = prep.joint_rows(prep.joint_groups(&mut grouper, idx));
                    let e = LogitObjective::new(&adjust.spec, &rows, loss)?
                        .eval_full(adjust.params.as_slice(), true)?;
                    if check && e.divergence > cfg.target_kl {
                        return Ok(b);
                    }
                    ascend(&mut adams[0], adjust.params.as_mut_slice(), e.grad, cfg.lr)?;
                }
                BehaviorPolicy::Props { agents } => {
                    let mut divergence = 0.0;
                    let mut grads = Vec::with_capacity(agents.len());
                    for (i, net) in agents.iter().enumerate() {
                        let rows = prep.agent_rows(i, prep.agent_groups(&mut grouper, i, idx));
                        let e = LogitObjective::new(&net.spec, &rows, loss)?
                            .eval_full(net.params.as_slice(), true)?;
                        divergence += e.divergence;
                        grads.push(e.grad);
                    }
                    if check && divergence > cfg.target_kl {
                        return Ok(b);
                    }
                    for ((net, adam), grad) in agents.iter_mut().zip(&mut adams).zip(grads) {
                        ascend(adam, net.params.as_mut_slice(), grad, cfg.lr)?;
                    }
                }
                BehaviorPolicy::OnPolicy => unreachable!(),
            }
        }
        if !full_batch && epoch + 1 < cfg.n_epoch && prep.kl(&b, game)? > cfg.target_kl {
            break;
        }
    }
    Ok(b)
}

fn ascend(adam: &mut AdamState, params: &mut [f64], mut grad: Vec<f64>, lr: f64) -> Result<()> {
    grad.iter_mut().for_each(|g| *g = -*g);
    adam.step(params, &grad, lr)
}

/// Visit counts per state over a fixed number of actions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CountTable {
    n_actions: usize,
    counts: HashMap<JointState, Vec<u64>>,
}

impl CountTable {
    pub fn new(n_actions: usize) -> Self {
        CountTable {
            n_actions,
            counts: HashMap::new(),
        }
    }

    pub fn from_counts(state: JointState, counts: &[u64]) -> Self {
        let mut t = Self::new(counts.len());
        t.counts.insert(state, counts.to_vec());
        t
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn record(&mut self, state: JointState, action: usize) {
        let n = self.n_actions;
        self.counts.entry(state).or_insert_with(|| vec![0; n])[action] += 1;
    }

    pub fn count(&self, state: JointState, action: usize) -> u64 {
        self.counts.get(&state).map_or(0, |c| c[action])
    }

    pub fn counts(&self, state: JointState) -> Option<&[u64]> {
        self.counts.get(&state).map(Vec::as_slice)
    }

    pub fn total(&self, state: JointState) -> u64 {
        self.counts.get(&state).map_or(0, |c| c.iter().sum())
    }
}

/// How an oracle sampler chooses among equally under-sampled actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TieBreak {
    LowestIndex,
    /// Keep `action` when it is among the tied set, otherwise lowest index.
    Prefer(usize),
}

fn most_under_sampled(
    counts: &CountTable,
    target: &[f64],
    state: JointState,
    tie: TieBreak,
) -> usize {
    let total = counts.total(state);
    let deficit: Vec<f64> = (0..target.len())
        .map(|a| {
            if total == 0 {
                target[a]
            } else {
                target[a] - counts.count(state, a) as f64 / total as f64
            }
        })
        .collect();
    let best = nn::argmax(&deficit);
    match tie {
        TieBreak::Prefer(a) if a < deficit.len() && deficit[a] == deficit[best] => a,
        _ => best,
    }
}

/// The joint action maximizing `pi(a|s) - count(s, a) / total(s)`, ties to the
/// lowest joint index.
pub fn most_under_sampled_joint(counts: &CountTable, target: &[f64], state: JointState) -> usize {
    most_under_sampled(counts, target, state, TieBreak::LowestIndex)
}

/// The same rule applied by one agent to its own counts and policy.
pub fn most_under_sampled_per_agent(
    counts: &CountTable,
    target: &[f64],
    state: JointState,
    tie: TieBreak,
) -> usize {
    most_under_sampled(counts, target, state, tie)
}
