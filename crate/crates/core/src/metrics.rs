//! Sampling-error measurements, success rate and bootstrap intervals.

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::behavior::{Grouper, LogitLoss, LogitObjective, LogitRow};
use crate::envs::{GameSpec, JointState, VisitationDistribution};
use crate::error::{Error, Result};
use crate::nn::{self, AdamState, Mlp, MlpSpec, Objective};
use crate::policy::{JointTargetPolicy, TargetCache};

/// Total variation distance over the union of supports.
pub fn tv_distance(
    empirical: &VisitationDistribution,
    truth: &VisitationDistribution,
) -> Result<f64> {
    if empirical.n_joint_actions() != truth.n_joint_actions() {
        return Err(Error::invalid(
            "distributions use different joint action spaces",
        ));
    }
    let keys: BTreeSet<&(JointState, usize)> = empirical
        .iter()
        .chain(truth.iter())
        .map(|(k, _)| k)
        .collect();
    let diff: f64 = keys
        .into_iter()
        .map(|&(s, a)| (empirical.get(s, a) - truth.get(s, a)).abs())
        .sum();
    Ok((0.5 * diff).min(1.0))
}

/// `sum_a p_D(a) log(p_D(a) / p(a))` for an empirical count vector.
pub fn tabular_kl(counts: &[u64], reference: &[f64]) -> Result<f64> {
    let total: u64 = counts.iter().sum();
    if total == 0 || counts.len() != reference.len() {
        return Err(Error::invalid(
            "counts must be nonempty and match the reference",
        ));
    }
    let mut kl = 0.0;
    for (&c, &p) in counts.iter().zip(reference) {
        if c == 0 {
            continue;
        }
        if p < 1e-12 {
            return Err(Error::DegenerateSupport { prob: p });
        }
        let q = c as f64 / total as f64;
        kl += q * (q / p).ln();
    }
    Ok(kl)
}

/// Which action space a fitted policy covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitScope {
    Joint,
    Agent(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleConfig {
    pub epochs: usize,
    pub lr: f64,
    pub minibatch_size: usize,
    /// Fit a network shaped like the policy; otherwise use exact per-state
    /// empirical frequencies.
    pub mirror_architecture: bool,
    /// Stop once an epoch changes the log-likelihood by less than this.
    pub tolerance: f64,
}

impl Default for MleConfig {
    fn default() -> Self {
        MleConfig {
            epochs: 200,
            lr: 0.01,
            minibatch_size: 64,
            mirror_architecture: true,
            tolerance: 1e-5,
        }
    }
}

impl MleConfig {
    pub fn tabular() -> Self {
        MleConfig {
            mirror_architecture: false,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum FittedModel {
    Network(Mlp),
    Tabular(HashMap<JointState, Vec<u64>>),
}

/// Maximum-likelihood policy fitted to a buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedPolicy {
    pub scope: FitScope,
    model: FittedModel,
}

impl FittedPolicy {
    pub fn log_probs(&self, game: &GameSpec, state: JointState) -> Result<Vec<f64>> {
        match &self.model {
            FittedModel::Network(net) => Ok(nn::log_softmax(
                &net.forward(&scope_input(game, self.scope, state))?,
            )),
            FittedModel::Tabular(counts) => {
                let c = counts
                    .get(&state)
                    .ok_or_else(|| Error::invalid(format!("state {state} absent from the fit")))?;
                let total: u64 = c.iter().sum();
                Ok(c.iter().map(|&n| (n as f64 / total as f64).ln()).collect())
            }
        }
    }
}

fn scope_input(game: &GameSpec, scope: FitScope, state: JointState) -> Vec<f64> {
    match scope {
        FitScope::Joint => game.joint_observation(state),
        FitScope::Agent(i) => game.observe(state, i),
    }
}

fn scope_action(game: &GameSpec, scope: FitScope, joint_action: usize) -> usize {
    match scope {
        FitScope::Joint => joint_action,
        FitScope::Agent(i) => game.joint_actions().decode(joint_action)[i],
    }
}

fn scope_size(game: &GameSpec, scope: FitScope) -> usize {
    match scope {
        FitScope::Joint => game.joint_actions().size(),
        FitScope::Agent(i) => game.action_counts()[i],
    }
}

/// Distinct-state inputs plus a (state index, class) key per sample.
fn index_samples(
    game: &GameSpec,
    scope: FitScope,
    samples: &[(JointState, usize)],
) -> (Vec<Vec<f64>>, Vec<(usize, usize)>) {
    let mut index: HashMap<JointState, usize> = HashMap::new();
    let mut inputs = Vec::new();
    let keys = samples
        .iter()
        .map(|&(s, j)| {
            let si = *index.entry(s).or_insert_with(|| {
                inputs.push(scope_input(game, scope, s));
                inputs.len() - 1
            });
            (si, scope_action(game, scope, j))
        })
        .collect();
    (inputs, keys)
}

fn nll_rows(inputs: &[Vec<f64>], groups: Vec<(usize, Vec<(usize, f64)>)>) -> Vec<LogitRow<'_>> {
    groups
        .into_iter()
        .map(|(si, counts)| LogitRow {
            input: &inputs[si],
            base: &[],
            reference: &[],
            counts,
        })
        .collect()
}

/// Fits `argmax sum log pi(a | s)` over the buffer samples.
pub fn fit_mle_policy<R: Rng + ?Sized>(
    game: &GameSpec,
    samples: &[(JointState, usize)],
    scope: FitScope,
    cfg: &MleConfig,
    rng: &mut R,
) -> Result<FittedPolicy> {
    if samples.is_empty() {
        return Err(Error::Precondition("cannot fit an empty buffer".into()));
    }
    if let FitScope::Agent(i) = scope {
        if i >= game.n_agents() {
            return Err(Error::invalid(format!("no agent {i}")));
        }
    }
    let k = scope_size(game, scope);
    if !cfg.mirror_architecture {
        let mut counts: HashMap<JointState, Vec<u64>> = HashMap::new();
        for &(s, j) in samples {
            counts.entry(s).or_insert_with(|| vec![0; k])[scope_action(game, scope, j)] += 1;
        }
        return Ok(FittedPolicy {
            scope,
            model: FittedModel::Tabular(counts),
        });
    }
    if cfg.epochs == 0 || cfg.minibatch_size == 0 {
        return Err(Error::invalid(
            "MLE fit needs at least one epoch and sample per minibatch",
        ));
    }
    let dim = match scope {
        FitScope::Joint => game.joint_obs_dim(),
        FitScope::Agent(_) => game.obs_dim(),
    };
    let mut net = Mlp::init(MlpSpec::new(dim, k), rng)?;
    let mut adam = AdamState::new(net.param_count());
    let (inputs, keys) = index_samples(game, scope, samples);
    let mut grouper = Grouper::new(inputs.len());
    let full_rows = nll_rows(&inputs, grouper.group(keys.iter().copied()));
    let mut prev =
        LogitObjective::new(&net.spec, &full_rows, LogitLoss::Nll)?.value(net.params.as_slice())?;
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.minibatch_size) {
            let rows = nll_rows(&inputs, grouper.group(chunk.iter().map(|&i| keys[i])));
            let (_, grad) = LogitObjective::new(&net.spec, &rows, LogitLoss::Nll)?
                .value_and_grad(net.params.as_slice())?;
            adam.step(net.params.as_mut_slice(), &grad, cfg.lr)?;
        }
        let loss = LogitObjective::new(&net.spec, &full_rows, LogitLoss::Nll)?
            .value(net.params.as_slice())?;
        let change = (prev - loss).abs();
        prev = loss;
        if change < cfg.tolerance {
            break;
        }
    }
    Ok(FittedPolicy {
        scope,
        model: FittedModel::Network(net),
    })
}

/// Reference log-probabilities for a fit scope under the target policy.
fn reference_log_probs(
    game: &GameSpec,
    joint: &JointTargetPolicy,
    cache: &mut TargetCache,
    scope: FitScope,
    state: JointState,
) -> Result<Vec<f64>> {
    let f = cache.get(game, joint, state)?;
    Ok(match scope {
        FitScope::Joint => f.joint_log_probs.clone(),
        FitScope::Agent(i) => f.agent_log_probs[i].clone(),
    })
}

/// Monte Carlo `KL(pi_D || pi)`: mean of `log fitted - log reference`.
pub fn kl_sampling_error(
    game: &GameSpec,
    samples: &[(JointState, usize)],
    reference: &JointTargetPolicy,
    fitted: &FittedPolicy,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Precondition("empty buffer".into()));
    }
    let mut cache = TargetCache::new();
    let mut per_state: HashMap<JointState, (Vec<f64>, Vec<f64>)> = HashMap::new();
    let mut total = 0.0;
    for &(s, j) in samples {
        if !per_state.contains_key(&s) {
            let r = reference_log_probs(game, reference, &mut cache, fitted.scope, s)?;
            per_state.insert(s, (fitted.log_probs(game, s)?, r));
        }
        let (f, r) = &per_state[&s];
        let a = scope_action(game, fitted.scope, j);
        if r[a].exp() < 1e-12 {
            return Err(Error::DegenerateSupport { prob: r[a].exp() });
        }
        total += f[a] - r[a];
    }
    Ok(total / samples.len() as f64)
}

/// Fraction of `n_episodes` stochastic rollouts of the target policy that hit
/// the game's success event.
pub fn success_rate<R: Rng + ?Sized>(
    joint: &JointTargetPolicy,
    game: &GameSpec,
    n_episodes: usize,
    rng: &mut R,
) -> Result<f64> {
    if n_episodes == 0 {
        return Err(Error::invalid("need at least one evaluation episode"));
    }
    let mut cache = TargetCache::new();
    let mut wins = 0usize;
    for _ in 0..n_episodes {
        let mut s = game.initial_state();
        for t in 0..game.horizon {
            let f = cache.get(game, joint, s)?;
            let actions: Vec<usize> = f
                .agent_log_probs
                .iter()
                .map(|lp| {
                    let p: Vec<f64> = lp.iter().map(|l| l.exp()).collect();
                    nn::categorical_sample(&p, rng)
                })
                .collect();
            let step = game.step(s, t, &actions, rng)?;
            if step.success {
                wins += 1;
                break;
            }
            if step.done() {
                break;
            }
            s = step.next;
        }
    }
    Ok(wins as f64 / n_episodes as f64)
}

pub const DEFAULT_RESAMPLES: usize = 1000;
pub const DEFAULT_LEVEL: f64 = 0.95;

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Percentile bootstrap interval for the mean.
pub fn bootstrap_ci<R: Rng + ?Sized>(
    samples: &[f64],
    level: f64,
    resamples: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if samples.is_empty() || resamples == 0 || !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(
            "bootstrap needs samples, resamples and a level in (0, 1)",
        ));
    }
    let n = samples.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| samples[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    Ok((quantile(&means, alpha), quantile(&means, 1.0 - alpha)))
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// One line of `metrics.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub step: u64,
    pub seed: u64,
    pub success_rate: Option<f64>,
    pub tv_joint: Option<f64>,
    pub kl_joint: Option<f64>,
    pub kl_agent: Vec<Option<f64>>,
}

/// Value columns of a metrics row, in file order.
pub const METRIC_COLUMNS: [&str; 5] = [
    "success_rate",
    "tv_joint",
    "kl_joint",
    "kl_agent_1",
    "kl_agent_2",
];

impl MetricsRow {
    /// Looks a value up by its column name.
    pub fn get(&self, column: &str) -> Option<f64> {
        match column {
            "success_rate" => self.success_rate,
            "tv_joint" => self.tv_joint,
            "kl_joint" => self.kl_joint,
            "kl_agent_1" => self.kl_agent.first().copied().flatten(),
            "kl_agent_2" => self.kl_agent.get(1).copied().flatten(),
            _ => None,
        }
    }

    pub fn new(step: u64, seed: u64) -> Self {
        MetricsRow {
            step,
            seed,
            success_rate: None,
            tv_joint: None,
            kl_joint: None,
            kl_agent: vec![None, None],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{gridworld, matrix_game, true_visitation, DEFAULT_STATE_CAP};
    use crate::nn::{LayerParams, ParamVector};
    use crate::policy::{sample_joint, AgentPolicy, BehaviorPolicy};
    use proptest::prelude::{prop, prop_assert, proptest};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn dist(pairs: &[((u32, usize), f64)]) -> VisitationDistribution {
        VisitationDistribution::from_masses(
            4,
            pairs.iter().map(|&((s, a), m)| ((JointState(s), a), m)),
        )
    }

    fn constant_agent(obs_dim: usize, logits: &[f64]) -> AgentPolicy {
        let spec = MlpSpec::new(obs_dim, logits.len()).with_hidden(&[]);
        let params = ParamVector::flatten(
            spec.layers(),
            &[LayerParams {
                weights: vec![0.0; obs_dim * logits.len()],
                bias: logits.to_vec(),
            }],
        )
        .unwrap();
        AgentPolicy {
            net: Mlp::from_params(spec, params).unwrap(),
        }
    }

    fn constant_joint(game: &GameSpec, logits: [&[f64]; 2]) -> JointTargetPolicy {
        JointTargetPolicy {
            agents: logits
                .iter()
                .map(|l| constant_agent(game.obs_dim(), l))
                .collect(),
        }
    }

    #[test]
    fn tv_examples() {
        let uniform = dist(&[
            ((0, 0), 0.25),
            ((0, 1), 0.25),
            ((0, 2), 0.25),
            ((0, 3), 0.25),
        ]);
        assert_eq!(tv_distance(&uniform, &uniform).unwrap(), 0.0);
        let half = dist(&[((0, 1), 0.5), ((0, 2), 0.5)]);
        assert_eq!(tv_distance(&half, &uniform).unwrap(), 0.5);
        let a = dist(&[((0, 0), 1.0)]);
        let b = dist(&[((1, 0), 1.0)]);
        assert_eq!(tv_distance(&a, &b).unwrap(), 1.0);
        let other = VisitationDistribution::new(9);
        assert!(tv_distance(&a, &other).is_err());
    }

    #[test]
    fn explicit_zero_mass_counts_once() {
        let uniform = dist(&[
            ((0, 0), 0.25),
            ((0, 1), 0.25),
            ((0, 2), 0.25),
            ((0, 3), 0.25),
        ]);
        let padded = dist(&[((0, 0), 0.0), ((0, 1), 0.5), ((0, 2), 0.5), ((0, 3), 0.0)]);
        assert_eq!(tv_distance(&padded, &uniform).unwrap(), 0.5);
    }

    proptest! {
        #[test]
        fn tv_symmetric_and_bounded(
            xs in prop::collection::vec(0.0f64..1.0, 6),
            ys in prop::collection::vec(0.0f64..1.0, 6),
        ) {
            let norm = |v: &[f64]| {
                let t: f64 = v.iter().sum::<f64>() + 1e-9;
                dist(&v.iter().enumerate().map(|(i, &m)| (((i / 4) as u32, i % 4), m / t)).collect::<Vec<_>>())
            };
            let (p, q) = (norm(&xs), norm(&ys));
            let d1 = tv_distance(&p, &q).unwrap();
            let d2 = tv_distance(&q, &p).unwrap();
            prop_assert!((d1 - d2).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&d1));
            prop_assert!(tv_distance(&p, &p).unwrap() == 0.0);
        }
    }

    #[test]
    fn repeated_sample_fit_is_confident() {
        let game = gridworld();
        let s = JointState(8);
        let samples = vec![(s, 7); 50];
        let fit = fit_mle_policy(
            &game,
            &samples,
            FitScope::Joint,
            &MleConfig::default(),
            &mut rng(0),
        )
        .unwrap();
        assert!(fit.log_probs(&game, s).unwrap()[7].exp() >= 0.95);
    }

    #[test]
    fn uniform_buffer_fit_is_near_uniform() {
        let game = matrix_game("climbing").unwrap();
        let s = game.initial_state();
        let mut r = rng(1);
        let samples: Vec<_> = (0..20_000).map(|_| (s, r.random_range(0..9))).collect();
        let fit = fit_mle_policy(
            &game,
            &samples,
            FitScope::Joint,
            &MleConfig::default(),
            &mut r,
        )
        .unwrap();
        let p: Vec<f64> = fit
            .log_probs(&game, s)
            .unwrap()
            .iter()
            .map(|l| l.exp())
            .collect();
        let tv: f64 = 0.5 * p.iter().map(|q| (q - 1.0 / 9.0).abs()).sum::<f64>();
        assert!(tv < 0.05, "{p:?}");
    }

    #[test]
    fn two_state_fit_matches_frequencies() {
        let game = gridworld();
        let (s, u) = (JointState(2), JointState(30));
        let mut samples = vec![(s, 0), (s, 0), (s, 0), (s, 1)];
        samples.extend([(u, 4), (u, 9)]);
        let cfg = MleConfig {
            epochs: 2000,
            ..MleConfig::default()
        };
        let fit = fit_mle_policy(&game, &samples, FitScope::Joint, &cfg, &mut rng(2)).unwrap();
        let p0 = fit.log_probs(&game, s).unwrap()[0].exp();
        assert!((p0 - 0.75).abs() < 0.05, "{p0}");
        let tab = fit_mle_policy(
            &game,
            &samples,
            FitScope::Joint,
            &MleConfig::tabular(),
            &mut rng(2),
        )
        .unwrap();
        assert!((tab.log_probs(&game, s).unwrap()[0].exp() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn alternating_buffer_kl() {
        let game = matrix_game("g1").unwrap();
        let joint = constant_joint(&game, [&[0.0, 0.0], &[0.0, 0.0]]);
        let s = game.initial_state();
        let samples: Vec<_> = (0..100)
            .map(|t| (s, if t % 2 == 0 { 1 } else { 2 }))
            .collect();
        let tab = MleConfig::tabular();
        let fit = fit_mle_policy(&game, &samples, FitScope::Joint, &tab, &mut rng(0)).unwrap();
        let kl = kl_sampling_error(&game, &samples, &joint, &fit).unwrap();
        assert!((kl - 2f64.ln()).abs() < 0.05);
        for i in 0..2 {
            let fit =
                fit_mle_policy(&game, &samples, FitScope::Agent(i), &tab, &mut rng(0)).unwrap();
            assert!(
                kl_sampling_error(&game, &samples, &joint, &fit)
                    .unwrap()
                    .abs()
                    < 0.05
            );
        }
    }

    #[test]
    fn tabular_fit_kl_equals_closed_form() {
        let game = matrix_game("climbing").unwrap();
        let joint = constant_joint(&game, [&[0.3, -0.2, 0.9], &[0.0, 1.1, -0.4]]);
        let s = game.initial_state();
        let p = joint.joint_dist(&game, s).unwrap();
        let mut r = rng(5);
        let samples: Vec<_> = (0..37)
            .map(|_| (s, nn::categorical_sample(&p, &mut r)))
            .collect();
        let mut counts = vec![0u64; 9];
        samples.iter().for_each(|&(_, a)| counts[a] += 1);
        let fit = fit_mle_policy(
            &game,
            &samples,
            FitScope::Joint,
            &MleConfig::tabular(),
            &mut r,
        )
        .unwrap();
        let mc = kl_sampling_error(&game, &samples, &joint, &fit).unwrap();
        assert!((mc - tabular_kl(&counts, &p).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn identical_fit_has_zero_kl() {
        let game = matrix_game("g4").unwrap();
        let joint = constant_joint(&game, [&[0.0, 0.0], &[0.0, 0.0]]);
        let s = game.initial_state();
        let samples: Vec<_> = (0..4).map(|a| (s, a)).collect();
        let fit = fit_mle_policy(
            &game,
            &samples,
            FitScope::Joint,
            &MleConfig::tabular(),
            &mut rng(0),
        )
        .unwrap();
        assert!(
            kl_sampling_error(&game, &samples, &joint, &fit)
                .unwrap()
                .abs()
                < 1e-15
        );
    }

    #[test]
    fn kl_vanishes_for_large_on_policy_buffers() {
        let game = matrix_game("climbing").unwrap();
        let joint = constant_joint(&game, [&[0.5, 0.0, -0.5], &[0.2, 0.2, -1.0]]);
        let s = game.initial_state();
        let mut r = rng(3);
        let samples: Vec<_> = (0..100_000)
            .map(|_| {
                (
                    s,
                    sample_joint(&BehaviorPolicy::OnPolicy, &joint, &game, s, &mut r)
                        .unwrap()
                        .joint_action,
                )
            })
            .collect();
        let fit = fit_mle_policy(
            &game,
            &samples,
            FitScope::Joint,
            &MleConfig::tabular(),
            &mut r,
        )
        .unwrap();
        assert!(kl_sampling_error(&game, &samples, &joint, &fit).unwrap() <= 0.05);
    }

    #[test]
    fn degenerate_reference_is_rejected() {
        let game = matrix_game("g1").unwrap();
        let joint = constant_joint(&game, [&[60.0, 0.0], &[0.0, 0.0]]);
        let s = game.initial_state();
        let samples = vec![(s, 3)];
        let fit = fit_mle_policy(
            &game,
            &samples,
            FitScope::Joint,
            &MleConfig::tabular(),
            &mut rng(0),
        )
        .unwrap();
        assert!(matches!(
            kl_sampling_error(&game, &samples, &joint, &fit),
            Err(Error::DegenerateSupport { .. })
        ));
    }

    #[test]
    fn success_rate_examples() {
        let game = matrix_game("g1").unwrap();
        let mut r = rng(0);
        let optimal = constant_joint(&game, [&[50.0, 0.0], &[50.0, 0.0]]);
        assert_eq!(success_rate(&optimal, &game, 100, &mut r).unwrap(), 1.0);
        let worse = constant_joint(&game, [&[0.0, 50.0], &[0.0, 50.0]]);
        assert_eq!(success_rate(&worse, &game, 100, &mut r).unwrap(), 0.0);
        let uniform = constant_joint(&game, [&[0.0, 0.0], &[0.0, 0.0]]);
        let rate = success_rate(&uniform, &game, 100, &mut r).unwrap();
        assert!((rate - 0.25).abs() < 0.1, "{rate}");
    }

    #[test]
    fn gridworld_success_rate_matches_visitation() {
        let game = gridworld();
        let joint = JointTargetPolicy::init(&game, &mut rng(4)).unwrap();
        let rate = success_rate(&joint, &game, 100, &mut rng(5)).unwrap();
        assert!((0.0..=1.0).contains(&rate));
        let d = true_visitation(
            &game,
            |s| joint.joint_dist(&game, s).unwrap(),
            DEFAULT_STATE_CAP,
        )
        .unwrap();
        assert!((d.total() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn bootstrap_examples() {
        let mut r = rng(0);
        assert_eq!(
            bootstrap_ci(&[2.5; 10], 0.95, 1000, &mut r).unwrap(),
            (2.5, 2.5)
        );
        let xs: Vec<f64> = (0..1000).map(|_| StandardNormal.sample(&mut r)).collect();
        let (lo, hi) = bootstrap_ci(&xs, 0.95, 1000, &mut r).unwrap();
        assert!(lo <= mean(&xs) && mean(&xs) <= hi);
        assert!(hi - lo > 0.10 && hi - lo < 0.16, "{}", hi - lo);
        assert!(bootstrap_ci(&[], 0.95, 1000, &mut r).is_err());
    }

    #[test]
    fn tabular_kl_closed_form() {
        let kl = tabular_kl(&[1, 1, 0, 0], &[0.25; 4]).unwrap();
        assert!((kl - 2f64.ln()).abs() < 1e-15);
    }
}
