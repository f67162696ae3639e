//! Training and sampling-error experiments, seeding and run directories.

pub mod config;
pub mod persist;
pub mod summary;

use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::behavior::update_behavior;
use crate::envs::{
    true_visitation, GameSpec, JointState, VisitationDistribution, DEFAULT_STATE_CAP,
};
use crate::error::{Error, Result};
use crate::metrics::{
    fit_mle_policy, kl_sampling_error, success_rate, tv_distance, FitScope, MetricsRow, MleConfig,
};
use crate::policy::{
    init_behavior, sample_with_features, BehaviorPolicy, JointTargetPolicy, SamplerMode,
    TargetCache,
};
use crate::ppo::{ppo_update, BufferedTransition, Learner, TransitionBuffer, UpdateStats};

pub use config::{ExperimentConfig, KlFit, RunKind};
pub use persist::{load_run, persist};

/// Independent random streams derived from one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Env = 1,
    PolicyInit,
    BehaviorInit,
    Sampling,
    Shuffle,
    Evaluation,
    Bootstrap,
    Shadow,
    MetricFit,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub rows: Vec<MetricsRow>,
    /// Metrics of the on-policy comparison buffer, when one was kept.
    pub shadow_rows: Option<Vec<MetricsRow>>,
    pub duration_secs: f64,
    /// Final actor parameters per agent, followed by critic parameters when
    /// the run trained.
    pub params: Vec<Vec<f64>>,
}

/// Something that happened inside [`run_training_with`].
pub enum TrainEvent<'a> {
    BehaviorUpdated {
        step: u64,
    },
    /// After the target update and the behavior re-initialization.
    TargetUpdated {
        step: u64,
        stats: &'a UpdateStats,
        joint: &'a JointTargetPolicy,
        behavior: &'a BehaviorPolicy,
    },
}

/// Exact joint visitation under `joint`, for games small enough to enumerate.
pub fn exact_visitation(
    game: &GameSpec,
    joint: &JointTargetPolicy,
) -> Result<Option<VisitationDistribution>> {
    if !(game.is_matrix() || game.id == "gridworld") {
        return Ok(None);
    }
    let k = game.joint_actions().size();
    let truth = true_visitation(
        game,
        |s| {
            joint
                .joint_dist(game, s)
                .unwrap_or_else(|_| vec![f64::NAN; k])
        },
        DEFAULT_STATE_CAP,
    )?;
    Ok(Some(truth))
}

fn mle_config(cfg: &ExperimentConfig) -> MleConfig {
    MleConfig {
        mirror_architecture: cfg.kl_fit == KlFit::Network,
        ..cfg.mle.clone()
    }
}

/// Fills the sampling-error columns of `row` for `samples` collected under `joint`.
pub fn measure_sampling_error(
    row: &mut MetricsRow,
    game: &GameSpec,
    joint: &JointTargetPolicy,
    truth: Option<&VisitationDistribution>,
    samples: &[(JointState, usize)],
    cfg: &ExperimentConfig,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    if let Some(truth) = truth {
        let emp =
            VisitationDistribution::empirical(game.joint_actions().size(), samples.iter().copied());
        let tv = tv_distance(&emp, truth)?;
        if !tv.is_finite() {
            return Err(Error::Numeric {
                layer: 0,
                context: "target distribution while measuring TV".into(),
            });
        }
        row.tv_joint = Some(tv);
    }
    let mle = mle_config(cfg);
    let fitted = fit_mle_policy(game, samples, FitScope::Joint, &mle, rng)?;
    row.kl_joint = kl_or_missing(kl_sampling_error(game, samples, joint, &fitted))?;
    row.kl_agent = (0..game.n_agents())
        .map(|i| {
            let fitted = fit_mle_policy(game, samples, FitScope::Agent(i), &mle, rng)?;
            kl_or_missing(kl_sampling_error(game, samples, joint, &fitted))
        })
        .collect::<Result<_>>()?;
    Ok(())
}

/// A KL estimate, or nothing when a sample has (numerically) zero reference
/// probability and the divergence is unbounded.
fn kl_or_missing(kl: Result<f64>) -> Result<Option<f64>> {
    match kl {
        Ok(v) => Ok(Some(v)),
        Err(Error::DegenerateSupport { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// One environment instance with its episode clock.
struct Episode {
    state: JointState,
    t: usize,
}

impl Episode {
    fn new(game: &GameSpec) -> Self {
        Episode {
            state: game.initial_state(),
            t: 0,
        }
    }

    fn advance(&mut self, game: &GameSpec, next: JointState, done: bool) {
        if done {
            *self = Episode::new(game);
        } else {
            self.state = next;
            self.t += 1;
        }
    }
}

/// On-policy samples collected alongside training for comparison.
struct Shadow {
    episode: Episode,
    samples: Vec<(JointState, usize)>,
    rng: ChaCha8Rng,
}

impl Shadow {
    fn step(
        &mut self,
        game: &GameSpec,
        joint: &JointTargetPolicy,
        cache: &mut TargetCache,
    ) -> Result<()> {
        let f = cache.get(game, joint, self.episode.state)?;
        let s = sample_with_features(&BehaviorPolicy::OnPolicy, game, &f, &mut self.rng)?;
        let r = game.step(
            self.episode.state,
            self.episode.t,
            &s.actions,
            &mut self.rng,
        )?;
        self.samples.push((self.episode.state, s.joint_action));
        self.episode.advance(game, r.next, r.done());
        Ok(())
    }
}

fn has_values(row: &MetricsRow) -> bool {
    row.success_rate.is_some() || row.tv_joint.is_some() || row.kl_joint.is_some()
}

pub fn run_training(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<RunRecord> {
    run_training_with(cfg, out, |_| {})
}

/// Collects with the behavior policy, updating it every `behavior.batch_size`
/// steps and the targets every `ppo.batch_size` steps.
pub fn run_training_with<F>(
    cfg: &ExperimentConfig,
    out: Option<&Path>,
    mut observe: F,
) -> Result<RunRecord>
where
    F: FnMut(TrainEvent<'_>),
{
    cfg.validate()?;
    let start = Instant::now();
    let game = cfg.game_spec()?;
    let seed = cfg.seed;
    let mut env_rng = stream_rng(seed, Stream::Env);
    let mut binit_rng = stream_rng(seed, Stream::BehaviorInit);
    let mut sample_rng = stream_rng(seed, Stream::Sampling);
    let mut shuffle_rng = stream_rng(seed, Stream::Shuffle);
    let mut eval_rng = stream_rng(seed, Stream::Evaluation);
    let mut fit_rng = stream_rng(seed, Stream::MetricFit);

    let mut learner = Learner::new(
        &game,
        cfg.algorithm,
        cfg.ppo.clone(),
        &mut stream_rng(seed, Stream::PolicyInit),
    )?;
    let mut cache = TargetCache::new();
    let mut behavior = init_behavior(cfg.sampler, &learner.joint, &game, &mut binit_rng)?;
    let mut buffer = TransitionBuffer::new(cfg.ppo.batch_size);
    let mut episode = Episode::new(&game);
    let metrics_on = cfg.metric_interval > 0;
    let mut shadow = (metrics_on && cfg.sampler != SamplerMode::OnPolicy).then(|| Shadow {
        episode: Episode::new(&game),
        samples: Vec::new(),
        rng: stream_rng(seed, Stream::Shadow),
    });
    let mut writer = match out {
        Some(dir) => Some(persist::RunWriter::create(dir, cfg, shadow.is_some())?),
        None => None,
    };
    let mut rows = Vec::new();
    let mut shadow_rows = shadow.as_ref().map(|_| Vec::new());
    let m = cfg.behavior.batch_size as u64;

    for step in 1..=cfg.steps {
        let mut body = || -> Result<()> {
            let f = cache.get(&game, &learner.joint, episode.state)?;
            let s = sample_with_features(&behavior, &game, &f, &mut sample_rng)?;
            let r = game.step(episode.state, episode.t, &s.actions, &mut env_rng)?;
            buffer.push(BufferedTransition {
                state: episode.state,
                joint_action: s.joint_action,
                actions: s.actions,
                target_log_probs: s.target_log_probs,
                rewards: r.rewards.clone(),
                next_state: r.next,
                terminal: r.terminal,
                truncated: r.truncated,
            })?;
            episode.advance(&game, r.next, r.done());
            if let Some(sh) = &mut shadow {
                sh.step(&game, &learner.joint, &mut cache)?;
            }

            if step % m == 0 {
                behavior = update_behavior(
                    cfg.sampler,
                    &learner.joint,
                    &game,
                    &buffer.state_actions(),
                    &cfg.behavior,
                    &mut cache,
                    &mut binit_rng,
                    &mut shuffle_rng,
                )?;
                observe(TrainEvent::BehaviorUpdated { step });
            }

            let mut row = MetricsRow::new(step, seed);
            if buffer.is_full() {
                if metrics_on && step % cfg.metric_interval == 0 {
                    let truth = exact_visitation(&game, &learner.joint)?;
                    let samples = buffer.state_actions();
                    measure_sampling_error(
                        &mut row,
                        &game,
                        &learner.joint,
                        truth.as_ref(),
                        &samples,
                        cfg,
                        &mut fit_rng,
                    )?;
                    if let Some(sh) = &shadow {
                        let mut srow = MetricsRow::new(step, seed);
                        measure_sampling_error(
                            &mut srow,
                            &game,
                            &learner.joint,
                            truth.as_ref(),
                            &sh.samples,
                            cfg,
                            &mut fit_rng,
                        )?;
                        if let Some(w) = &mut writer {
                            w.shadow_row(&srow)?;
                        }
                        shadow_rows.as_mut().unwrap().push(srow);
                    }
                }
                let stats = ppo_update(&mut learner, &game, &mut buffer, &mut shuffle_rng)?;
                cache.clear();
                behavior = init_behavior(cfg.sampler, &learner.joint, &game, &mut binit_rng)?;
                if let Some(sh) = &mut shadow {
                    sh.samples.clear();
                }
                observe(TrainEvent::TargetUpdated {
                    step,
                    stats: &stats,
                    joint: &learner.joint,
                    behavior: &behavior,
                });
            }
            if step % cfg.eval_interval == 0 || step == cfg.steps {
                row.success_rate = Some(success_rate(
                    &learner.joint,
                    &game,
                    cfg.eval_episodes,
                    &mut eval_rng,
                )?);
            }
            if has_values(&row) {
                if let Some(w) = &mut writer {
                    w.row(&row)?;
                }
                rows.push(row);
            }
            Ok(())
        };
        body().map_err(|e| Error::Run {
            step,
            source: Box::new(e),
        })?;
    }

    let mut params: Vec<Vec<f64>> = learner
        .joint
        .agents
        .iter()
        .map(|a| a.net.params.as_slice().to_vec())
        .collect();
    params.extend(
        learner
            .critics
            .iter()
            .map(|c| c.net.params.as_slice().to_vec()),
    );
    let duration_secs = start.elapsed().as_secs_f64();
    if let Some(w) = writer {
        w.finish(duration_secs, &params)?;
    }
    Ok(RunRecord {
        config: cfg.clone(),
        seed,
        rows,
        shadow_rows,
        duration_secs,
        params,
    })
}

/// Holds random target policies fixed and records sampling error at each
/// checkpoint while the configured sampler collects `steps` samples.
pub fn run_sampling_error(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<RunRecord> {
    let mut cfg = cfg.clone();
    cfg.kind = RunKind::SampleError;
    cfg.validate()?;
    let start = Instant::now();
    let game = cfg.game_spec()?;
    let seed = cfg.seed;
    let mut env_rng = stream_rng(seed, Stream::Env);
    let mut binit_rng = stream_rng(seed, Stream::BehaviorInit);
    let mut sample_rng = stream_rng(seed, Stream::Sampling);
    let mut shuffle_rng = stream_rng(seed, Stream::Shuffle);
    let mut fit_rng = stream_rng(seed, Stream::MetricFit);

    let joint = JointTargetPolicy::init(&game, &mut stream_rng(seed, Stream::PolicyInit))?;
    let truth = exact_visitation(&game, &joint)?;
    let mut cache = TargetCache::new();
    let mut behavior = init_behavior(cfg.sampler, &joint, &game, &mut binit_rng)?;
    let mut episode = Episode::new(&game);
    let mut samples: Vec<(JointState, usize)> = Vec::with_capacity(cfg.steps as usize);
    let mut writer = match out {
        Some(dir) => Some(persist::RunWriter::create(dir, &cfg, false)?),
        None => None,
    };
    let mut rows = Vec::new();
    let mut next_checkpoint = cfg.checkpoints.iter().copied().peekable();
    let m = cfg.behavior.batch_size as u64;

    for step in 1..=cfg.steps {
        let mut body = || -> Result<()> {
            let f = cache.get(&game, &joint, episode.state)?;
            let s = sample_with_features(&behavior, &game, &f, &mut sample_rng)?;
            let r = game.step(episode.state, episode.t, &s.actions, &mut env_rng)?;
            samples.push((episode.state, s.joint_action));
            episode.advance(&game, r.next, r.done());
            if next_checkpoint.peek() == Some(&step) {
                next_checkpoint.next();
                let mut row = MetricsRow::new(step, seed);
                measure_sampling_error(
                    &mut row,
                    &game,
                    &joint,
                    truth.as_ref(),
                    &samples,
                    &cfg,
                    &mut fit_rng,
                )?;
                if let Some(w) = &mut writer {
                    w.row(&row)?;
                }
                rows.push(row);
            }
            if step % m == 0 && step < cfg.steps {
                behavior = update_behavior(
                    cfg.sampler,
                    &joint,
                    &game,
                    &samples,
                    &cfg.behavior,
                    &mut cache,
                    &mut binit_rng,
                    &mut shuffle_rng,
                )?;
            }
            Ok(())
        };
        body().map_err(|e| Error::Run {
            step,
            source: Box::new(e),
        })?;
    }

    let params: Vec<Vec<f64>> = joint
        .agents
        .iter()
        .map(|a| a.net.params.as_slice().to_vec())
        .collect();
    let duration_secs = start.elapsed().as_secs_f64();
    if let Some(w) = writer {
        w.finish(duration_secs, &params)?;
    }
    Ok(RunRecord {
        config: cfg,
        seed,
        rows,
        shadow_rows: None,
        duration_secs,
        params,
    })
}

/// Dispatches on the configured run kind.
pub fn run(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<RunRecord> {
    match cfg.kind {
        RunKind::Train => run_training(cfg, out),
        RunKind::SampleError => run_sampling_error(cfg, out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::matrix_game;

    #[test]
    fn unbounded_kl_is_recorded_as_missing() {
        let game = matrix_game("g1").unwrap();
        let mut joint =
            JointTargetPolicy::init(&game, &mut stream_rng(0, Stream::PolicyInit)).unwrap();
        let n = joint.agents[0].net.params.len();
        joint.agents[0].net.params.as_mut_slice()[n - 2] = 100.0;
        let cfg = ExperimentConfig::for_game("g1").unwrap();
        let truth = exact_visitation(&game, &joint).unwrap();
        let s = game.initial_state();
        let mut row = MetricsRow::new(1, 0);
        measure_sampling_error(
            &mut row,
            &game,
            &joint,
            truth.as_ref(),
            &[(s, 0), (s, 3)],
            &cfg,
            &mut stream_rng(0, Stream::MetricFit),
        )
        .unwrap();
        assert!(row.tv_joint.is_some());
        assert_eq!(row.kl_joint, None);
        assert_eq!(row.kl_agent[0], None);
        assert!(row.kl_agent[1].is_some());
    }
}
