use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::behavior::BehaviorUpdateConfig;
use crate::envs::GameSpec;
use crate::error::{Error, Result};
use crate::metrics::MleConfig;
use crate::policy::SamplerMode;
use crate::ppo::{Algorithm, PpoConfig};

/// What a run does with its samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunKind {
    /// Interleaved collection, behavior updates and target updates.
    Train,
    /// Fixed random target policies; sampling error at checkpoints.
    SampleError,
}

impl RunKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunKind::Train => "train",
            RunKind::SampleError => "sample-error",
        }
    }
}

impl FromStr for RunKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(RunKind::Train),
            "sample-error" => Ok(RunKind::SampleError),
            _ => Err(Error::invalid(format!("unknown run kind {s:?}"))),
        }
    }
}

/// How KL sampling error fits the empirical policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KlFit {
    Tabular,
    Network,
}

impl FromStr for KlFit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tabular" => Ok(KlFit::Tabular),
            "network" => Ok(KlFit::Network),
            _ => Err(Error::invalid(format!(
                "unknown kl fit {s:?} (expected tabular, network)"
            ))),
        }
    }
}

impl KlFit {
    pub fn as_str(&self) -> &'static str {
        match self {
            KlFit::Tabular => "tabular",
            KlFit::Network => "network",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: RunKind,
    pub game: String,
    pub algorithm: Algorithm,
    pub sampler: SamplerMode,
    pub seed: u64,
    /// Environment steps to train for, or the sample budget.
    pub steps: u64,
    pub eval_interval: u64,
    pub eval_episodes: usize,
    /// Sampling-error metrics every this many steps (0 disables them). Must be
    /// a multiple of the target batch size for training runs.
    pub metric_interval: u64,
    /// Sample counts at which a sampling-error run records metrics.
    pub checkpoints: Vec<u64>,
    pub kl_fit: KlFit,
    pub ppo: PpoConfig,
    pub behavior: BehaviorUpdateConfig,
    pub mle: MleConfig,
}

/// Per-game (target batch, target lr, behavior lr) from the tuned table.
fn tuned(game: &GameSpec) -> (usize, f64, f64) {
    match game.id.as_str() {
        "lbf" => (2048, 0.01, 0.03),
        "boulderpush" => (4096, 0.003, 0.03),
        "gridworld" => (256, 0.01, 0.3),
        _ if game.joint_actions().size() > 4 => (45, 0.1, 0.3),
        _ => (20, 0.1, 0.03),
    }
}

pub fn default_steps(game: &GameSpec) -> u64 {
    match game.id.as_str() {
        "gridworld" => 50_000,
        "boulderpush" | "lbf" => 100_000,
        _ => 20_000,
    }
}

pub const DEFAULT_CHECKPOINTS: [u64; 7] = [64, 128, 256, 512, 1024, 2048, 4096];

impl ExperimentConfig {
    /// Defaults for `game`, with the tuned batch sizes and learning rates.
    pub fn for_game(game_id: &str) -> Result<Self> {
        let game = GameSpec::by_id(game_id)?;
        let (n, lr, behavior_lr) = tuned(&game);
        let exact = game.is_matrix() || game.id == "gridworld";
        Ok(ExperimentConfig {
            kind: RunKind::Train,
            game: game.id.clone(),
            algorithm: Algorithm::Mappo,
            sampler: SamplerMode::MaProps,
            seed: 0,
            steps: default_steps(&game),
            eval_interval: n as u64,
            eval_episodes: 100,
            metric_interval: n as u64,
            checkpoints: DEFAULT_CHECKPOINTS.to_vec(),
            kl_fit: if exact {
                KlFit::Tabular
            } else {
                KlFit::Network
            },
            ppo: PpoConfig {
                batch_size: n,
                lr,
                ..PpoConfig::default()
            },
            behavior: BehaviorUpdateConfig {
                lr: behavior_lr,
                ..BehaviorUpdateConfig::default()
            },
            mle: MleConfig::default(),
        })
    }

    pub fn game_spec(&self) -> Result<GameSpec> {
        GameSpec::by_id(&self.game)
    }

    pub fn validate(&self) -> Result<()> {
        self.game_spec()?;
        self.ppo.validate()?;
        self.behavior.validate()?;
        let (n, m) = (self.ppo.batch_size, self.behavior.batch_size);
        if self.kind == RunKind::Train && (m > n || n % m != 0) {
            return Err(Error::invalid(format!(
                "behavior batch {m} must divide target batch {n}"
            )));
        }
        if self.steps == 0 {
            return Err(Error::invalid("steps must be positive"));
        }
        if self.eval_interval == 0 || self.eval_episodes == 0 {
            return Err(Error::invalid(
                "evaluation interval and episodes must be positive",
            ));
        }
        if self.kind == RunKind::Train
            && self.metric_interval > 0
            && self.metric_interval % n as u64 != 0
        {
            return Err(Error::invalid(
                "metric interval must be a multiple of the target batch",
            ));
        }
        if self.kind == RunKind::SampleError {
            if self.checkpoints.is_empty() {
                return Err(Error::invalid("at least one checkpoint required"));
            }
            if self.checkpoints.windows(2).any(|w| w[0] >= w[1])
                || self.checkpoints[0] == 0
                || *self.checkpoints.last().unwrap() > self.steps
            {
                return Err(Error::invalid(
                    "checkpoints must be strictly increasing, positive and within the budget",
                ));
            }
        }
        Ok(())
    }

    /// Every key with its current value, in file order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let p = &self.ppo;
        let b = &self.behavior;
        let checkpoints: Vec<String> = self.checkpoints.iter().map(u64::to_string).collect();
        vec![
            ("game", self.game.clone()),
            ("kind", self.kind.as_str().into()),
            ("algo", self.algorithm.as_str().into()),
            ("sampler", self.sampler.as_str().into()),
            ("seed", self.seed.to_string()),
            ("steps", self.steps.to_string()),
            ("eval_interval", self.eval_interval.to_string()),
            ("eval_episodes", self.eval_episodes.to_string()),
            ("metric_interval", self.metric_interval.to_string()),
            ("checkpoints", checkpoints.join(",")),
            ("kl_fit", self.kl_fit.as_str().into()),
            ("batch_size", p.batch_size.to_string()),
            ("lr", p.lr.to_string()),
            ("epochs", p.n_epochs.to_string()),
            ("minibatches", p.n_minibatches.to_string()),
            ("gamma", p.gamma.to_string()),
            ("gae_lambda", p.gae_lambda.to_string()),
            ("clip", p.clip.to_string()),
            ("entropy_coef", p.entropy_coef.to_string()),
            ("vf_coef", p.vf_coef.to_string()),
            ("max_grad_norm", p.max_grad_norm.to_string()),
            ("normalize_advantages", p.normalize_advantages.to_string()),
            ("behavior_lr", b.lr.to_string()),
            ("behavior_clip", b.clip.to_string()),
            ("behavior_kl", b.target_kl.to_string()),
            ("behavior_epochs", b.n_epoch.to_string()),
            ("behavior_minibatches", b.n_minibatch.to_string()),
            ("behavior_batch", b.batch_size.to_string()),
            ("mle_epochs", self.mle.epochs.to_string()),
            ("mle_lr", self.mle.lr.to_string()),
            ("mle_minibatch", self.mle.minibatch_size.to_string()),
            ("mle_tolerance", self.mle.tolerance.to_string()),
        ]
    }

    pub fn keys() -> Vec<&'static str> {
        Self::for_game("g1")
            .expect("g1 exists")
            .entries()
            .into_iter()
            .map(|(k, _)| k)
            .collect()
    }

    /// Sets one key from its text form. `game` cannot be changed this way
    /// because it selects the defaults.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T>
        where
            T::Err: Display,
        {
            v.parse()
                .map_err(|e| Error::invalid(format!("bad value {v:?} for {key}: {e}")))
        }
        let v = value.trim();
        match key {
            "game" => {
                if v != self.game {
                    return Err(Error::invalid("game must be chosen before other keys"));
                }
            }
            "kind" => self.kind = v.parse()?,
            "algo" => self.algorithm = v.parse()?,
            "sampler" => self.sampler = v.parse()?,
            "seed" => self.seed = num(key, v)?,
            "steps" => self.steps = num(key, v)?,
            "eval_interval" => self.eval_interval = num(key, v)?,
            "eval_episodes" => self.eval_episodes = num(key, v)?,
            "metric_interval" => self.metric_interval = num(key, v)?,
            "checkpoints" => self.checkpoints = parse_checkpoints(v)?,
            "kl_fit" => self.kl_fit = v.parse()?,
            "batch_size" => self.ppo.batch_size = num(key, v)?,
            "lr" => self.ppo.lr = num(key, v)?,
            "epochs" => self.ppo.n_epochs = num(key, v)?,
            "minibatches" => self.ppo.n_minibatches = num(key, v)?,
            "gamma" => self.ppo.gamma = num(key, v)?,
            "gae_lambda" => self.ppo.gae_lambda = num(key, v)?,
            "clip" => self.ppo.clip = num(key, v)?,
            "entropy_coef" => self.ppo.entropy_coef = num(key, v)?,
            "vf_coef" => self.ppo.vf_coef = num(key, v)?,
            "max_grad_norm" => self.ppo.max_grad_norm = num(key, v)?,
            "normalize_advantages" => self.ppo.normalize_advantages = num(key, v)?,
            "behavior_lr" => self.behavior.lr = num(key, v)?,
            "behavior_clip" => self.behavior.clip = num(key, v)?,
            "behavior_kl" => self.behavior.target_kl = num(key, v)?,
            "behavior_epochs" => self.behavior.n_epoch = num(key, v)?,
            "behavior_minibatches" => self.behavior.n_minibatch = num(key, v)?,
            "behavior_batch" => self.behavior.batch_size = num(key, v)?,
            "mle_epochs" => self.mle.epochs = num(key, v)?,
            "mle_lr" => self.mle.lr = num(key, v)?,
            "mle_minibatch" => self.mle.minibatch_size = num(key, v)?,
            "mle_tolerance" => self.mle.tolerance = num(key, v)?,
            _ => return Err(Error::invalid(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// Parses `key = value` lines. Blank lines and `#` comments are skipped;
    /// `game` must be present and keys may not repeat.
    pub fn from_text(text: &str, file: &Path) -> Result<Self> {
        let pairs = parse_pairs(text, file)?;
        let (game_line, _, game) = pairs
            .iter()
            .find(|(_, k, _)| k == "game")
            .ok_or_else(|| Error::parse(file, 1, "missing `game` key"))?;
        let mut cfg =
            Self::for_game(game).map_err(|e| Error::parse(file, *game_line, e.to_string()))?;
        cfg.apply_pairs(&pairs, file)?;
        Ok(cfg)
    }

    /// Applies `(line, key, value)` entries, reporting failures against `file`.
    pub fn apply_pairs(&mut self, pairs: &[(usize, String, String)], file: &Path) -> Result<()> {
        for (line, k, v) in pairs {
            self.set(k, v)
                .map_err(|e| Error::parse(file, *line, e.to_string()))?;
        }
        Ok(())
    }
}

/// Splits flat `key = value` text into entries with their line numbers.
/// Blank lines and `#` comments are skipped; duplicate keys are rejected.
pub fn parse_pairs(text: &str, file: &Path) -> Result<Vec<(usize, String, String)>> {
    let mut pairs: Vec<(usize, String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(file, i + 1, "expected `key = value`"))?;
        let k = k.trim();
        if pairs.iter().any(|(_, key, _)| key == k) {
            return Err(Error::parse(file, i + 1, format!("duplicate key {k:?}")));
        }
        pairs.push((i + 1, k.to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

pub fn parse_checkpoints(v: &str) -> Result<Vec<u64>> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| Error::invalid(format!("bad checkpoint {x:?}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tuned_defaults() {
        let c = ExperimentConfig::for_game("g19").unwrap();
        assert_eq!(
            (
                c.ppo.batch_size,
                c.ppo.lr,
                c.behavior.lr,
                c.behavior.batch_size
            ),
            (20, 0.1, 0.03, 1)
        );
        let c = ExperimentConfig::for_game("climbing").unwrap();
        assert_eq!((c.ppo.batch_size, c.ppo.lr, c.behavior.lr), (45, 0.1, 0.3));
        let c = ExperimentConfig::for_game("gridworld").unwrap();
        assert_eq!(
            (c.ppo.batch_size, c.ppo.lr, c.behavior.lr, c.steps),
            (256, 0.01, 0.3, 50_000)
        );
        let c = ExperimentConfig::for_game("boulderpush").unwrap();
        assert_eq!(
            (c.ppo.batch_size, c.ppo.lr, c.behavior.lr, c.steps),
            (4096, 0.003, 0.03, 100_000)
        );
        let c = ExperimentConfig::for_game("lbf").unwrap();
        assert_eq!(
            (c.ppo.batch_size, c.ppo.lr, c.behavior.lr, c.kl_fit),
            (2048, 0.01, 0.03, KlFit::Network)
        );
        assert_eq!(c.behavior.target_kl, 6.0);
    }

    #[test]
    fn text_round_trip() {
        let mut c = ExperimentConfig::for_game("penalty").unwrap();
        c.seed = 17;
        c.ppo.lr = 0.1 + 0.2;
        c.sampler = SamplerMode::Props;
        c.checkpoints = vec![3, 9];
        let back = ExperimentConfig::from_text(&c.to_text(), Path::new("config")).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_and_malformed_keys() {
        let p = Path::new("cfg");
        let err = ExperimentConfig::from_text("game = g1\nlearning_rate = 3\n", p).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = ExperimentConfig::from_text("game = g1\nseed: 3\n", p).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = ExperimentConfig::from_text("seed = 3\n", p).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        let err = ExperimentConfig::from_text("game = g1\nseed = x\n", p).unwrap_err();
        assert!(err.to_string().starts_with("cfg:2:"), "{err}");
    }

    #[test]
    fn validation() {
        let mut c = ExperimentConfig::for_game("g1").unwrap();
        c.behavior.batch_size = 3;
        assert!(c.validate().is_err());
        c.behavior.batch_size = 4;
        assert!(c.validate().is_ok());
        c.metric_interval = 30;
        assert!(c.validate().is_err());
        let mut s = ExperimentConfig::for_game("g1").unwrap();
        s.kind = RunKind::SampleError;
        s.steps = 4096;
        assert!(s.validate().is_ok());
        s.checkpoints = vec![64, 32];
        assert!(s.validate().is_err());
    }
}
