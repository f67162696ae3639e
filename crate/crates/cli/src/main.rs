use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand};
use rayon::prelude::*;

use jointsampler::harness::config::{parse_checkpoints, parse_pairs, DEFAULT_CHECKPOINTS};
use jointsampler::harness::summary::{summarize, write_summary};
use jointsampler::harness::{run, stream_rng, ExperimentConfig, RunKind, RunRecord, Stream};
use jointsampler::plot::{load_series, render_svg, ChartOptions};
use jointsampler::policy::SamplerMode;
use jointsampler::ppo::Algorithm;
use jointsampler::Error;

const OUT_ENV: &str = "JOINTSAMPLER_OUT_DIR";

/// Joint sampling-error experiments for independent multi-agent PPO.
///
/// Any configuration key can also be given as `--key value` (dashes or
/// underscores), e.g. `--lr 0.1 --behavior-batch 1`. Flags override values
/// read from `--config`.
#[derive(Parser, Debug)]
#[command(name = "jointsampler", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug, Clone)]
struct Common {
    /// Game id: g1..g21, intro, climbing, penalty, gridworld, boulderpush, lbf.
    #[arg(long)]
    game: Option<String>,
    /// mappo (centralized critic) or ippo.
    #[arg(long)]
    algo: Option<Algorithm>,
    /// on-policy, props or ma-props.
    #[arg(long)]
    sampler: Option<SamplerMode>,
    #[arg(long)]
    seed: Option<u64>,
    /// Environment steps to run.
    #[arg(long)]
    steps: Option<u64>,
    /// Output directory (default under $JOINTSAMPLER_OUT_DIR, else ./runs).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(clap::Args, Debug, Clone)]
struct Budget {
    /// Number of samples to collect.
    #[arg(long)]
    budget: Option<u64>,
    /// Comma-separated sample counts at which to measure.
    #[arg(long)]
    checkpoints: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train target policies with the chosen sampler.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Measure sampling error under fixed random target policies.
    SampleError {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        budget: Budget,
        /// Number of consecutive seeds, starting at --seed.
        #[arg(long, default_value_t = 10)]
        seeds: u64,
    },
    /// Run several samplers over a seed range concurrently and summarize.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        budget: Budget,
        /// train or sample-error.
        #[arg(long, default_value = "train")]
        kind: RunKind,
        /// Comma-separated samplers.
        #[arg(
            long,
            default_value = "on-policy,props,ma-props",
            value_delimiter = ','
        )]
        samplers: Vec<SamplerMode>,
        /// Seeds per sampler, starting at --seed.
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        /// Parallel runs (default: available cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Draw a metric from metrics.csv or summary.csv files as an SVG chart.
    Plot {
        /// Column to plot, e.g. tv_joint or success_rate.
        #[arg(long)]
        metric: String,
        /// Output SVG file.
        #[arg(long, short)]
        output: PathBuf,
        #[arg(long)]
        title: Option<String>,
        #[arg(long)]
        log_x: bool,
        #[arg(long)]
        log_y: bool,
        /// metrics.csv files of single runs or summary.csv files of sweeps.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn usage(e: impl ToString) -> Self {
        Failure::Usage(e.to_string())
    }

    fn runtime(e: impl ToString) -> Self {
        Failure::Runtime(e.to_string())
    }
}

/// Pulls `--key value` / `--key=value` config overrides out of the argument
/// list, leaving flags that the subcommand declares itself to clap.
fn split_overrides(args: Vec<OsString>) -> (Vec<OsString>, Vec<(String, String)>) {
    let cmd = Cli::command();
    let sub = args
        .get(1)
        .and_then(|a| a.to_str())
        .and_then(|name| cmd.find_subcommand(name));
    let Some(sub) = sub else {
        return (args, Vec::new());
    };
    let declared: Vec<String> = sub
        .get_arguments()
        .filter_map(|a| a.get_long().map(String::from))
        .collect();
    let keys = ExperimentConfig::keys();
    let mut kept = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter().peekable();
    while let Some(arg) = it.next() {
        let Some(flag) = arg.to_str().and_then(|s| s.strip_prefix("--")) else {
            kept.push(arg);
            continue;
        };
        let (name, inline) = match flag.split_once('=') {
            Some((n, v)) => (n.to_string(), Some(v.to_string())),
            None => (flag.to_string(), None),
        };
        let key = name.replace('-', "_");
        if declared.contains(&name) || !keys.contains(&key.as_str()) {
            kept.push(arg);
            continue;
        }
        let value = match inline {
            Some(v) => Some(v),
            None => it.next_if(|_| true).and_then(|v| v.into_string().ok()),
        };
        match value {
            Some(v) => overrides.push((key, v)),
            // leave it for clap to report
            None => kept.push(arg),
        }
    }
    (kept, overrides)
}

fn out_root() -> PathBuf {
    std::env::var_os(OUT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

/// Builds the effective config: game defaults, then the config file, then
/// explicit flags, then `--key value` overrides.
fn build_config(
    common: &Common,
    overrides: &[(String, String)],
) -> Result<ExperimentConfig, Failure> {
    let file_pairs = match &common.config {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| Failure::usage(format!("{}: {e}", p.display())))?;
            Some((p.clone(), parse_pairs(&text, p).map_err(Failure::usage)?))
        }
        None => None,
    };
    let file_game = file_pairs
        .as_ref()
        .and_then(|(_, pairs)| pairs.iter().find(|(_, k, _)| k == "game"))
        .map(|(_, _, v)| v.clone());
    let game = common
        .game
        .clone()
        .or(file_game)
        .ok_or_else(|| Failure::usage("--game is required (or a `game` key in --config)"))?;
    let mut cfg = ExperimentConfig::for_game(&game).map_err(Failure::usage)?;
    if let Some((path, pairs)) = &file_pairs {
        let pairs: Vec<_> = pairs
            .iter()
            .filter(|(_, k, _)| k != "game")
            .cloned()
            .collect();
        cfg.apply_pairs(&pairs, path).map_err(Failure::usage)?;
    }
    if let Some(a) = common.algo {
        cfg.algorithm = a;
    }
    if let Some(s) = common.sampler {
        cfg.sampler = s;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(s) = common.steps {
        cfg.steps = s;
    }
    for (k, v) in overrides {
        cfg.set(k, v)
            .map_err(|e| Failure::usage(format!("--{}: {e}", k.replace('_', "-"))))?;
    }
    Ok(cfg)
}

fn apply_budget(
    cfg: &mut ExperimentConfig,
    b: &Budget,
    explicit_steps: bool,
) -> Result<(), Failure> {
    cfg.kind = RunKind::SampleError;
    if let Some(c) = &b.checkpoints {
        cfg.checkpoints =
            parse_checkpoints(c).map_err(|e| Failure::usage(format!("--checkpoints: {e}")))?;
    }
    let budget = b.budget.or(explicit_steps.then_some(cfg.steps));
    match (budget, b.checkpoints.is_some()) {
        (Some(n), false) => {
            cfg.steps = n;
            let mut c: Vec<u64> = DEFAULT_CHECKPOINTS
                .iter()
                .copied()
                .filter(|&x| x < n)
                .collect();
            c.push(n);
            cfg.checkpoints = c;
        }
        (Some(n), true) => cfg.steps = n,
        (None, _) => cfg.steps = cfg.checkpoints.last().copied().unwrap_or(cfg.steps),
    }
    Ok(())
}

fn validate(cfg: &ExperimentConfig) -> Result<(), Failure> {
    cfg.validate().map_err(Failure::usage)
}

fn run_one(cfg: &ExperimentConfig, dir: &Path) -> Result<RunRecord, Failure> {
    run(cfg, Some(dir)).map_err(|e| Failure::runtime(format!("{}: {e}", dir.display())))
}

fn final_value(r: &RunRecord, kind: RunKind) -> String {
    let last = |f: fn(&jointsampler::metrics::MetricsRow) -> Option<f64>| {
        r.rows
            .iter()
            .rev()
            .find_map(f)
            .map_or("-".into(), |v| format!("{v:.4}"))
    };
    match kind {
        RunKind::Train => format!("success_rate {}", last(|row| row.success_rate)),
        RunKind::SampleError => format!("tv_joint {}", last(|row| row.tv_joint)),
    }
}

fn summarize_runs(
    out: &Path,
    samplers: &[SamplerMode],
    records: &[RunRecord],
    seed: u64,
) -> Result<PathBuf, Failure> {
    let groups: Vec<(String, Vec<Vec<_>>)> = samplers
        .iter()
        .map(|s| {
            let runs = records
                .iter()
                .filter(|r| r.config.sampler == *s)
                .map(|r| r.rows.clone())
                .collect();
            (s.as_str().to_string(), runs)
        })
        .collect();
    let mut rng = stream_rng(seed, Stream::Bootstrap);
    let rows = summarize(&groups, &mut rng).map_err(Failure::runtime)?;
    let path = out.join("summary.csv");
    write_summary(&path, &rows).map_err(Failure::runtime)?;
    Ok(path)
}

fn execute(cli: Cli, overrides: Vec<(String, String)>) -> Result<(), Failure> {
    match cli.command {
        Command::Train { common } => {
            let mut cfg = build_config(&common, &overrides)?;
            cfg.kind = RunKind::Train;
            validate(&cfg)?;
            let dir = common.out.clone().unwrap_or_else(|| {
                out_root().join(format!(
                    "{}-{}-{}-seed{}",
                    cfg.game,
                    cfg.algorithm.as_str(),
                    cfg.sampler.as_str(),
                    cfg.seed
                ))
            });
            let r = run_one(&cfg, &dir)?;
            println!(
                "{} {} seed {}: {} ({:.1}s) -> {}",
                cfg.game,
                cfg.sampler.as_str(),
                cfg.seed,
                final_value(&r, RunKind::Train),
                r.duration_secs,
                dir.display()
            );
        }
        Command::SampleError {
            common,
            budget,
            seeds,
        } => {
            let mut cfg = build_config(&common, &overrides)?;
            apply_budget(&mut cfg, &budget, common.steps.is_some())?;
            validate(&cfg)?;
            if seeds == 0 {
                return Err(Failure::usage("--seeds must be positive"));
            }
            let out = common.out.clone().unwrap_or_else(|| {
                out_root().join(format!(
                    "{}-{}-sample-error",
                    cfg.game,
                    cfg.sampler.as_str()
                ))
            });
            let mut records = Vec::new();
            for seed in cfg.seed..cfg.seed + seeds {
                let mut c = cfg.clone();
                c.seed = seed;
                let r = run_one(&c, &out.join(format!("seed_{seed}")))?;
                println!("seed {seed}: {}", final_value(&r, RunKind::SampleError));
                records.push(r);
            }
            let path = summarize_runs(&out, &[cfg.sampler], &records, cfg.seed)?;
            println!("summary -> {}", path.display());
        }
        Command::Sweep {
            common,
            budget,
            kind,
            samplers,
            seeds,
            jobs,
        } => {
            let mut cfg = build_config(&common, &overrides)?;
            match kind {
                RunKind::Train => cfg.kind = RunKind::Train,
                RunKind::SampleError => apply_budget(&mut cfg, &budget, common.steps.is_some())?,
            }
            validate(&cfg)?;
            if seeds == 0 || samplers.is_empty() {
                return Err(Failure::usage("need at least one seed and one sampler"));
            }
            let mut unique = samplers.clone();
            unique.dedup();
            let out = common.out.clone().unwrap_or_else(|| {
                out_root().join(format!("{}-{}-sweep", cfg.game, kind.as_str()))
            });
            let configs: Vec<ExperimentConfig> = unique
                .iter()
                .flat_map(|&s| {
                    let base = cfg.clone();
                    (cfg.seed..cfg.seed + seeds).map(move |seed| {
                        let mut c = base.clone();
                        c.sampler = s;
                        c.seed = seed;
                        c
                    })
                })
                .collect();
            let threads =
                jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            if threads == 0 {
                return Err(Failure::usage("--jobs must be positive"));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(Failure::runtime)?;
            let records = pool.install(|| {
                configs
                    .par_iter()
                    .map(|c| {
                        let dir = out
                            .join(c.sampler.as_str())
                            .join(format!("seed_{}", c.seed));
                        run_one(c, &dir)
                    })
                    .collect::<Result<Vec<_>, _>>()
            })?;
            for r in &records {
                println!(
                    "{} seed {}: {}",
                    r.config.sampler.as_str(),
                    r.seed,
                    final_value(r, kind)
                );
            }
            let path = summarize_runs(&out, &unique, &records, cfg.seed)?;
            println!("summary -> {}", path.display());
        }
        Command::Plot {
            metric,
            output,
            title,
            log_x,
            log_y,
            inputs,
        } => {
            let mut series = Vec::new();
            for p in &inputs {
                series.extend(load_series(p, &metric).map_err(|e| match e {
                    Error::Io(_) | Error::Csv(_) => Failure::usage(format!("{}: {e}", p.display())),
                    e => Failure::usage(e),
                })?);
            }
            let mut opts = ChartOptions::new(&metric);
            if let Some(t) = title {
                opts.title = t;
            }
            opts.log_x = log_x;
            opts.log_y = log_y;
            let svg = render_svg(&series, &opts).map_err(Failure::usage)?;
            fs::write(&output, svg)
                .map_err(|e| Failure::runtime(format!("{}: {e}", output.display())))?;
            println!("{} series -> {}", series.len(), output.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let (args, overrides) = split_overrides(std::env::args_os().collect());
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match execute(cli, overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nRun `jointsampler --help` for usage.");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
