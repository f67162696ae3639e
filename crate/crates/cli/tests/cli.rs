use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use jointsampler::harness::load_run;
use jointsampler::harness::summary::read_summary;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_jointsampler"));
    c.env_remove("JOINTSAMPLER_OUT_DIR");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn train_writes_full_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("runs/x");
    let o = run(&[
        "train",
        "--game",
        "g19",
        "--algo",
        "mappo",
        "--sampler",
        "ma-props",
        "--seed",
        "7",
        "--steps",
        "200",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "config",
        "metrics.csv",
        "final_params",
        "shadow_metrics.csv",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    let header = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(header.starts_with("step,seed,success_rate,tv_joint,kl_joint,kl_agent_1,kl_agent_2\n"));
    let r = load_run(&out).unwrap();
    assert_eq!(r.seed, 7);
    assert_eq!(r.config.sampler.as_str(), "ma-props");
    assert_eq!(r.rows.last().unwrap().step, 200);
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    for args in [
        vec!["train", "--game", "g99", "--out", s(&out)],
        vec!["train", "--game", "g1", "--no-such-flag", "1"],
        vec!["train", "--game", "g1", "--lr", "fast"],
        vec!["train", "--game", "g1", "--behavior-batch", "3"],
        vec!["train", "--out", s(&out)],
        vec!["sample-error", "--game", "g1", "--checkpoints", "64,32"],
        vec!["sample-error", "--game", "g1", "--checkpoints", "64,x"],
        vec![
            "sample-error",
            "--game",
            "g1",
            "--budget",
            "100",
            "--checkpoints",
            "64,128",
        ],
        vec!["frobnicate"],
    ] {
        let o = run(&args);
        assert_eq!(
            code(&o),
            2,
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    assert!(!out.exists());
}

#[test]
fn explicit_table_values_match_defaults() {
    let dir = tempfile::tempdir().unwrap();
    for (game, flags) in [
        (
            "g19",
            vec![
                "--lr",
                "0.1",
                "--behavior-lr",
                "0.03",
                "--behavior-batch",
                "1",
                "--batch-size",
                "20",
            ],
        ),
        (
            "climbing",
            vec![
                "--lr",
                "0.1",
                "--behavior-lr",
                "0.3",
                "--behavior_batch=1",
                "--batch-size",
                "45",
            ],
        ),
    ] {
        let a = dir.path().join(format!("{game}-default"));
        let b = dir.path().join(format!("{game}-explicit"));
        let base = [
            "train",
            "--game",
            game,
            "--sampler",
            "ma-props",
            "--steps",
            "90",
        ];
        assert_eq!(code(&run(&[&base[..], &["--out", s(&a)]].concat())), 0);
        assert_eq!(
            code(&run(&[&base[..], &flags[..], &["--out", s(&b)]].concat())),
            0
        );
        for f in ["config", "metrics.csv", "shadow_metrics.csv"] {
            assert_eq!(
                fs::read(a.join(f)).unwrap(),
                fs::read(b.join(f)).unwrap(),
                "{game} {f}"
            );
        }
    }
}

#[test]
fn config_file_is_read_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    fs::write(
        &cfg,
        "# small run\ngame = g2\nsteps = 60\nseed = 3\neval_interval = 20\n",
    )
    .unwrap();
    let out = dir.path().join("r");
    let o = run(&[
        "train",
        "--config",
        s(&cfg),
        "--seed",
        "5",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = load_run(&out).unwrap();
    assert_eq!(r.config.game, "g2");
    assert_eq!(r.config.steps, 60);
    assert_eq!(r.config.eval_interval, 20);
    assert_eq!(r.seed, 5);

    // the snapshot reproduces the run
    let again = dir.path().join("again");
    let snap = out.join("config");
    assert_eq!(
        code(&run(&["train", "--config", s(&snap), "--out", s(&again)])),
        0
    );
    assert_eq!(
        fs::read(out.join("metrics.csv")).unwrap(),
        fs::read(again.join("metrics.csv")).unwrap()
    );

    fs::write(&cfg, "game = g2\nsteps = 60\nwarp = 9\n").unwrap();
    let o = run(&[
        "train",
        "--config",
        s(&cfg),
        "--out",
        s(&dir.path().join("bad")),
    ]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("exp.cfg:3"));
}

#[test]
fn out_dir_defaults_to_env_root() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .env("JOINTSAMPLER_OUT_DIR", dir.path())
        .args(["train", "--game", "g1", "--steps", "40", "--seed", "2"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(dir
        .path()
        .join("g1-mappo-ma-props-seed2/metrics.csv")
        .exists());
}

#[test]
fn sample_error_defaults_to_ten_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("se");
    let o = run(&[
        "sample-error",
        "--game",
        "g1",
        "--sampler",
        "on-policy",
        "--budget",
        "128",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let seeds = fs::read_dir(&out)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .starts_with("seed_")
        })
        .count();
    assert_eq!(seeds, 10);
    let r = load_run(&out.join("seed_4")).unwrap();
    let steps: Vec<u64> = r.rows.iter().map(|x| x.step).collect();
    assert_eq!(steps, vec![64, 128]);
    assert!(r
        .rows
        .iter()
        .all(|x| x.tv_joint.is_some() && x.success_rate.is_none()));
}

#[test]
fn sweep_runs_every_pair_and_summary_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = |name: &str| {
        let out = dir.path().join(name);
        let o = run(&[
            "sweep",
            "--game",
            "climbing",
            "--kind",
            "sample-error",
            "--checkpoints",
            "45,90",
            "--seeds",
            "2",
            "--jobs",
            "2",
            "--out",
            s(&out),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let a = sweep("a");
    for sampler in ["on-policy", "props", "ma-props"] {
        for seed in 0..2 {
            assert!(a
                .join(format!("{sampler}/seed_{seed}/metrics.csv"))
                .exists());
        }
    }
    let rows = read_summary(&a.join("summary.csv")).unwrap();
    assert_eq!(rows.len(), 6);
    for r in &rows {
        let tv = r.metrics[1].unwrap();
        assert_eq!(tv.n, 2);
        assert!(tv.lo <= tv.mean && tv.mean <= tv.hi, "{r:?}");
    }
    let b = sweep("b");
    assert_eq!(
        fs::read(a.join("summary.csv")).unwrap(),
        fs::read(b.join("summary.csv")).unwrap()
    );
}

fn svg_series(path: &Path) -> Vec<(String, usize, usize)> {
    let text = fs::read_to_string(path).unwrap();
    assert!(!text.contains("href"), "external reference");
    let doc = roxmltree::Document::parse(&text).unwrap();
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    doc.descendants()
        .filter(|n| n.attribute("class") == Some("series"))
        .map(|g| {
            let count = |tag: &str| g.children().filter(|c| c.tag_name().name() == tag).count();
            (
                g.attribute("data-label").unwrap().to_string(),
                count("polyline"),
                count("polygon"),
            )
        })
        .collect()
}

#[test]
fn plot_emits_well_formed_svg() {
    let dir = tempfile::tempdir().unwrap();
    let r = dir.path().join("run");
    assert_eq!(
        code(&run(&[
            "train",
            "--game",
            "g1",
            "--steps",
            "100",
            "--out",
            s(&r)
        ])),
        0
    );
    let single = dir.path().join("single.svg");
    let o = run(&[
        "plot",
        "--metric",
        "tv_joint",
        "-o",
        s(&single),
        s(&r.join("metrics.csv")),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        svg_series(&single),
        vec![("ma-props seed 0".to_string(), 1, 0)]
    );

    let sw = dir.path().join("sw");
    assert_eq!(
        code(&run(&[
            "sweep",
            "--game",
            "g1",
            "--kind",
            "sample-error",
            "--budget",
            "128",
            "--seeds",
            "2",
            "--samplers",
            "on-policy,ma-props",
            "--out",
            s(&sw),
        ])),
        0
    );
    let two = dir.path().join("two.svg");
    let o = run(&[
        "plot",
        "--metric",
        "kl_joint",
        "--log-y",
        "--title",
        "KL <joint>",
        "-o",
        s(&two),
        s(&sw.join("summary.csv")),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        svg_series(&two),
        vec![
            ("on-policy".to_string(), 1, 1),
            ("ma-props".to_string(), 1, 1)
        ]
    );

    let odd = dir.path().join("odd.csv");
    fs::write(&odd, "step,seed,reward\n1,0,2.0\n").unwrap();
    let o = run(&[
        "plot",
        "--metric",
        "tv_joint",
        "-o",
        s(&dir.path().join("x.svg")),
        s(&odd),
    ]);
    assert_eq!(code(&o), 2);
    let o = run(&[
        "plot",
        "--metric",
        "reward",
        "-o",
        s(&dir.path().join("y.svg")),
        s(&odd),
    ]);
    assert_eq!(code(&o), 2);
}
