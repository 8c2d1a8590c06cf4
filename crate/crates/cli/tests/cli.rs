use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use branchlab::harness::ExperimentConfig;
use branchlab::instgen::TaskSpec;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_branchlab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

/// Two small set cover tasks that still need branching.
fn tiny_config(dir: &Path) -> PathBuf {
    let tasks = (0..2)
        .map(|k| TaskSpec::set_cover(format!("sc_t{k}"), 30, 40, 0.2 + 0.05 * k as f64, 20 + k).with_counts(16, 3))
        .collect();
    let mut cfg = ExperimentConfig::new(tasks);
    cfg.output_dir = dir.join("run");
    cfg.collect.samples_per_task = 30;
    cfg.collect.per_instance_cap = Some(8);
    cfg.eval.seeds = 2;
    cfg.lifelong.gat.hidden = 8;
    cfg.lifelong.max_epochs = 2;
    cfg.lifelong.buffer_capacity = 20;
    cfg.transfer.task = Some(TaskSpec::set_cover("sc_x", 30, 40, 0.15, 7).with_counts(16, 3));
    cfg.transfer.samples = 15;
    let path = dir.join("tiny.toml");
    std::fs::write(&path, cfg.to_toml()).unwrap();
    path
}

#[test]
fn lifelong_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let cfg = cfg.to_str().unwrap();
    let o = run(&["lifelong", "--config", cfg, "--strategy", "limip"]);
    assert!(o.status.success(), "{}", text(&o));
    let out = dir.path().join("run");
    for f in ["results.json", "matrix.csv", "report.txt", "config.toml", "train_log.jsonl", "curves/sc_t0.csv"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    assert!(out.join("checkpoints/task2_sc_t1.ckpt").exists());

    std::fs::remove_file(out.join("matrix.csv")).unwrap();
    let o = run(&["report", "--run", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("sc_t1"));
    let csv = std::fs::read_to_string(out.join("matrix.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4);

    let o = run(&["eval", "--config", cfg, "--policy", "most-fractional"]);
    assert!(o.status.success(), "{}", text(&o));
    let o = run(&["transfer", "--config", cfg, "--samples", "0"]);
    assert!(o.status.success(), "{}", text(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("lifelong+finetune"));
}

#[test]
fn gen_writes_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let o = run(&["gen", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o));
    for t in ["sc_t0", "sc_t1", "sc_x"] {
        assert!(dir.path().join("run/instances").join(t).join("manifest.json").exists());
    }
}

#[test]
fn unknown_strategy_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let o = run(&["lifelong", "--config", cfg.to_str().unwrap(), "--strategy", "sgd"]);
    assert_eq!(o.status.code(), Some(2));
    let msg = text(&o);
    for s in ["ft", "er", "ewc", "limip"] {
        assert!(msg.contains(s), "{msg}");
    }
}

#[test]
fn unknown_strategy_in_config_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let body = std::fs::read_to_string(&cfg).unwrap().replacen("strategy = \"limip\"", "strategy = \"sgd\"", 1);
    std::fs::write(&cfg, body).unwrap();
    let o = run(&["lifelong", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let msg = text(&o);
    assert!(msg.contains("sgd"), "{msg}");
    for s in ["`ft`", "`er`", "`ewc`", "`limip`"] {
        assert!(msg.contains(s), "{msg}");
    }
}

#[test]
fn missing_config_and_checkpoint_exit_2() {
    let o = run(&["lifelong", "--config", "/nonexistent/x.toml"]);
    assert_eq!(o.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let o = run(&["transfer", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", text(&o));
}

#[test]
fn shipped_desk_config_matches_the_preset() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/sc_desk.toml");
    let cfg = ExperimentConfig::load(&path).unwrap();
    assert_eq!(cfg, ExperimentConfig::sc_desk(0));
}
