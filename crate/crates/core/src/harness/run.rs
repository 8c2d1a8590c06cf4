use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::eval::{evaluate, Cell, EvalMatrix};
use super::ExperimentConfig;
use crate::bnb::{collect_samples, BranchSample, PolicyKind};
use crate::codec;
use crate::gat::{Encoder, GatParams};
use crate::instgen::{self, Split, TaskSpec};
use crate::lifelong::{Learner, LifelongConfig, Strategy, TaskReport};
use crate::milp::MilpInstance;
use crate::{Error, Result};

/// Imitation data and held-out instances of one task, fixed before any
/// training so every checkpoint is compared on the same instances.
#[derive(Debug, Clone)]
pub struct PreparedTask {
    pub spec: TaskSpec,
    pub samples: Vec<BranchSample>,
    pub test: Vec<MilpInstance>,
}

fn stage<T>(r: Result<T>, name: &str) -> Result<T> {
    r.map_err(|e| e.in_stage(name))
}

/// Directory a `gen` run writes task `spec` into.
pub fn instance_dir(out: &Path, spec: &TaskSpec) -> PathBuf {
    out.join("instances").join(&spec.name)
}

/// Instances of a split: loaded from a generated suite when one with a
/// matching spec exists under `out`, generated in memory otherwise.
pub fn task_instances(spec: &TaskSpec, split: Split, out: Option<&Path>) -> Result<Vec<MilpInstance>> {
    if let Some(out) = out {
        let dir = instance_dir(out, spec);
        if let Ok(m) = instgen::read_manifest(&dir) {
            if m.spec_hash == spec.hash() {
                return instgen::load_split(&dir, split);
            }
        }
    }
    instgen::generate_split(spec, split)
}

/// Cache file of a task's imitation samples; the name carries a hash of
/// everything that shapes the data.
pub fn samples_path(out: &Path, cfg: &ExperimentConfig, spec: &TaskSpec, quota: usize) -> PathBuf {
    let mut h = Sha256::new();
    h.update(spec.hash().as_bytes());
    h.update(serde_json::to_vec(&cfg.collect).expect("serializes"));
    h.update(serde_json::to_vec(&cfg.limits).expect("serializes"));
    h.update(quota.to_le_bytes());
    let digest = hex::encode(h.finalize());
    out.join("samples").join(format!("{}-{}.bin", spec.name, &digest[..12]))
}

/// Collects `quota` expert samples for `spec`, reusing a cached file under
/// `out` when present.
pub fn task_samples(cfg: &ExperimentConfig, spec: &TaskSpec, quota: usize, out: Option<&Path>) -> Result<Vec<BranchSample>> {
    let path = out.map(|o| samples_path(o, cfg, spec, quota));
    if let Some(p) = &path {
        if p.exists() {
            return codec::read_samples(p);
        }
    }
    let train = task_instances(spec, Split::Train, out)?;
    let mut collect = cfg.collect_config(spec);
    collect.quota = quota;
    let samples = collect_samples(&train, &collect)?;
    if samples.is_empty() {
        return Err(Error::EmptyTaskData(0));
    }
    if let Some(p) = &path {
        fs::create_dir_all(p.parent().expect("has parent"))?;
        codec::write_samples(p, &samples)?;
    }
    Ok(samples)
}

pub fn prepare_task(cfg: &ExperimentConfig, spec: &TaskSpec, out: Option<&Path>) -> Result<PreparedTask> {
    let test = stage(task_instances(spec, Split::Test, out), &format!("instances:{}", spec.name))?;
    let samples = stage(
        task_samples(cfg, spec, cfg.collect.samples_per_task, out),
        &format!("collect:{}", spec.name),
    )?;
    Ok(PreparedTask {
        spec: spec.clone(),
        samples,
        test,
    })
}

pub fn prepare_tasks(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Vec<PreparedTask>> {
    cfg.tasks.iter().map(|t| prepare_task(cfg, t, out)).collect()
}

/// Evaluates one model (or a stock policy when `model` is `None`) on every
/// task's test set.
pub fn evaluate_row(
    cfg: &ExperimentConfig,
    tasks: &[PreparedTask],
    kind: PolicyKind,
    model: Option<(&GatParams, Encoder)>,
) -> Result<Vec<Cell>> {
    let seeds = cfg.eval_seeds();
    tasks
        .iter()
        .map(|t| {
            stage(
                evaluate(&t.test, kind, model, &seeds, &cfg.limits, cfg.eval.shift),
                &format!("eval:{}", t.spec.name),
            )
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct LifelongOutcome {
    pub matrix: EvalMatrix,
    pub reports: Vec<TaskReport>,
    pub checkpoints: Vec<GatParams>,
    pub learner: Learner,
}

/// Everything written to `results.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub version: String,
    pub git: Option<String>,
    pub config: ExperimentConfig,
    pub matrix: EvalMatrix,
    pub reports: Vec<TaskReport>,
}

pub const RESULTS_FILE: &str = "results.json";

pub fn git_stamp() -> Option<String> {
    let out = std::process::Command::new("git")
        .args(["rev-parse", "--short", "HEAD"])
        .output()
        .ok()?;
    out.status
        .success()
        .then(|| String::from_utf8_lossy(&out.stdout).trim().to_string())
}

pub fn checkpoint_path(out: &Path, task: usize, name: &str) -> PathBuf {
    out.join("checkpoints").join(format!("task{}_{name}.ckpt", task + 1))
}

/// The last checkpoint file of a finished run.
pub fn final_checkpoint(out: &Path, cfg: &ExperimentConfig) -> PathBuf {
    let k = cfg.tasks.len() - 1;
    checkpoint_path(out, k, &cfg.tasks[k].name)
}

fn write_record(out: &Path, cfg: &ExperimentConfig, matrix: &EvalMatrix, reports: &[TaskReport]) -> Result<()> {
    let rec = RunRecord {
        version: env!("CARGO_PKG_VERSION").to_string(),
        git: git_stamp(),
        config: cfg.clone(),
        matrix: matrix.clone(),
        reports: reports.to_vec(),
    };
    fs::write(out.join(RESULTS_FILE), serde_json::to_vec_pretty(&rec)?)?;
    super::report::write_tables(out, matrix)?;
    Ok(())
}

/// Trains on the task sequence, evaluating every task after each one.
/// With `out`, checkpoints, buffer state, epoch logs and the matrix so far
/// are written as soon as they exist.
pub fn run_lifelong(cfg: &ExperimentConfig, tasks: &[PreparedTask], out: Option<&Path>) -> Result<LifelongOutcome> {
    let lcfg = cfg.lifelong_config();
    let names: Vec<String> = tasks.iter().map(|t| t.spec.name.clone()).collect();
    let mut matrix = EvalMatrix::new(cfg.strategy.name(), names);
    let mut learner = Learner::new(lcfg.clone());
    let mut reports = Vec::new();
    let mut checkpoints = Vec::new();
    if let Some(out) = out {
        fs::create_dir_all(out.join("checkpoints"))?;
        fs::write(out.join("config.toml"), cfg.to_toml())?;
        fs::write(out.join("train_log.jsonl"), "")?;
    }
    for (k, t) in tasks.iter().enumerate() {
        let name = format!("train:{}", t.spec.name);
        let logged = learner.logs.len();
        reports.push(stage(learner.train_task(&t.samples), &name)?);
        checkpoints.push(learner.params.clone());
        if let Some(out) = out {
            let persist = || -> Result<()> {
                codec::write_checkpoint(checkpoint_path(out, k, &t.spec.name), &learner.params)?;
                codec::write_lifelong(
                    out.join("checkpoints").join(format!("task{}.state", k + 1)),
                    &learner.buffer,
                    &learner.snapshots,
                )?;
                let mut f = fs::OpenOptions::new().append(true).open(out.join("train_log.jsonl"))?;
                for l in &learner.logs[logged..] {
                    writeln!(f, "{}", l.to_json_line())?;
                }
                Ok(())
            };
            stage(persist(), &name)?;
        }
        let row = evaluate_row(cfg, tasks, PolicyKind::Learned, Some((&learner.params, lcfg.encoder)))?;
        matrix.rows.push(row);
        if let Some(out) = out {
            stage(write_record(out, cfg, &matrix, &reports), "report")?;
        }
    }
    Ok(LifelongOutcome {
        matrix,
        reports,
        checkpoints,
        learner,
    })
}

/// Prepares data under the configured output directory, then runs the
/// lifelong protocol there.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<LifelongOutcome> {
    cfg.check()?;
    let out = cfg.output_dir.as_path();
    fs::create_dir_all(out)?;
    let tasks = prepare_tasks(cfg, Some(out))?;
    run_lifelong(cfg, &tasks, Some(out))
}

/// Sequential training only; returns the per-task reports and writes
/// checkpoints when `out` is given.
pub fn run_training(cfg: &ExperimentConfig, tasks: &[PreparedTask], out: Option<&Path>) -> Result<Learner> {
    let mut learner = Learner::new(cfg.lifelong_config());
    for (k, t) in tasks.iter().enumerate() {
        let name = format!("train:{}", t.spec.name);
        stage(learner.train_task(&t.samples), &name)?;
        if let Some(out) = out {
            fs::create_dir_all(out.join("checkpoints"))?;
            stage(codec::write_checkpoint(checkpoint_path(out, k, &t.spec.name), &learner.params), &name)?;
        }
    }
    Ok(learner)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    pub task: String,
    pub model: String,
    pub cell: Cell,
    /// Held-out top-1 imitation accuracy; `None` for untrained arms.
    pub top1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferTable {
    pub task: String,
    pub samples: usize,
    pub rows: Vec<ModelRow>,
}

fn single_task_cfg(cfg: &ExperimentConfig, encoder: Encoder) -> LifelongConfig {
    LifelongConfig {
        strategy: Strategy::Ft,
        encoder,
        seed: cfg.seed,
        ..cfg.lifelong.clone()
    }
}

/// Fine-tunes `checkpoint` on a low-data task and trains a fresh model on
/// the same samples; both plus the untouched checkpoint are evaluated on
/// the task's test instances.
pub fn run_transfer(cfg: &ExperimentConfig, checkpoint: &GatParams, out: Option<&Path>) -> Result<TransferTable> {
    let spec = cfg.transfer_task();
    let n = cfg.transfer.samples;
    let test = stage(task_instances(&spec, Split::Test, out), "transfer:instances")?;
    let lcfg = single_task_cfg(cfg, cfg.lifelong.encoder);
    let seeds = cfg.eval_seeds();
    let eval = |p: &GatParams| {
        stage(
            evaluate(&test, PolicyKind::Learned, Some((p, lcfg.encoder)), &seeds, &cfg.limits, cfg.eval.shift),
            "transfer:eval",
        )
    };
    let row = |model: &str, cell: Cell, top1: Option<f64>| ModelRow {
        task: spec.name.clone(),
        model: model.into(),
        cell,
        top1,
    };
    let mut rows = Vec::new();
    if n == 0 {
        let scratch = GatParams::init(lcfg.gat, lcfg.seed);
        rows.push(row("scratch", eval(&scratch)?, None));
        // nothing to fine-tune on: the tuned model is the checkpoint itself
        let cell = eval(checkpoint)?;
        rows.push(row("lifelong", cell.clone(), None));
        rows.push(row("lifelong+finetune", cell, None));
    } else {
        let data = stage(task_samples(cfg, &spec, n, out), "transfer:collect")?;
        let mut scratch = Learner::new(lcfg.clone());
        let rs = stage(scratch.train_task(&data), "transfer:scratch")?;
        let mut tuned = Learner::with_params(lcfg.clone(), checkpoint.clone());
        let rt = stage(tuned.train_task(&data), "transfer:finetune")?;
        rows.push(row("scratch", eval(&scratch.params)?, Some(rs.best_top1)));
        rows.push(row("lifelong", eval(checkpoint)?, None));
        rows.push(row("lifelong+finetune", eval(&tuned.params)?, Some(rt.best_top1)));
    }
    let table = TransferTable {
        task: spec.name.clone(),
        samples: n,
        rows,
    };
    if let Some(out) = out {
        fs::create_dir_all(out)?;
        fs::write(out.join("transfer.json"), serde_json::to_vec_pretty(&table)?)?;
        fs::write(out.join("transfer.txt"), super::report::render_models(&table.rows))?;
    }
    Ok(table)
}

/// Trains an attention model and a mean-pool model on each task alone and
/// evaluates both on that task.
pub fn run_ablation(cfg: &ExperimentConfig, tasks: &[PreparedTask], out: Option<&Path>) -> Result<Vec<ModelRow>> {
    let seeds = cfg.eval_seeds();
    let mut rows = Vec::new();
    for t in tasks {
        for (label, enc) in [("gat", Encoder::Attention), ("mean_pool", Encoder::MeanPool)] {
            let name = format!("ablation:{}:{label}", t.spec.name);
            let mut learner = Learner::new(single_task_cfg(cfg, enc));
            let rep = stage(learner.train_task(&t.samples), &name)?;
            let cell = stage(
                evaluate(&t.test, PolicyKind::Learned, Some((&learner.params, enc)), &seeds, &cfg.limits, cfg.eval.shift),
                &name,
            )?;
            rows.push(ModelRow {
                task: t.spec.name.clone(),
                model: label.into(),
                cell,
                top1: Some(rep.best_top1),
            });
        }
    }
    if let Some(out) = out {
        fs::create_dir_all(out)?;
        fs::write(out.join("ablation.json"), serde_json::to_vec_pretty(&rows)?)?;
        fs::write(out.join("ablation.txt"), super::report::render_models(&rows))?;
    }
    Ok(rows)
}
