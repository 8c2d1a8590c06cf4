use std::path::{Path, PathBuf};
use std::process::ExitCode;

use branchlab::bnb::PolicyKind;
use branchlab::harness::{self, ExperimentConfig, ModelRow};
use branchlab::instgen;
use branchlab::lifelong::Strategy;
use branchlab::{codec, Error};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Lifelong learning-to-branch laboratory.
#[derive(Parser)]
#[command(name = "branchlab", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the global seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Ft,
    Er,
    Ewc,
    Limip,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Ft => Strategy::Ft,
            StrategyArg::Er => Strategy::Er,
            StrategyArg::Ewc => Strategy::Ewc,
            StrategyArg::Limip => Strategy::Limip,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Learned,
    Strong,
    MostFractional,
    Random,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write train/test instance suites for every task.
    Gen(Common),
    /// Collect strong-branching samples for every task.
    Collect(Common),
    /// Train sequentially over the tasks and write checkpoints.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        strategy: Option<StrategyArg>,
    },
    /// Evaluate a checkpoint or a stock policy on every task's test set.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "learned")]
        policy: PolicyArg,
        /// Defaults to the final checkpoint of the run.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Full protocol: train on each task, evaluate all tasks after each.
    Lifelong {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        strategy: Option<StrategyArg>,
    },
    /// Fine-tune a lifelong checkpoint on a low-data task against a fresh model.
    Transfer {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Attention encoder against mean pooling, one task at a time.
    Ablation(Common),
    /// Render the tables of a finished run.
    Report {
        /// Run directory containing results.json.
        #[arg(long)]
        run: PathBuf,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn checkpoint(cfg: &ExperimentConfig, given: Option<PathBuf>) -> Result<branchlab::gat::GatParams, Error> {
    let path = given.unwrap_or_else(|| harness::final_checkpoint(&cfg.output_dir, cfg));
    if !path.exists() {
        return Err(Error::Config(format!("checkpoint {} does not exist", path.display())));
    }
    codec::read_checkpoint(&path)
}

fn run(cmd: Cmd) -> Result<(), Error> {
    match cmd {
        Cmd::Gen(c) => {
            let cfg = load(&c)?;
            let mut specs = cfg.tasks.clone();
            specs.push(cfg.transfer_task());
            for spec in &specs {
                let dir = harness::instance_dir(&cfg.output_dir, spec);
                let m = instgen::gen_suite(spec, &dir).map_err(|e| e.in_stage(&format!("gen:{}", spec.name)))?;
                println!("{}: {} files in {}", spec.name, m.files.len(), dir.display());
            }
        }
        Cmd::Collect(c) => {
            let cfg = load(&c)?;
            for t in harness::prepare_tasks(&cfg, Some(&cfg.output_dir))? {
                println!(
                    "{}: {} samples, {} test instances",
                    t.spec.name,
                    t.samples.len(),
                    t.test.len()
                );
            }
        }
        Cmd::Train { common, strategy } => {
            let mut cfg = load(&common)?;
            if let Some(s) = strategy {
                cfg.strategy = s.into();
            }
            let out = cfg.output_dir.clone();
            let tasks = harness::prepare_tasks(&cfg, Some(&out))?;
            let learner = harness::run_training(&cfg, &tasks, Some(&out))?;
            for l in learner.logs.iter().filter(|l| l.epoch == 1) {
                println!("task {} first epoch: {}", l.task + 1, l.to_json_line());
            }
            println!("checkpoints in {}", out.join("checkpoints").display());
        }
        Cmd::Eval {
            common,
            policy,
            checkpoint: ckpt,
        } => {
            let cfg = load(&common)?;
            let tasks = harness::prepare_tasks(&cfg, Some(&cfg.output_dir))?;
            let (kind, label) = match policy {
                PolicyArg::Learned => (PolicyKind::Learned, "learned"),
                PolicyArg::Strong => (PolicyKind::Strong, "strong"),
                PolicyArg::MostFractional => (PolicyKind::MostFractional, "most_fractional"),
                PolicyArg::Random => (PolicyKind::Random, "random"),
            };
            let params = match kind {
                PolicyKind::Learned => Some(checkpoint(&cfg, ckpt)?),
                _ => None,
            };
            let model = params.as_ref().map(|p| (p, cfg.lifelong.encoder));
            let cells = harness::evaluate_row(&cfg, &tasks, kind, model)?;
            let rows: Vec<ModelRow> = tasks
                .iter()
                .zip(cells)
                .map(|(t, cell)| ModelRow {
                    task: t.spec.name.clone(),
                    model: label.into(),
                    cell,
                    top1: None,
                })
                .collect();
            print!("{}", harness::render_models(&rows));
        }
        Cmd::Lifelong { common, strategy } => {
            let mut cfg = load(&common)?;
            if let Some(s) = strategy {
                cfg.strategy = s.into();
            }
            let outcome = harness::run_experiment(&cfg)?;
            print!("{}", harness::render_matrix(&outcome.matrix));
            println!("artifacts in {}", cfg.output_dir.display());
        }
        Cmd::Transfer {
            common,
            checkpoint: ckpt,
            samples,
        } => {
            let mut cfg = load(&common)?;
            if let Some(n) = samples {
                cfg.transfer.samples = n;
            }
            let params = checkpoint(&cfg, ckpt)?;
            let table = harness::run_transfer(&cfg, &params, Some(&cfg.output_dir))?;
            println!("{} ({} samples)", table.task, table.samples);
            print!("{}", harness::render_models(&table.rows));
        }
        Cmd::Ablation(c) => {
            let cfg = load(&c)?;
            let tasks = harness::prepare_tasks(&cfg, Some(&cfg.output_dir))?;
            let rows = harness::run_ablation(&cfg, &tasks, Some(&cfg.output_dir))?;
            print!("{}", harness::render_models(&rows));
        }
        Cmd::Report { run } => {
            print!("{}", harness::report(Path::new(&run))?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}
