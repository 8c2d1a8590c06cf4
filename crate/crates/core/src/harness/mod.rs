//! Experiment orchestration: configuration, data preparation, the lifelong
//! evaluation protocol, transfer and ablation runs, metrics and reports.
//!
//! A run directory looks like
//!
//! ```text
//! config.toml            echo of the configuration
//! instances/<task>/      suites written by `gen` (optional)
//! samples/<task>-*.bin   cached expert samples
//! checkpoints/           parameters and buffer state after each task
//! train_log.jsonl        one line per training epoch
//! results.json           matrix, task reports, config, version stamp
//! matrix.csv report.txt curves/<task>.csv
//! ```

mod config;
mod eval;
pub mod metrics;
mod report;
mod run;

pub use config::{CollectSettings, EvalSettings, ExperimentConfig, Limits, TransferSettings};
pub use eval::{evaluate, evaluate_runs, Cell, EvalMatrix, EvalRun};
pub use metrics::{geomean, median, stdpct};
pub use report::{load_record, render_matrix, render_models, report, write_tables};
pub use run::{
    checkpoint_path, evaluate_row, final_checkpoint, git_stamp, instance_dir, prepare_task, prepare_tasks,
    run_ablation, run_experiment, run_lifelong, run_training, run_transfer, samples_path, task_instances,
    task_samples, LifelongOutcome, ModelRow, PreparedTask, RunRecord, TransferTable, RESULTS_FILE,
};
