use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bnb::{CollectConfig, SolveLimits};
use crate::instgen::{presets, TaskSpec};
use crate::lifelong::{LifelongConfig, Strategy};
use crate::rng;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CollectSettings {
    pub samples_per_task: usize,
    pub explore_prob: f64,
    /// Upper bound on samples taken from one training instance.
    pub per_instance_cap: Option<usize>,
}

impl Default for CollectSettings {
    fn default() -> Self {
        Self {
            samples_per_task: 2000,
            explore_prob: 0.05,
            per_instance_cap: Some(32),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSettings {
    /// Tie-break seeds per test instance.
    pub seeds: usize,
    /// Shift of the geometric means.
    pub shift: f64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self { seeds: 5, shift: 1.0 }
    }
}

/// Per-solve caps shared by collection and evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Limits {
    pub node_limit: Option<usize>,
    /// Wall-clock cap in seconds. Hitting it makes node counts depend on
    /// machine speed, so keep it generous.
    pub time_limit: Option<f64>,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            node_limit: Some(2000),
            time_limit: Some(600.0),
        }
    }
}

impl Limits {
    pub fn solve_limits(&self, tie_seed: Option<u64>) -> SolveLimits {
        SolveLimits {
            node_limit: self.node_limit,
            time_limit: self.time_limit,
            tie_seed,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransferSettings {
    /// Low-data task; defaults to set cover at density 0.047 with the shape
    /// of the first task.
    pub task: Option<TaskSpec>,
    pub samples: usize,
}

impl Default for TransferSettings {
    fn default() -> Self {
        Self { task: None, samples: 300 }
    }
}

fn default_output() -> PathBuf {
    PathBuf::from("runs/default")
}

/// A full experiment: the task sequence plus every knob of the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub strategy: Strategy,
    #[serde(default)]
    pub collect: CollectSettings,
    #[serde(default)]
    pub eval: EvalSettings,
    #[serde(default)]
    pub limits: Limits,
    #[serde(default)]
    pub lifelong: LifelongConfig,
    #[serde(default)]
    pub transfer: TransferSettings,
    pub tasks: Vec<TaskSpec>,
}

impl ExperimentConfig {
    pub fn new(tasks: Vec<TaskSpec>) -> Self {
        Self {
            seed: 0,
            output_dir: default_output(),
            strategy: Strategy::Limip,
            collect: CollectSettings::default(),
            eval: EvalSettings::default(),
            limits: Limits::default(),
            lifelong: LifelongConfig::default(),
            transfer: TransferSettings::default(),
            tasks,
        }
    }

    /// Three-density set cover sequence at 60 × 80.
    pub fn sc_desk(seed: u64) -> Self {
        let tasks = presets::sc_desk(seed)
            .into_iter()
            .map(|t| t.with_counts(2000, 20))
            .collect();
        Self {
            seed,
            output_dir: PathBuf::from("runs/sc_desk"),
            ..Self::new(tasks)
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn check(&self) -> Result<()> {
        if self.tasks.is_empty() {
            return Err(Error::Config("task sequence must contain at least one task".into()));
        }
        let mut names: Vec<&str> = self.tasks.iter().map(|t| t.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("task names must be unique".into()));
        }
        for t in &self.tasks {
            t.check().map_err(|e| Error::Config(format!("task `{}`: {e}", t.name)))?;
        }
        if let Some(t) = &self.transfer.task {
            t.check().map_err(|e| Error::Config(format!("transfer task: {e}")))?;
        }
        if self.collect.samples_per_task == 0 {
            return Err(Error::Config("collect.samples_per_task must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.collect.explore_prob) {
            return Err(Error::Config("collect.explore_prob must be in [0,1]".into()));
        }
        if self.eval.seeds == 0 {
            return Err(Error::Config("eval.seeds must be >= 1".into()));
        }
        if self.eval.shift.is_nan() || self.eval.shift < 0.0 {
            return Err(Error::Config("eval.shift must be >= 0".into()));
        }
        self.lifelong.check()
    }

    /// The lifelong configuration with the experiment's strategy and seed.
    pub fn lifelong_config(&self) -> LifelongConfig {
        LifelongConfig {
            strategy: self.strategy,
            seed: self.seed,
            ..self.lifelong.clone()
        }
    }

    /// Collection settings for one task. The exploration stream depends on
    /// the task's own seed only, so every strategy and training seed sees
    /// the same imitation data.
    pub fn collect_config(&self, spec: &TaskSpec) -> CollectConfig {
        CollectConfig {
            quota: self.collect.samples_per_task,
            explore_prob: self.collect.explore_prob,
            seed: rng::derive_seed(spec.seed, rng::stream::EXPLORE),
            per_instance_cap: self.collect.per_instance_cap,
            limits: self.limits.solve_limits(None),
        }
    }

    /// Tie-break seeds of the evaluation runs.
    pub fn eval_seeds(&self) -> Vec<u64> {
        (0..self.eval.seeds as u64)
            .map(|s| rng::derive_seed(rng::derive_seed(self.seed, rng::stream::TIE_BREAK), s))
            .collect()
    }

    pub fn transfer_task(&self) -> TaskSpec {
        self.transfer.task.clone().unwrap_or_else(|| {
            let (rows, cols) = match self.tasks[0].family {
                crate::instgen::Family::SetCover { rows, cols, .. } => (rows, cols),
                _ => (presets::DESK_SC_ROWS, presets::DESK_SC_COLS),
            };
            presets::sc_transfer(rows, cols, rng::derive_seed(self.seed, 47)).with_counts(200, 20)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig::sc_desk(3);
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn minimal_file_gets_defaults() {
        let text = r#"
            [[tasks]]
            name = "a"
            family = "set_cover"
            rows = 10
            cols = 12
            density = 0.2
            train_instances = 5
            seed = 1
        "#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.tasks[0].test_instances, 20);
        assert_eq!(cfg.eval.seeds, 5);
        assert_eq!(cfg.strategy, Strategy::Limip);
    }

    #[test]
    fn rejects_empty_and_duplicate_sequences() {
        assert!(matches!(ExperimentConfig::from_toml("tasks = []"), Err(Error::Config(_))));
        let mut cfg = ExperimentConfig::sc_desk(0);
        cfg.tasks[1].name = cfg.tasks[0].name.clone();
        assert!(cfg.check().is_err());
    }

    #[test]
    fn unknown_strategy_is_config_error() {
        let mut text = ExperimentConfig::sc_desk(0).to_toml();
        text = text.replacen("strategy = \"limip\"", "strategy = \"sgd\"", 1);
        let err = ExperimentConfig::from_toml(&text).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
    }
}
