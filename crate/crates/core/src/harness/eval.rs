use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{geomean, stdpct};
use super::Limits;
use crate::bnb::{make_policy, solve_mip, MipStatus, PolicyKind};
use crate::gat::{Encoder, GatParams};
use crate::milp::MilpInstance;
use crate::rng;
use crate::Result;

/// One solve of one test instance under one tie-break seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRun {
    pub instance: usize,
    pub seed: usize,
    pub nodes: usize,
    pub time: f64,
    pub status: MipStatus,
}

/// Aggregate over a test set: shifted geometric means and the mean
/// per-instance relative spread across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub time: f64,
    pub nodes: f64,
    pub time_std_pct: f64,
    pub nodes_std_pct: f64,
    /// Solves stopped by the node or time cap. Their counts enter the
    /// means at the cap.
    pub cap_hits: usize,
    pub runs: usize,
}

impl Cell {
    pub fn from_runs(runs: &[EvalRun], n_instances: usize, shift: f64) -> Self {
        let mut nodes = vec![Vec::new(); n_instances];
        let mut times = vec![Vec::new(); n_instances];
        for r in runs {
            nodes[r.instance].push(r.nodes as f64);
            times[r.instance].push(r.time);
        }
        let all_nodes: Vec<f64> = runs.iter().map(|r| r.nodes as f64).collect();
        let all_times: Vec<f64> = runs.iter().map(|r| r.time).collect();
        Self {
            time: geomean(&all_times, shift),
            nodes: geomean(&all_nodes, shift),
            time_std_pct: stdpct(&times),
            nodes_std_pct: stdpct(&nodes),
            cap_hits: runs.iter().filter(|r| r.status == MipStatus::Limit).count(),
            runs: runs.len(),
        }
    }
}

/// Solves every (instance, seed) pair with a fresh policy. Runs execute in
/// parallel; results come back in (instance, seed) order.
pub fn evaluate_runs(
    instances: &[MilpInstance],
    kind: PolicyKind,
    model: Option<(&GatParams, Encoder)>,
    seeds: &[u64],
    limits: &Limits,
) -> Result<Vec<EvalRun>> {
    let pairs: Vec<(usize, usize)> = (0..instances.len())
        .flat_map(|i| (0..seeds.len()).map(move |s| (i, s)))
        .collect();
    pairs
        .par_iter()
        .map(|&(i, s)| {
            let tie = rng::derive_seed(seeds[s], i as u64);
            let mut policy = make_policy(kind, rng::derive_seed(tie, rng::stream::EXPLORE), model);
            let rep = solve_mip(&instances[i], policy.as_mut(), &limits.solve_limits(Some(tie)))?;
            Ok(EvalRun {
                instance: i,
                seed: s,
                nodes: rep.node_count,
                time: rep.wall_time,
                status: rep.status,
            })
        })
        .collect()
}

pub fn evaluate(
    instances: &[MilpInstance],
    kind: PolicyKind,
    model: Option<(&GatParams, Encoder)>,
    seeds: &[u64],
    limits: &Limits,
    shift: f64,
) -> Result<Cell> {
    let runs = evaluate_runs(instances, kind, model, seeds, limits)?;
    Ok(Cell::from_runs(&runs, instances.len(), shift))
}

/// Rows are checkpoints (after each training task), columns are the
/// evaluation tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMatrix {
    pub strategy: String,
    pub tasks: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl EvalMatrix {
    pub fn new(strategy: impl Into<String>, tasks: Vec<String>) -> Self {
        Self {
            strategy: strategy.into(),
            tasks,
            rows: Vec::new(),
        }
    }

    pub fn nodes(&self, checkpoint: usize, task: usize) -> f64 {
        self.rows[checkpoint][task].nodes
    }

    /// Node geomeans only; the part of the matrix that is reproducible
    /// bit for bit.
    pub fn node_table(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.iter().map(|c| c.nodes).collect()).collect()
    }

    /// Relative growth of task `task`'s node geomean from the checkpoint
    /// right after it was trained to the last checkpoint.
    pub fn forgetting(&self, task: usize) -> f64 {
        let first = self.nodes(task, task);
        let last = self.nodes(self.rows.len() - 1, task);
        last / first - 1.0
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("checkpoint,trained_on,eval_task,time_geomean,nodes_geomean,time_std_pct,nodes_std_pct,cap_hits,runs\n");
        for (i, row) in self.rows.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                s += &format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    i + 1,
                    self.tasks[i],
                    self.tasks[j],
                    c.time,
                    c.nodes,
                    c.time_std_pct,
                    c.nodes_std_pct,
                    c.cap_hits,
                    c.runs
                );
            }
        }
        s
    }

    /// Evolution of one task's metrics across checkpoints.
    pub fn curve_csv(&self, task: usize) -> String {
        let mut s = String::from("checkpoint,trained_on,time_geomean,nodes_geomean,time_std_pct,nodes_std_pct\n");
        for (i, row) in self.rows.iter().enumerate() {
            let c = &row[task];
            s += &format!(
                "{},{},{},{},{},{}\n",
                i + 1,
                self.tasks[i],
                c.time,
                c.nodes,
                c.time_std_pct,
                c.nodes_std_pct
            );
        }
        s
    }
}
