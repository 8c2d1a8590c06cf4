//! Lifelong imitation of the branching expert.
//!
//! Each task `i` minimizes
//!
//! ```text
//! L = imitation(D_i) + α·KD(buffer) + β·Σ_{j<i} Σ_w Ω_j^w (θ^w − θ*_j^w)²
//! ```
//!
//! where the KD term is `KL(softmax(z) ‖ softmax(f_θ(s)))` over replayed
//! `(s, z)` pairs and `Ω_j` is the mean squared per-sample gradient of the
//! imitation loss at the end of task `j`. The baselines are plain fine-tuning
//! (FT), experience replay of ground-truth actions (ER) and EWC alone.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::bnb::{argmax_lowest, BranchSample};
use crate::error::{Error, Result};
use crate::features::{BatchedState, BranchState};
use crate::gat::{self, Adam, AdamConfig, Encoder, GatConfig, GatParams};
use crate::rng::{self, Rng};

/// Probabilities are clamped here before taking logs.
pub const PROB_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Ft,
    Er,
    Ewc,
    #[default]
    Limip,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Ft, Strategy::Er, Strategy::Ewc, Strategy::Limip];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Ft => "ft",
            Strategy::Er => "er",
            Strategy::Ewc => "ewc",
            Strategy::Limip => "limip",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown strategy `{s}` (expected one of ft, er, ewc, limip)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LifelongConfig {
    pub strategy: Strategy,
    /// Weight of the distillation term (LiMIP).
    pub kd_weight: f64,
    /// Weight of the consolidation penalty (LiMIP).
    pub ewc_weight: f64,
    /// Weight of the consolidation penalty for the EWC-only baseline.
    pub ewc_only_weight: f64,
    pub buffer_capacity: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    /// Replay minibatch; each step draws `min(kd_batch, |eligible buffer|)`.
    pub kd_batch: usize,
    pub val_fraction: f64,
    pub adam: AdamConfig,
    pub gat: GatConfig,
    pub encoder: Encoder,
    /// Keep the logits seen when an entry entered the buffer instead of
    /// recomputing them with the end-of-task parameters.
    pub insertion_time_logits: bool,
    pub seed: u64,
}

impl Default for LifelongConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Limip,
            kd_weight: 1.5,
            ewc_weight: 100.0,
            ewc_only_weight: 1000.0,
            buffer_capacity: 500,
            max_epochs: 40,
            patience: 8,
            batch_size: 32,
            kd_batch: 32,
            val_fraction: 0.1,
            adam: AdamConfig::default(),
            gat: GatConfig::default(),
            encoder: Encoder::Attention,
            insertion_time_logits: false,
            seed: 0,
        }
    }
}

impl LifelongConfig {
    pub fn check(&self) -> Result<()> {
        let bad = |w: f64| !(w >= 0.0 && w.is_finite());
        if bad(self.kd_weight) || bad(self.ewc_weight) || bad(self.ewc_only_weight) {
            return Err(Error::Config("loss weights must be finite and >= 0".into()));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config("batch_size and max_epochs must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::Config("val_fraction must be in [0,1)".into()));
        }
        Ok(())
    }

    fn plan(&self) -> Plan {
        match self.strategy {
            Strategy::Ft => Plan::default(),
            Strategy::Er => Plan {
                replay: true,
                buffer: true,
                ..Plan::default()
            },
            Strategy::Ewc => Plan {
                ewc: self.ewc_only_weight,
                snapshots: true,
                ..Plan::default()
            },
            Strategy::Limip => Plan {
                kd: self.kd_weight,
                ewc: self.ewc_weight,
                buffer: true,
                snapshots: true,
                replay: false,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Plan {
    kd: f64,
    ewc: f64,
    replay: bool,
    buffer: bool,
    snapshots: bool,
}

pub fn log_softmax(z: &[f64]) -> Vec<f64> {
    let mx = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = mx + z.iter().map(|v| (v - mx).exp()).sum::<f64>().ln();
    z.iter().map(|v| v - lse).collect()
}

/// `-ln p(action)` and its gradient with respect to the logits.
pub fn cross_entropy(logits: &[f64], action: usize) -> (f64, Vec<f64>) {
    let p = gat::softmax(logits);
    let loss = -p[action].max(PROB_FLOOR).ln();
    let mut g = p;
    g[action] -= 1.0;
    (loss, g)
}

/// `KL(softmax(stored) ‖ softmax(current))` and its gradient with respect to
/// the current logits.
pub fn kl_logits(stored: &[f64], current: &[f64]) -> (f64, Vec<f64>) {
    assert_eq!(stored.len(), current.len(), "kd: candidate sets differ");
    let lq = log_softmax(stored);
    let lp = log_softmax(current);
    let mut kl = 0.0;
    let mut g = Vec::with_capacity(current.len());
    for k in 0..current.len() {
        let q = lq[k].exp();
        if q > 0.0 {
            kl += q * (lq[k] - lp[k]);
        }
        g.push(lp[k].exp() - q);
    }
    (kl.max(0.0), g)
}

/// Mean imitation loss over `(state, expert action)` pairs and the gradient
/// of that mean with respect to each sample's logits.
pub fn imitation_loss(params: &GatParams, batch: &[(&BranchState, usize)], encoder: Encoder) -> (f64, Vec<Vec<f64>>) {
    if batch.is_empty() {
        return (0.0, Vec::new());
    }
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    let grads = batch
        .iter()
        .map(|(s, a)| {
            let z = gat::logits(params, s, encoder);
            let (l, mut g) = cross_entropy(&z, *a);
            total += l;
            g.iter_mut().for_each(|v| *v *= scale);
            g
        })
        .collect();
    (total * scale, grads)
}

/// Imitation loss of a batched union, one softmax per member graph.
pub fn imitation_loss_batched(params: &GatParams, batch: &BatchedState, actions: &[usize], encoder: Encoder) -> f64 {
    let z = gat::logits(params, &batch.state, encoder);
    let losses: f64 = batch
        .cand_ranges
        .iter()
        .zip(actions)
        .map(|(r, &a)| cross_entropy(&z[r.clone()], a).0)
        .sum();
    losses / actions.len() as f64
}

/// A retained example: the state, the logits to distil towards, the expert
/// action (for ground-truth replay) and the task it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub state: BranchState,
    pub logits: Vec<f64>,
    pub action: usize,
    pub task: usize,
}

/// Mean distillation loss over buffer entries and per-entry logit gradients.
/// An empty slice contributes exactly zero.
pub fn kd_loss(params: &GatParams, entries: &[&ReplayEntry], encoder: Encoder) -> (f64, Vec<Vec<f64>>) {
    if entries.is_empty() {
        return (0.0, Vec::new());
    }
    let scale = 1.0 / entries.len() as f64;
    let mut total = 0.0;
    let grads = entries
        .iter()
        .map(|e| {
            let z = gat::logits(params, &e.state, encoder);
            let (l, mut g) = kl_logits(&e.logits, &z);
            total += l;
            g.iter_mut().for_each(|v| *v *= scale);
            g
        })
        .collect();
    (total * scale, grads)
}

/// Fixed-capacity reservoir over the stream of offered examples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayBuffer {
    pub capacity: usize,
    pub entries: Vec<ReplayEntry>,
    pub stream_count: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            entries: Vec::with_capacity(capacity.min(1024)),
            stream_count: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Indices of entries from tasks before `task`.
    pub fn eligible(&self, task: usize) -> Vec<usize> {
        (0..self.entries.len()).filter(|&k| self.entries[k].task < task).collect()
    }
}

/// Classic reservoir step. Returns the slot that now holds `item`, if any.
pub fn reservoir_offer<T>(slots: &mut Vec<T>, capacity: usize, stream_count: &mut u64, item: T, rng: &mut Rng) -> Option<usize> {
    if capacity == 0 {
        return None;
    }
    *stream_count += 1;
    if slots.len() < capacity {
        slots.push(item);
        return Some(slots.len() - 1);
    }
    let j = rng.gen_range(0..*stream_count);
    if (j as usize) < capacity {
        slots[j as usize] = item;
        Some(j as usize)
    } else {
        None
    }
}

impl ReplayBuffer {
    pub fn offer(&mut self, item: ReplayEntry, rng: &mut Rng) -> Option<usize> {
        reservoir_offer(&mut self.entries, self.capacity, &mut self.stream_count, item, rng)
    }
}

/// Frozen parameters and importance weights of a finished task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSnapshot {
    pub task: usize,
    pub theta: Vec<f64>,
    pub omega: Vec<f64>,
}

/// `Ω^w = mean_s (∂L(s, a*)/∂θ^w)²` with per-sample gradients.
pub fn compute_importance(params: &GatParams, samples: &[BranchSample], encoder: Encoder) -> Vec<f64> {
    let mut omega = vec![0.0; params.len()];
    if samples.is_empty() {
        return omega;
    }
    let mut g = vec![0.0; params.len()];
    for s in samples {
        let tr = gat::forward_with(params, &s.state, encoder);
        let (_, d) = cross_entropy(&tr.logits, s.expert_action);
        g.iter_mut().for_each(|v| *v = 0.0);
        gat::backward_acc(params, &s.state, &tr, &d, &mut g);
        for (o, v) in omega.iter_mut().zip(&g) {
            *o += v * v;
        }
    }
    let scale = 1.0 / samples.len() as f64;
    omega.iter_mut().for_each(|o| *o *= scale);
    omega
}

/// `Σ_j Σ_w Ω_j^w (θ^w − θ*_j^w)²` and its gradient.
pub fn ewc_penalty(theta: &[f64], snapshots: &[TaskSnapshot]) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; theta.len()];
    let mut pen = 0.0;
    for s in snapshots {
        assert_eq!(s.theta.len(), theta.len(), "snapshot length");
        for w in 0..theta.len() {
            let d = theta[w] - s.theta[w];
            pen += s.omega[w] * d * d;
            grad[w] += 2.0 * s.omega[w] * d;
        }
    }
    (pen, grad)
}

/// One JSON line per epoch. Components are already weighted, so `total` is
/// their sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub task: usize,
    pub epoch: usize,
    pub strategy: Strategy,
    pub imitation: f64,
    pub replay: f64,
    pub kd: f64,
    pub ewc: f64,
    pub total: f64,
    pub val_loss: f64,
    pub top1: f64,
}

impl EpochLog {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("epoch log serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub task: usize,
    pub epochs: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub best_top1: f64,
    pub train_samples: usize,
    pub val_samples: usize,
}

/// Mean imitation loss and top-1 accuracy of `params` on `samples`.
pub fn evaluate_imitation(params: &GatParams, samples: &[&BranchSample], encoder: Encoder) -> (f64, f64) {
    if samples.is_empty() {
        return (0.0, 0.0);
    }
    let mut loss = 0.0;
    let mut hits = 0usize;
    for s in samples {
        let z = gat::logits(params, &s.state, encoder);
        loss += cross_entropy(&z, s.expert_action).0;
        hits += usize::from(argmax_lowest(&z) == s.expert_action);
    }
    let n = samples.len() as f64;
    (loss / n, hits as f64 / n)
}

/// Splits sample indices into (train, validation), fixed by seed and task.
pub fn split_indices(n: usize, frac: f64, seed: u64, task: usize) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut r = rng::rng_for(rng::derive_seed(seed, task as u64), rng::stream::SPLIT);
    idx.shuffle(&mut r);
    let n_val = ((n as f64 * frac).round() as usize).min(n.saturating_sub(1));
    let val = idx.split_off(n - n_val);
    (idx, val)
}

/// Everything that persists across tasks.
#[derive(Debug, Clone)]
pub struct Learner {
    pub cfg: LifelongConfig,
    pub params: GatParams,
    pub buffer: ReplayBuffer,
    pub snapshots: Vec<TaskSnapshot>,
    pub logs: Vec<EpochLog>,
    pub tasks_seen: usize,
}

impl Learner {
    pub fn new(cfg: LifelongConfig) -> Self {
        let params = GatParams::init(cfg.gat, cfg.seed);
        Self::with_params(cfg, params)
    }

    pub fn with_params(cfg: LifelongConfig, params: GatParams) -> Self {
        Self {
            buffer: ReplayBuffer::new(cfg.buffer_capacity),
            cfg,
            params,
            snapshots: Vec::new(),
            logs: Vec::new(),
            tasks_seen: 0,
        }
    }

    /// Trains on the next task of the sequence.
    pub fn train_task(&mut self, data: &[BranchSample]) -> Result<TaskReport> {
        let task = self.tasks_seen;
        let report = train_task(
            &mut self.params,
            task,
            data,
            &mut self.buffer,
            &mut self.snapshots,
            &self.cfg,
            &mut self.logs,
        )?;
        self.tasks_seen += 1;
        Ok(report)
    }
}

fn draw(eligible: &[usize], k: usize, rng: &mut Rng) -> Vec<usize> {
    rand::seq::index::sample(rng, eligible.len(), k)
        .into_iter()
        .map(|i| eligible[i])
        .collect()
}

/// Trains `params` on task `task` with the configured strategy, updating the
/// buffer and snapshot list in place and appending one log per epoch.
#[allow(clippy::too_many_arguments)]
pub fn train_task(
    params: &mut GatParams,
    task: usize,
    data: &[BranchSample],
    buffer: &mut ReplayBuffer,
    snapshots: &mut Vec<TaskSnapshot>,
    cfg: &LifelongConfig,
    logs: &mut Vec<EpochLog>,
) -> Result<TaskReport> {
    cfg.check()?;
    if data.is_empty() {
        return Err(Error::EmptyTaskData(task));
    }
    if params.config() != &cfg.gat {
        return Err(Error::Shape("parameters do not match the configured architecture".into()));
    }
    let plan = cfg.plan();
    let enc = cfg.encoder;
    let task_seed = rng::derive_seed(cfg.seed, task as u64);
    let mut shuffle_rng = rng::rng_for(task_seed, rng::stream::SHUFFLE);
    let mut replay_rng = rng::rng_for(task_seed, rng::stream::REPLAY);
    let mut reservoir_rng = rng::rng_for(task_seed, rng::stream::RESERVOIR);

    let (mut train_idx, val_idx) = split_indices(data.len(), cfg.val_fraction, cfg.seed, task);
    let val: Vec<&BranchSample> = if val_idx.is_empty() {
        train_idx.iter().map(|&i| &data[i]).collect()
    } else {
        val_idx.iter().map(|&i| &data[i]).collect()
    };

    let mut adam = Adam::new(params.len(), cfg.adam);
    let mut grad = vec![0.0; params.len()];
    let (v0, t0) = evaluate_imitation(params, &val, enc);
    let mut best = (v0, t0, 0usize, params.flatten().to_vec());
    let mut since_best = 0;
    let mut epochs = 0;

    for epoch in 1..=cfg.max_epochs {
        epochs = epoch;
        train_idx.shuffle(&mut shuffle_rng);
        let mut sums = [0.0f64; 4];
        let mut steps = 0usize;
        for chunk in train_idx.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|v| *v = 0.0);
            let scale = 1.0 / chunk.len() as f64;
            let mut imit = 0.0;
            for &i in chunk {
                let s = &data[i];
                let tr = gat::forward_with(params, &s.state, enc);
                let (l, mut d) = cross_entropy(&tr.logits, s.expert_action);
                imit += l * scale;
                d.iter_mut().for_each(|v| *v *= scale);
                gat::backward_acc(params, &s.state, &tr, &d, &mut grad);
                if plan.buffer && epoch == 1 {
                    buffer.offer(
                        ReplayEntry {
                            state: s.state.clone(),
                            logits: tr.logits,
                            action: s.expert_action,
                            task,
                        },
                        &mut reservoir_rng,
                    );
                }
            }

            let mut replay = 0.0;
            if plan.replay {
                let eligible = buffer.eligible(task);
                if !eligible.is_empty() {
                    let picks = draw(&eligible, cfg.kd_batch.min(eligible.len()), &mut replay_rng);
                    let rs = 1.0 / picks.len() as f64;
                    for k in picks {
                        let e = &buffer.entries[k];
                        let tr = gat::forward_with(params, &e.state, enc);
                        let (l, mut d) = cross_entropy(&tr.logits, e.action);
                        replay += l * rs;
                        d.iter_mut().for_each(|v| *v *= rs);
                        gat::backward_acc(params, &e.state, &tr, &d, &mut grad);
                    }
                }
            }

            let mut kd = 0.0;
            if plan.kd > 0.0 {
                let eligible = buffer.eligible(task);
                if !eligible.is_empty() {
                    let picks = draw(&eligible, cfg.kd_batch.min(eligible.len()), &mut replay_rng);
                    let ks = plan.kd / picks.len() as f64;
                    for k in picks {
                        let e = &buffer.entries[k];
                        let tr = gat::forward_with(params, &e.state, enc);
                        let (l, mut d) = kl_logits(&e.logits, &tr.logits);
                        kd += l * ks;
                        d.iter_mut().for_each(|v| *v *= ks);
                        gat::backward_acc(params, &e.state, &tr, &d, &mut grad);
                    }
                }
            }

            let mut ewc = 0.0;
            if plan.ewc > 0.0 && !snapshots.is_empty() {
                let (pen, g) = ewc_penalty(params.flatten(), snapshots);
                ewc = plan.ewc * pen;
                for (a, b) in grad.iter_mut().zip(&g) {
                    *a += plan.ewc * b;
                }
            }

            adam.step(params.flat_mut(), &grad);
            sums[0] += imit;
            sums[1] += replay;
            sums[2] += kd;
            sums[3] += ewc;
            steps += 1;
        }

        let (val_loss, top1) = evaluate_imitation(params, &val, enc);
        let n = steps as f64;
        let [imitation, replay, kd, ewc] = sums.map(|v| v / n);
        logs.push(EpochLog {
            task,
            epoch,
            strategy: cfg.strategy,
            imitation,
            replay,
            kd,
            ewc,
            total: imitation + replay + kd + ewc,
            val_loss,
            top1,
        });
        if val_loss < best.0 {
            best = (val_loss, top1, epoch, params.flatten().to_vec());
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    params.flat_mut().copy_from_slice(&best.3);

    if plan.buffer && !cfg.insertion_time_logits {
        for e in buffer.entries.iter_mut().filter(|e| e.task == task) {
            e.logits = gat::logits(params, &e.state, enc);
        }
    }
    if plan.snapshots {
        let train: Vec<BranchSample> = train_idx.iter().map(|&i| data[i].clone()).collect();
        snapshots.push(TaskSnapshot {
            task,
            theta: params.flatten().to_vec(),
            omega: compute_importance(params, &train, enc),
        });
    }
    Ok(TaskReport {
        task,
        epochs,
        best_epoch: best.2,
        best_val_loss: best.0,
        best_top1: best.1,
        train_samples: train_idx.len(),
        val_samples: val_idx.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{batch, random_state};

    fn sample(seed: u64) -> BranchSample {
        let state = random_state(6, 4, 0.5, seed);
        let candidates = state.candidates();
        let expert_action = (seed as usize) % candidates.len();
        BranchSample {
            state,
            candidates,
            expert_action,
            instance: format!("s{seed}"),
            depth: 0,
        }
    }

    #[test]
    fn cross_entropy_limits() {
        let (l, _) = cross_entropy(&[0.0; 4], 2);
        assert!((l - 4f64.ln()).abs() < 1e-12);
        assert!((l - 1.3863).abs() < 1e-4);
        let (l, _) = cross_entropy(&[0.0, 25.0], 1);
        assert!(l < 1e-9);
        // floor keeps the loss finite
        let (l, _) = cross_entropy(&[0.0, 1e4], 0);
        assert!((l - (-PROB_FLOOR.ln())).abs() < 1e-9);
    }

    #[test]
    fn kl_closed_form() {
        let (kl, _) = kl_logits(&[0.0, 0.0], &[0.0, 3f64.ln()]);
        let expected = 0.5 * (0.5f64 / 0.25).ln() + 0.5 * (0.5f64 / 0.75).ln();
        assert!((kl - expected).abs() < 1e-12);
        assert!((kl - 0.1438).abs() < 1e-4);
        let (kl, g) = kl_logits(&[0.3, -1.0, 2.0], &[0.3, -1.0, 2.0]);
        assert_eq!(kl, 0.0);
        assert!(g.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn batch_loss_is_mean_of_singletons() {
        let params = GatParams::init(GatConfig::with_hidden(8, 2), 1);
        let ss: Vec<BranchSample> = (0..5).map(sample).collect();
        let pairs: Vec<(&BranchState, usize)> = ss.iter().map(|s| (&s.state, s.expert_action)).collect();
        let (mean, grads) = imitation_loss(&params, &pairs, Encoder::Attention);
        let singles: f64 = pairs
            .iter()
            .map(|p| imitation_loss(&params, std::slice::from_ref(p), Encoder::Attention).0)
            .sum::<f64>()
            / 5.0;
        assert!((mean - singles).abs() < 1e-12);
        assert_eq!(grads.len(), 5);
        let refs: Vec<&BranchState> = ss.iter().map(|s| &s.state).collect();
        let b = batch(&refs);
        let actions: Vec<usize> = ss.iter().map(|s| s.expert_action).collect();
        let batched = imitation_loss_batched(&params, &b, &actions, Encoder::Attention);
        assert!((batched - mean).abs() < 1e-10);
    }

    #[test]
    fn empty_buffer_kd_is_zero() {
        let params = GatParams::init(GatConfig::with_hidden(4, 1), 0);
        assert_eq!(kd_loss(&params, &[], Encoder::Attention).0, 0.0);
    }

    #[test]
    fn reservoir_basics() {
        let mut r = rng::rng_for(0, 0);
        let mut slots = Vec::new();
        let mut count = 0;
        for i in 0..10 {
            reservoir_offer(&mut slots, 500, &mut count, i, &mut r);
        }
        assert_eq!(slots, (0..10).collect::<Vec<_>>());
        let mut empty: Vec<i32> = Vec::new();
        let mut c0 = 0;
        for i in 0..100 {
            assert_eq!(reservoir_offer(&mut empty, 0, &mut c0, i, &mut r), None);
        }
        assert!(empty.is_empty());
    }

    #[test]
    fn ewc_closed_forms() {
        let snap = TaskSnapshot {
            task: 0,
            theta: vec![1.0],
            omega: vec![2.0],
        };
        let (p, g) = ewc_penalty(&[1.5], std::slice::from_ref(&snap));
        assert!((p - 0.5).abs() < 1e-15);
        assert!((g[0] - 2.0).abs() < 1e-15);
        assert_eq!(ewc_penalty(&[1.0], std::slice::from_ref(&snap)).0, 0.0);
        let zero = TaskSnapshot {
            omega: vec![0.0],
            ..snap
        };
        assert_eq!(ewc_penalty(&[100.0], &[zero]).0, 0.0);
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!("LiMIP".parse::<Strategy>().unwrap(), Strategy::Limip);
        let err = "sgd".parse::<Strategy>().unwrap_err().to_string();
        assert!(err.contains("ft, er, ewc, limip"));
    }

    #[test]
    fn split_is_fixed_and_disjoint() {
        let (a, b) = split_indices(50, 0.1, 3, 1);
        assert_eq!(b.len(), 5);
        assert_eq!(split_indices(50, 0.1, 3, 1), (a.clone(), b.clone()));
        let mut all: Vec<usize> = a.into_iter().chain(b).collect();
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn empty_task_is_an_error() {
        let cfg = LifelongConfig {
            gat: GatConfig::with_hidden(4, 1),
            ..LifelongConfig::default()
        };
        let mut l = Learner::new(cfg);
        assert!(matches!(l.train_task(&[]), Err(Error::EmptyTaskData(0))));
    }
}
