//! Edge-weighted bipartite graph attention policy.
//!
//! Raw variable and constraint features are first embedded to `h` dimensions
//! by one-hidden-layer ReLU MLPs. Two half-aggregations follow, each with `K`
//! heads:
//!
//! 1. variables → constraints: for head `k`, every constraint attends over
//!    itself and its variable neighbours,
//!    `c_i^k = ρ(α_ii Θ c_i + Σ_j α_ij Θ v_j)`;
//! 2. constraints → variables: variable head `k` attends over itself and the
//!    head-`k` constraint embeddings from step 1,
//!    `v_j^k = ρ(α_jj Θ' v_j + Σ_i α_ji Θ' c_i^k)`.
//!    Only candidate variables feed the output head, so this step is
//!    evaluated for them alone.
//!
//! Attention logits are `ρ(aᵀ[Θ x_center ‖ Θ x_nbr ‖ Θ_e e])` with `ρ` a
//! LeakyReLU of slope 0.2. The self term uses a zero edge feature, so its
//! edge vector is just the bias of `Θ_e`. Heads are concatenated and an output
//! MLP (`K·h → h → 1`) scores each candidate variable.
//!
//! The mean-pool encoder keeps everything but replaces every attention
//! coefficient by `1/(deg+1)`.
//!
//! The backward pass is written by hand against the stored [`ForwardTrace`].

mod adam;
mod params;

pub use adam::{adam_step, Adam, AdamConfig};
pub use params::{param_count, GatConfig, GatParams, Segment};

use params::{MlpOffsets, PassOffsets};
use serde::{Deserialize, Serialize};

use crate::features::{BranchState, CON_FEATS, VAR_FEATS};

pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoder {
    #[default]
    Attention,
    MeanPool,
}

#[inline]
fn leaky(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        LEAKY_SLOPE * x
    }
}

#[inline]
fn dleaky(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

/// Dot product with four independent accumulators (fixed summation order).
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `out = W x`, `W` row-major with `out.len()` rows.
#[inline]
fn matvec(w: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    for (r, o) in out.iter_mut().enumerate() {
        *o = dot(&w[r * cols..(r + 1) * cols], x);
    }
}

/// `dx += Wᵀ dy`.
#[inline]
fn matvec_t_acc(w: &[f64], dy: &[f64], dx: &mut [f64]) {
    let cols = dx.len();
    for (r, &g) in dy.iter().enumerate() {
        if g != 0.0 {
            for (d, wv) in dx.iter_mut().zip(&w[r * cols..(r + 1) * cols]) {
                *d += g * wv;
            }
        }
    }
}

/// `dW += dy xᵀ`.
#[inline]
fn outer_acc(dw: &mut [f64], dy: &[f64], x: &[f64]) {
    let cols = x.len();
    for (r, &g) in dy.iter().enumerate() {
        if g != 0.0 {
            for (d, xv) in dw[r * cols..(r + 1) * cols].iter_mut().zip(x) {
                *d += g * xv;
            }
        }
    }
}

/// Neighbourhoods of one half-aggregation in CSR form.
#[derive(Debug, Clone)]
struct Groups {
    ptr: Vec<usize>,
    /// (neighbour node, edge feature)
    items: Vec<(usize, f64)>,
}

/// Constraint neighbourhoods for every constraint, and variable
/// neighbourhoods for the candidate variables only (in candidate order).
fn build_groups(state: &BranchState, candidates: &[usize]) -> (Groups, Groups) {
    let m = state.num_cons;
    let mut slot = vec![usize::MAX; state.num_vars];
    for (ci, &j) in candidates.iter().enumerate() {
        slot[j] = ci;
    }
    let nc = candidates.len();
    let mut con_cnt = vec![0usize; m + 1];
    let mut var_cnt = vec![0usize; nc + 1];
    for e in &state.edges {
        con_cnt[e.con as usize + 1] += 1;
        let c = slot[e.var as usize];
        if c != usize::MAX {
            var_cnt[c + 1] += 1;
        }
    }
    for i in 0..m {
        con_cnt[i + 1] += con_cnt[i];
    }
    for c in 0..nc {
        var_cnt[c + 1] += var_cnt[c];
    }
    let mut con_items = vec![(0, 0.0); con_cnt[m]];
    let mut var_items = vec![(0, 0.0); var_cnt[nc]];
    let mut cf = con_cnt.clone();
    let mut vf = var_cnt.clone();
    for e in &state.edges {
        let (i, j) = (e.con as usize, e.var as usize);
        con_items[cf[i]] = (j, e.feat);
        cf[i] += 1;
        let c = slot[j];
        if c != usize::MAX {
            var_items[vf[c]] = (i, e.feat);
            vf[c] += 1;
        }
    }
    (
        Groups {
            ptr: con_cnt,
            items: con_items,
        },
        Groups {
            ptr: var_cnt,
            items: var_items,
        },
    )
}

#[derive(Debug, Clone)]
struct MlpTrace {
    pre: Vec<f64>,
    out: Vec<f64>,
}

/// Applies a one-hidden-layer ReLU MLP row by row.
fn mlp_forward(p: &[f64], off: MlpOffsets, x: &[f64], d_in: usize, h: usize, d_out: usize) -> MlpTrace {
    let rows = x.len() / d_in.max(1);
    let mut pre = vec![0.0; rows * h];
    let mut out = vec![0.0; rows * d_out];
    let mut hid = vec![0.0; h];
    for r in 0..rows {
        let xr = &x[r * d_in..(r + 1) * d_in];
        let pr = &mut pre[r * h..(r + 1) * h];
        matvec(&p[off.w1..off.w1 + h * d_in], xr, pr);
        for (v, b) in pr.iter_mut().zip(&p[off.b1..off.b1 + h]) {
            *v += b;
        }
        for (hv, &v) in hid.iter_mut().zip(pr.iter()) {
            *hv = v.max(0.0);
        }
        let or = &mut out[r * d_out..(r + 1) * d_out];
        matvec(&p[off.w2..off.w2 + d_out * h], &hid, or);
        for (v, b) in or.iter_mut().zip(&p[off.b2..off.b2 + d_out]) {
            *v += b;
        }
    }
    MlpTrace { pre, out }
}

/// Accumulates parameter gradients of an MLP; returns nothing for the input.
#[allow(clippy::too_many_arguments)]
fn mlp_backward(
    p: &[f64],
    g: &mut [f64],
    off: MlpOffsets,
    x: &[f64],
    tr: &MlpTrace,
    dout: &[f64],
    d_in: usize,
    h: usize,
    d_out: usize,
) -> Vec<f64> {
    let rows = tr.pre.len() / h.max(1);
    let mut dx = vec![0.0; x.len()];
    let mut hid = vec![0.0; h];
    let mut dhid = vec![0.0; h];
    for r in 0..rows {
        let dor = &dout[r * d_out..(r + 1) * d_out];
        if dor.iter().all(|&v| v == 0.0) {
            continue;
        }
        let pr = &tr.pre[r * h..(r + 1) * h];
        for (hv, &v) in hid.iter_mut().zip(pr) {
            *hv = v.max(0.0);
        }
        for (gb, d) in g[off.b2..off.b2 + d_out].iter_mut().zip(dor) {
            *gb += d;
        }
        outer_acc(&mut g[off.w2..off.w2 + d_out * h], dor, &hid);
        dhid.iter_mut().for_each(|v| *v = 0.0);
        matvec_t_acc(&p[off.w2..off.w2 + d_out * h], dor, &mut dhid);
        for (dh, &v) in dhid.iter_mut().zip(pr) {
            if v <= 0.0 {
                *dh = 0.0;
            }
        }
        for (gb, d) in g[off.b1..off.b1 + h].iter_mut().zip(&dhid) {
            *gb += d;
        }
        let xr = &x[r * d_in..(r + 1) * d_in];
        outer_acc(&mut g[off.w1..off.w1 + h * d_in], &dhid, xr);
        matvec_t_acc(&p[off.w1..off.w1 + h * d_in], &dhid, &mut dx[r * d_in..(r + 1) * d_in]);
    }
    dx
}

/// Intermediate values of one head of one half-aggregation.
#[derive(Debug, Clone)]
pub struct HalfTrace {
    center: Vec<f64>,
    nbr: Vec<f64>,
    s_item: Vec<f64>,
    s_self: Vec<f64>,
    /// Attention coefficient of every neighbour item, CSR order.
    pub alpha_item: Vec<f64>,
    /// Attention coefficient of every center's self term.
    pub alpha_self: Vec<f64>,
    pre: Vec<f64>,
    pub out: Vec<f64>,
}

fn half_forward(
    p: &[f64],
    off: PassOffsets,
    h: usize,
    center_in: &[f64],
    nbr_in: &[f64],
    groups: &Groups,
    encoder: Encoder,
) -> HalfTrace {
    let nc = center_in.len() / h;
    let nn = nbr_in.len() / h;
    let theta = &p[off.theta..off.theta + h * h];
    let mut center = vec![0.0; nc * h];
    let mut nbr = vec![0.0; nn * h];
    for c in 0..nc {
        matvec(theta, &center_in[c * h..(c + 1) * h], &mut center[c * h..(c + 1) * h]);
    }
    for v in 0..nn {
        matvec(theta, &nbr_in[v * h..(v + 1) * h], &mut nbr[v * h..(v + 1) * h]);
    }
    let n_items = groups.items.len();
    let mut s_item = vec![0.0; n_items];
    let mut s_self = vec![0.0; nc];
    let mut alpha_item = vec![0.0; n_items];
    let mut alpha_self = vec![0.0; nc];
    match encoder {
        Encoder::Attention => {
            let a = &p[off.attn..off.attn + 3 * h];
            let (a1, a2, a3) = (&a[..h], &a[h..2 * h], &a[2 * h..]);
            let aw = dot(a3, &p[off.edge_w..off.edge_w + h]);
            let ab = dot(a3, &p[off.edge_b..off.edge_b + h]);
            let nbr_score: Vec<f64> = (0..nn).map(|v| dot(a2, &nbr[v * h..(v + 1) * h])).collect();
            for c in 0..nc {
                let cr = &center[c * h..(c + 1) * h];
                let base = dot(a1, cr);
                let ss = base + dot(a2, cr) + ab;
                s_self[c] = ss;
                let range = groups.ptr[c]..groups.ptr[c + 1];
                let mut mx = leaky(ss);
                for t in range.clone() {
                    let (v, f) = groups.items[t];
                    let s = base + nbr_score[v] + f * aw + ab;
                    s_item[t] = s;
                    mx = mx.max(leaky(s));
                }
                let es = (leaky(ss) - mx).exp();
                let mut z = es;
                for t in range.clone() {
                    let e = (leaky(s_item[t]) - mx).exp();
                    alpha_item[t] = e;
                    z += e;
                }
                alpha_self[c] = es / z;
                for t in range {
                    alpha_item[t] /= z;
                }
            }
        }
        Encoder::MeanPool => {
            for c in 0..nc {
                let range = groups.ptr[c]..groups.ptr[c + 1];
                let w = 1.0 / (range.len() as f64 + 1.0);
                alpha_self[c] = w;
                for t in range {
                    alpha_item[t] = w;
                }
            }
        }
    }
    let mut pre = vec![0.0; nc * h];
    let mut out = vec![0.0; nc * h];
    for c in 0..nc {
        let pr = &mut pre[c * h..(c + 1) * h];
        let a = alpha_self[c];
        for (o, v) in pr.iter_mut().zip(&center[c * h..(c + 1) * h]) {
            *o = a * v;
        }
        for t in groups.ptr[c]..groups.ptr[c + 1] {
            let (v, _) = groups.items[t];
            let a = alpha_item[t];
            for (o, x) in pr.iter_mut().zip(&nbr[v * h..(v + 1) * h]) {
                *o += a * x;
            }
        }
        for (o, &x) in out[c * h..(c + 1) * h].iter_mut().zip(pr.iter()) {
            *o = leaky(x);
        }
    }
    HalfTrace {
        center,
        nbr,
        s_item,
        s_self,
        alpha_item,
        alpha_self,
        pre,
        out,
    }
}

/// Returns (d center_in, d nbr_in) and accumulates parameter gradients.
#[allow(clippy::too_many_arguments)]
fn half_backward(
    p: &[f64],
    g: &mut [f64],
    off: PassOffsets,
    h: usize,
    center_in: &[f64],
    nbr_in: &[f64],
    groups: &Groups,
    tr: &HalfTrace,
    dout: &[f64],
    encoder: Encoder,
) -> (Vec<f64>, Vec<f64>) {
    let nc = center_in.len() / h;
    let nn = nbr_in.len() / h;
    let mut d_center = vec![0.0; nc * h];
    let mut d_nbr = vec![0.0; nn * h];
    let attention = encoder == Encoder::Attention;
    let a = &p[off.attn..off.attn + 3 * h];
    let (a1, a2, a3) = (&a[..h], &a[h..2 * h], &a[2 * h..]);
    let mut da1 = vec![0.0; h];
    let mut da2 = vec![0.0; h];
    let mut sum_ds = 0.0;
    let mut sum_ds_f = 0.0;
    let mut dpre = vec![0.0; h];
    let mut d_alpha: Vec<f64> = Vec::new();
    let mut nbr_ds = vec![0.0; nn];

    for c in 0..nc {
        let dor = &dout[c * h..(c + 1) * h];
        if dor.iter().all(|&v| v == 0.0) {
            continue;
        }
        for ((d, &o), &x) in dpre.iter_mut().zip(dor).zip(&tr.pre[c * h..(c + 1) * h]) {
            *d = o * dleaky(x);
        }
        let cr = &tr.center[c * h..(c + 1) * h];
        let range = groups.ptr[c]..groups.ptr[c + 1];
        let a_self = tr.alpha_self[c];
        for (d, &x) in d_center[c * h..(c + 1) * h].iter_mut().zip(dpre.iter()) {
            *d += a_self * x;
        }
        for t in range.clone() {
            let (v, _) = groups.items[t];
            let at = tr.alpha_item[t];
            for (d, &x) in d_nbr[v * h..(v + 1) * h].iter_mut().zip(dpre.iter()) {
                *d += at * x;
            }
        }
        if !attention {
            continue;
        }
        // Softmax backward over {self} ∪ neighbours.
        let da_self = dot(&dpre, cr);
        d_alpha.clear();
        let mut weighted = a_self * da_self;
        for t in range.clone() {
            let (v, _) = groups.items[t];
            let da = dot(&dpre, &tr.nbr[v * h..(v + 1) * h]);
            weighted += tr.alpha_item[t] * da;
            d_alpha.push(da);
        }
        let ds_self = a_self * (da_self - weighted) * dleaky(tr.s_self[c]);
        let mut group_ds = ds_self;
        for (k, t) in range.enumerate() {
            let (v, f) = groups.items[t];
            let ds = tr.alpha_item[t] * (d_alpha[k] - weighted) * dleaky(tr.s_item[t]);
            group_ds += ds;
            nbr_ds[v] += ds;
            sum_ds_f += ds * f;
        }
        sum_ds += group_ds;
        // s_self = a1·C + a2·C + a3·eb ; s_item = a1·C + a2·N + a3·(ew f + eb)
        for r in 0..h {
            d_center[c * h + r] += group_ds * a1[r] + ds_self * a2[r];
            da1[r] += group_ds * cr[r];
            da2[r] += ds_self * cr[r];
        }
    }
    if attention {
        for v in 0..nn {
            let ds = nbr_ds[v];
            if ds != 0.0 {
                let nr = &tr.nbr[v * h..(v + 1) * h];
                for r in 0..h {
                    d_nbr[v * h + r] += ds * a2[r];
                    da2[r] += ds * nr[r];
                }
            }
        }
        let ew = &p[off.edge_w..off.edge_w + h];
        let eb = &p[off.edge_b..off.edge_b + h];
        for r in 0..h {
            g[off.attn + r] += da1[r];
            g[off.attn + h + r] += da2[r];
            g[off.attn + 2 * h + r] += sum_ds_f * ew[r] + sum_ds * eb[r];
            g[off.edge_w + r] += sum_ds_f * a3[r];
            g[off.edge_b + r] += sum_ds * a3[r];
        }
    }
    let theta = &p[off.theta..off.theta + h * h];
    let mut d_center_in = vec![0.0; nc * h];
    let mut d_nbr_in = vec![0.0; nn * h];
    {
        let gt = &mut g[off.theta..off.theta + h * h];
        for c in 0..nc {
            let dc = &d_center[c * h..(c + 1) * h];
            outer_acc(gt, dc, &center_in[c * h..(c + 1) * h]);
        }
        for v in 0..nn {
            let dn = &d_nbr[v * h..(v + 1) * h];
            outer_acc(gt, dn, &nbr_in[v * h..(v + 1) * h]);
        }
    }
    for c in 0..nc {
        matvec_t_acc(theta, &d_center[c * h..(c + 1) * h], &mut d_center_in[c * h..(c + 1) * h]);
    }
    for v in 0..nn {
        matvec_t_acc(theta, &d_nbr[v * h..(v + 1) * h], &mut d_nbr_in[v * h..(v + 1) * h]);
    }
    (d_center_in, d_nbr_in)
}

/// Everything the backward pass needs from a forward evaluation.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub encoder: Encoder,
    con_groups: Groups,
    var_groups: Groups,
    var_emb: MlpTrace,
    con_emb: MlpTrace,
    /// Per head: variable → constraint half-aggregation.
    pub con_heads: Vec<HalfTrace>,
    /// Per head: constraint → variable half-aggregation, evaluated at the
    /// candidate variables (in candidate order); other variables cannot
    /// influence the logits after a single round.
    pub var_heads: Vec<HalfTrace>,
    pub candidates: Vec<usize>,
    cand_emb: Vec<f64>,
    head_in: Vec<f64>,
    head: MlpTrace,
    pub logits: Vec<f64>,
}

impl ForwardTrace {
    /// Smallest distance of any ReLU/LeakyReLU input from its kink. Finite
    /// difference checks are only meaningful when this exceeds the step.
    pub fn kink_margin(&self) -> f64 {
        let mut all: Vec<&[f64]> = vec![&self.var_emb.pre, &self.con_emb.pre, &self.head.pre];
        for t in self.con_heads.iter().chain(&self.var_heads) {
            all.push(&t.pre);
            if self.encoder == Encoder::Attention {
                all.push(&t.s_item);
                all.push(&t.s_self);
            }
        }
        all.iter()
            .flat_map(|v| v.iter())
            .fold(f64::INFINITY, |m, x| m.min(x.abs()))
    }

    /// Sum of attention coefficients of every node, for each head of both
    /// passes: (constraint sums, variable sums).
    pub fn attention_sums(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let sums = |tr: &HalfTrace, groups: &Groups| -> Vec<f64> {
            (0..tr.alpha_self.len())
                .map(|c| {
                    tr.alpha_self[c]
                        + tr.alpha_item[groups.ptr[c]..groups.ptr[c + 1]]
                            .iter()
                            .sum::<f64>()
                })
                .collect()
        };
        (
            self.con_heads.iter().map(|t| sums(t, &self.con_groups)).collect(),
            self.var_heads.iter().map(|t| sums(t, &self.var_groups)).collect(),
        )
    }
}

pub fn forward_with(params: &GatParams, state: &BranchState, encoder: Encoder) -> ForwardTrace {
    let cfg = params.config();
    let (h, k) = (cfg.hidden, cfg.heads);
    debug_assert_eq!(cfg.var_feats, VAR_FEATS);
    debug_assert_eq!(cfg.con_feats, CON_FEATS);
    let p = params.flatten();
    let lay = &params.layout;
    let candidates = state.candidates();
    let (con_groups, var_groups) = build_groups(state, &candidates);
    let var_emb = mlp_forward(p, lay.var_emb, &state.var_feats, cfg.var_feats, h, h);
    let con_emb = mlp_forward(p, lay.con_emb, &state.con_feats, cfg.con_feats, h, h);

    let con_heads: Vec<HalfTrace> = (0..k)
        .map(|hd| half_forward(p, lay.con_pass[hd], h, &con_emb.out, &var_emb.out, &con_groups, encoder))
        .collect();
    let mut cand_emb = Vec::with_capacity(candidates.len() * h);
    for &j in &candidates {
        cand_emb.extend_from_slice(&var_emb.out[j * h..(j + 1) * h]);
    }
    let var_heads: Vec<HalfTrace> = (0..k)
        .map(|hd| {
            half_forward(
                p,
                lay.var_pass[hd],
                h,
                &cand_emb,
                &con_heads[hd].out,
                &var_groups,
                encoder,
            )
        })
        .collect();

    let kh = k * h;
    let mut head_in = vec![0.0; candidates.len() * kh];
    for ci in 0..candidates.len() {
        for (hd, vt) in var_heads.iter().enumerate() {
            head_in[ci * kh + hd * h..ci * kh + (hd + 1) * h].copy_from_slice(&vt.out[ci * h..(ci + 1) * h]);
        }
    }
    let head = mlp_forward(p, lay.out, &head_in, kh, h, 1);
    let logits = head.out.clone();
    ForwardTrace {
        encoder,
        con_groups,
        var_groups,
        var_emb,
        con_emb,
        con_heads,
        var_heads,
        candidates,
        cand_emb,
        head_in,
        head,
        logits,
    }
}

/// Attention forward pass; logits are over candidates in ascending variable
/// order.
pub fn forward(params: &GatParams, state: &BranchState) -> (Vec<f64>, ForwardTrace) {
    let tr = forward_with(params, state, Encoder::Attention);
    (tr.logits.clone(), tr)
}

/// Logits of the mean-pool variant (uniform attention).
pub fn mean_pool_mode(params: &GatParams, state: &BranchState) -> Vec<f64> {
    forward_with(params, state, Encoder::MeanPool).logits
}

pub fn logits(params: &GatParams, state: &BranchState, encoder: Encoder) -> Vec<f64> {
    forward_with(params, state, encoder).logits
}

/// Numerically stable softmax.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let mx = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - mx).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Probability distribution over the state's candidates.
pub fn policy(params: &GatParams, state: &BranchState) -> Vec<f64> {
    softmax(&forward(params, state).1.logits)
}

/// Gradient of a scalar loss with respect to every parameter, given the
/// loss gradient with respect to the candidate logits.
pub fn backward(params: &GatParams, state: &BranchState, trace: &ForwardTrace, dlogits: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; params.len()];
    backward_acc(params, state, trace, dlogits, &mut g);
    g
}

/// Like [`backward`] but adds into `grad`.
pub fn backward_acc(params: &GatParams, state: &BranchState, trace: &ForwardTrace, dlogits: &[f64], grad: &mut [f64]) {
    assert_eq!(dlogits.len(), trace.logits.len(), "dlogits length");
    assert_eq!(grad.len(), params.len(), "gradient length");
    if dlogits.iter().all(|&v| v == 0.0) {
        return;
    }
    let cfg = params.config();
    let (h, k) = (cfg.hidden, cfg.heads);
    let kh = k * h;
    let p = params.flatten();
    let lay = &params.layout;
    let g = grad;

    let d_head_in = mlp_backward(p, g, lay.out, &trace.head_in, &trace.head, dlogits, kh, h, 1);

    let n = state.num_vars;
    let m = state.num_cons;
    let mut d_v0 = vec![0.0; n * h];
    let mut d_c0 = vec![0.0; m * h];
    for hd in 0..k {
        let nc = trace.candidates.len();
        let mut d_v1 = vec![0.0; nc * h];
        for ci in 0..nc {
            d_v1[ci * h..(ci + 1) * h].copy_from_slice(&d_head_in[ci * kh + hd * h..ci * kh + (hd + 1) * h]);
        }
        let (dv, dc1) = half_backward(
            p,
            g,
            lay.var_pass[hd],
            h,
            &trace.cand_emb,
            &trace.con_heads[hd].out,
            &trace.var_groups,
            &trace.var_heads[hd],
            &d_v1,
            trace.encoder,
        );
        for (ci, &j) in trace.candidates.iter().enumerate() {
            for (a, b) in d_v0[j * h..(j + 1) * h].iter_mut().zip(&dv[ci * h..(ci + 1) * h]) {
                *a += b;
            }
        }
        let (dc, dv) = half_backward(
            p,
            g,
            lay.con_pass[hd],
            h,
            &trace.con_emb.out,
            &trace.var_emb.out,
            &trace.con_groups,
            &trace.con_heads[hd],
            &dc1,
            trace.encoder,
        );
        for (a, b) in d_c0.iter_mut().zip(&dc) {
            *a += b;
        }
        for (a, b) in d_v0.iter_mut().zip(&dv) {
            *a += b;
        }
    }
    mlp_backward(p, g, lay.var_emb, &state.var_feats, &trace.var_emb, &d_v0, cfg.var_feats, h, h);
    mlp_backward(p, g, lay.con_emb, &state.con_feats, &trace.con_emb, &d_c0, cfg.con_feats, h, h);
}
