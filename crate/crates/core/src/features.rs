//! Bipartite state encoding of a branch-and-bound node.
//!
//! Variable rows (19 columns, in order):
//! type one-hot (binary, integer, implied integer, continuous), objective
//! coefficient, has_lb, has_ub, sol_is_at_lb, sol_is_at_ub, sol_frac, basis
//! status one-hot (lower, basic, upper, zero), reduced cost, age, solution
//! value, incumbent value, average incumbent value.
//!
//! Constraint rows (5 columns): cosine similarity with the objective, bias,
//! dual value, tightness, age.
//!
//! Normalizations:
//! - objective coefficient and reduced cost are divided by `‖c‖`;
//! - edge coefficients and the bias are divided by the row's L2 norm;
//! - the dual value is `y_i ‖a_i‖ / ‖c‖`, which is invariant to positive row
//!   scaling;
//! - ages are divided by `lp_solves + 5`.
//!
//! Every division by a norm falls back to 0 when the norm is below `1e-10`.

use serde::{Deserialize, Serialize};

use crate::bnb::{candidates, INT_TOL};
use crate::error::{Error, Result};
use crate::lp::{BasisStatus, LpSolution, FEAS_TOL};
use crate::milp::{LpProblem, MilpInstance};

pub const VAR_FEATS: usize = 19;
pub const CON_FEATS: usize = 5;

pub mod var_col {
    pub const TYPE_BINARY: usize = 0;
    pub const TYPE_INTEGER: usize = 1;
    pub const TYPE_IMPL_INTEGER: usize = 2;
    pub const TYPE_CONTINUOUS: usize = 3;
    pub const COEF: usize = 4;
    pub const HAS_LB: usize = 5;
    pub const HAS_UB: usize = 6;
    pub const SOL_IS_AT_LB: usize = 7;
    pub const SOL_IS_AT_UB: usize = 8;
    pub const SOL_FRAC: usize = 9;
    pub const BASIS_LOWER: usize = 10;
    pub const BASIS_BASIC: usize = 11;
    pub const BASIS_UPPER: usize = 12;
    pub const BASIS_ZERO: usize = 13;
    pub const REDUCED_COST: usize = 14;
    pub const AGE: usize = 15;
    pub const SOL_VAL: usize = 16;
    pub const INC_VAL: usize = 17;
    pub const AVG_INC_VAL: usize = 18;
}

pub mod con_col {
    pub const OBJ_COS_SIM: usize = 0;
    pub const BIAS: usize = 1;
    pub const DUALSOL_VAL: usize = 2;
    pub const IS_TIGHT: usize = 3;
    pub const AGE: usize = 4;
}

const NORM_EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub con: u32,
    pub var: u32,
    pub feat: f64,
}

/// Bipartite graph state. Feature matrices are row-major; edges are sorted
/// by (constraint, variable).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchState {
    pub num_vars: usize,
    pub num_cons: usize,
    pub var_feats: Vec<f64>,
    pub con_feats: Vec<f64>,
    pub edges: Vec<Edge>,
    pub candidate_mask: Vec<bool>,
}

impl BranchState {
    pub fn var_row(&self, j: usize) -> &[f64] {
        &self.var_feats[j * VAR_FEATS..(j + 1) * VAR_FEATS]
    }
    pub fn con_row(&self, i: usize) -> &[f64] {
        &self.con_feats[i * CON_FEATS..(i + 1) * CON_FEATS]
    }
    /// Candidate variable indices in ascending order.
    pub fn candidates(&self) -> Vec<usize> {
        self.candidate_mask
            .iter()
            .enumerate()
            .filter_map(|(j, &c)| c.then_some(j))
            .collect()
    }
    pub fn num_candidates(&self) -> usize {
        self.candidate_mask.iter().filter(|&&c| c).count()
    }

    pub fn check_shape(&self) -> Result<()> {
        let ok = self.var_feats.len() == self.num_vars * VAR_FEATS
            && self.con_feats.len() == self.num_cons * CON_FEATS
            && self.candidate_mask.len() == self.num_vars
            && self
                .edges
                .iter()
                .all(|e| (e.con as usize) < self.num_cons && (e.var as usize) < self.num_vars);
        if ok {
            Ok(())
        } else {
            Err(Error::Shape("inconsistent branch state".into()))
        }
    }
}

/// Per-instance solver statistics feeding the age and incumbent features.
/// Only node LPs are recorded, not strong-branching probes.
#[derive(Debug, Clone)]
pub struct SolverStats {
    pub lp_solves: usize,
    row_age: Vec<u32>,
    var_age: Vec<u32>,
    best: Option<(f64, Vec<f64>)>,
    inc_sum: Vec<f64>,
    inc_count: usize,
}

impl SolverStats {
    pub fn new(inst: &MilpInstance) -> Self {
        Self {
            lp_solves: 0,
            row_age: vec![0; inst.num_rows()],
            var_age: vec![0; inst.num_vars()],
            best: None,
            inc_sum: vec![0.0; inst.num_vars()],
            inc_count: 0,
        }
    }

    pub fn record_lp(&mut self, sol: &LpSolution) {
        if !sol.is_optimal() {
            return;
        }
        self.lp_solves += 1;
        for (age, &tight) in self.row_age.iter_mut().zip(&sol.row_tight) {
            *age = if tight { 0 } else { *age + 1 };
        }
        for (age, st) in self.var_age.iter_mut().zip(&sol.basis_status) {
            *age = match st {
                BasisStatus::AtLower | BasisStatus::AtUpper => *age + 1,
                _ => 0,
            };
        }
    }

    pub fn record_incumbent(&mut self, x: &[f64], objective: f64) {
        for (s, v) in self.inc_sum.iter_mut().zip(x) {
            *s += v;
        }
        self.inc_count += 1;
        if self.best.as_ref().is_none_or(|(o, _)| objective < *o) {
            self.best = Some((objective, x.to_vec()));
        }
    }

    pub fn best_incumbent(&self) -> Option<(f64, &[f64])> {
        self.best.as_ref().map(|(o, x)| (*o, x.as_slice()))
    }
}

fn norm(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|a| a * a).sum::<f64>().sqrt()
}

fn safe_div(a: f64, b: f64) -> f64 {
    if b.abs() < NORM_EPS {
        0.0
    } else {
        a / b
    }
}

/// Encodes a solved node. `lp` carries the node's bounds.
pub fn featurize(
    inst: &MilpInstance,
    lp: &LpProblem<'_>,
    sol: &LpSolution,
    stats: &SolverStats,
) -> Result<BranchState> {
    if !sol.is_optimal() {
        return Err(Error::NotOptimal(format!("{:?}", sol.status)));
    }
    let n = inst.num_vars();
    let m = inst.num_rows();
    let obj = inst.obj();
    let obj_norm = norm(obj.iter().copied());
    let age_den = stats.lp_solves as f64 + 5.0;

    let mut var_feats = vec![0.0; n * VAR_FEATS];
    let inc = stats.best_incumbent();
    for j in 0..n {
        let f = &mut var_feats[j * VAR_FEATS..(j + 1) * VAR_FEATS];
        let (l0, u0) = (inst.lower()[j], inst.upper()[j]);
        let ty = if !inst.is_integral(j) {
            var_col::TYPE_CONTINUOUS
        } else if l0 == 0.0 && u0 == 1.0 {
            var_col::TYPE_BINARY
        } else {
            var_col::TYPE_INTEGER
        };
        f[ty] = 1.0;
        f[var_col::COEF] = safe_div(obj[j], obj_norm);
        let (l, u) = (lp.lower[j], lp.upper[j]);
        let x = sol.x[j];
        f[var_col::HAS_LB] = f64::from(u8::from(l.is_finite()));
        f[var_col::HAS_UB] = f64::from(u8::from(u.is_finite()));
        f[var_col::SOL_IS_AT_LB] = f64::from(u8::from(l.is_finite() && (x - l).abs() <= FEAS_TOL));
        f[var_col::SOL_IS_AT_UB] = f64::from(u8::from(u.is_finite() && (x - u).abs() <= FEAS_TOL));
        if inst.is_integral(j) {
            let frac = x - x.floor();
            f[var_col::SOL_FRAC] = if frac <= INT_TOL || frac >= 1.0 - INT_TOL {
                0.0
            } else {
                frac
            };
        }
        let b = match sol.basis_status[j] {
            BasisStatus::AtLower => var_col::BASIS_LOWER,
            BasisStatus::Basic => var_col::BASIS_BASIC,
            BasisStatus::AtUpper => var_col::BASIS_UPPER,
            BasisStatus::FixedZero => var_col::BASIS_ZERO,
        };
        f[b] = 1.0;
        f[var_col::REDUCED_COST] = safe_div(sol.reduced_costs[j], obj_norm);
        f[var_col::AGE] = f64::from(stats.var_age[j]) / age_den;
        f[var_col::SOL_VAL] = x;
        if let Some((_, best)) = inc {
            f[var_col::INC_VAL] = best[j];
            f[var_col::AVG_INC_VAL] = stats.inc_sum[j] / stats.inc_count as f64;
        }
    }

    let mut con_feats = vec![0.0; m * CON_FEATS];
    let mut edges = Vec::with_capacity(inst.nnz());
    for (i, row) in inst.rows().iter().enumerate() {
        let row_norm = norm(row.iter().map(|&(_, a)| a));
        let dot: f64 = row.iter().map(|&(j, a)| a * obj[j]).sum();
        let f = &mut con_feats[i * CON_FEATS..(i + 1) * CON_FEATS];
        f[con_col::OBJ_COS_SIM] = safe_div(dot, row_norm * obj_norm).clamp(-1.0, 1.0);
        f[con_col::BIAS] = safe_div(inst.rhs()[i], row_norm);
        f[con_col::DUALSOL_VAL] = safe_div(sol.duals[i] * row_norm, obj_norm);
        f[con_col::IS_TIGHT] = f64::from(u8::from(sol.row_tight[i]));
        f[con_col::AGE] = f64::from(stats.row_age[i]) / age_den;

        let mut sorted: Vec<(usize, f64)> = row.clone();
        sorted.sort_unstable_by_key(|&(j, _)| j);
        for (j, a) in sorted {
            edges.push(Edge {
                con: i as u32,
                var: j as u32,
                feat: safe_div(a, row_norm),
            });
        }
    }

    let mut candidate_mask = vec![false; n];
    for j in candidates(&sol.x, inst) {
        candidate_mask[j] = true;
    }
    Ok(BranchState {
        num_vars: n,
        num_cons: m,
        var_feats,
        con_feats,
        edges,
        candidate_mask,
    })
}

/// Random well-formed state with `n` variables, `m` constraints and roughly
/// `density·n·m` edges. At least one variable is a candidate. Used by tests
/// and gradient checks.
pub fn random_state(n: usize, m: usize, density: f64, seed: u64) -> BranchState {
    use rand::Rng as _;
    let mut rng = crate::rng::rng_for(seed, 0);
    let var_feats = (0..n * VAR_FEATS).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let con_feats = (0..m * CON_FEATS).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut edges = Vec::new();
    for i in 0..m {
        for j in 0..n {
            if rng.gen_bool(density) {
                edges.push(Edge {
                    con: i as u32,
                    var: j as u32,
                    feat: rng.gen_range(-1.0..1.0),
                });
            }
        }
    }
    let mut candidate_mask: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
    if n > 0 && !candidate_mask.iter().any(|&c| c) {
        candidate_mask[rng.gen_range(0..n)] = true;
    }
    BranchState {
        num_vars: n,
        num_cons: m,
        var_feats,
        con_feats,
        edges,
        candidate_mask,
    }
}

/// Disjoint union of several states with per-graph offsets.
#[derive(Debug, Clone)]
pub struct BatchedState {
    pub state: BranchState,
    pub var_offsets: Vec<usize>,
    pub con_offsets: Vec<usize>,
    /// Range of each graph's logits inside the union's candidate logits.
    pub cand_ranges: Vec<std::ops::Range<usize>>,
}

pub fn batch(states: &[&BranchState]) -> BatchedState {
    let mut out = BranchState {
        num_vars: 0,
        num_cons: 0,
        var_feats: Vec::new(),
        con_feats: Vec::new(),
        edges: Vec::new(),
        candidate_mask: Vec::new(),
    };
    let mut var_offsets = Vec::with_capacity(states.len());
    let mut con_offsets = Vec::with_capacity(states.len());
    let mut cand_ranges = Vec::with_capacity(states.len());
    let mut cand_start = 0;
    for s in states {
        let (vo, co) = (out.num_vars, out.num_cons);
        var_offsets.push(vo);
        con_offsets.push(co);
        out.var_feats.extend_from_slice(&s.var_feats);
        out.con_feats.extend_from_slice(&s.con_feats);
        out.candidate_mask.extend_from_slice(&s.candidate_mask);
        out.edges.extend(s.edges.iter().map(|e| Edge {
            con: e.con + co as u32,
            var: e.var + vo as u32,
            feat: e.feat,
        }));
        out.num_vars += s.num_vars;
        out.num_cons += s.num_cons;
        let k = s.num_candidates();
        cand_ranges.push(cand_start..cand_start + k);
        cand_start += k;
    }
    BatchedState {
        state: out,
        var_offsets,
        con_offsets,
        cand_ranges,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::solve;
    use crate::milp::relax;

    fn solved(inst: &MilpInstance) -> BranchState {
        let lp = relax(inst, &[]);
        let sol = solve(&lp, None);
        let mut stats = SolverStats::new(inst);
        stats.record_lp(&sol);
        featurize(inst, &lp, &sol, &stats).unwrap()
    }

    #[test]
    fn row_parallel_to_objective_has_unit_cosine() {
        let inst = MilpInstance::new(
            "par",
            2,
            vec![1.0, 2.0],
            vec![vec![(0, 2.0), (1, 4.0)]],
            vec![3.0],
            vec![0.0; 2],
            vec![1.0; 2],
        );
        let s = solved(&inst);
        assert!((s.con_row(0)[con_col::OBJ_COS_SIM] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_objective_gives_zero_cosine() {
        let inst = MilpInstance::new(
            "zero",
            2,
            vec![0.0, 0.0],
            vec![vec![(0, 1.0), (1, 1.0)], vec![(0, -1.0)]],
            vec![1.0, 0.0],
            vec![0.0; 2],
            vec![1.0; 2],
        );
        let s = solved(&inst);
        for i in 0..2 {
            assert_eq!(s.con_row(i)[con_col::OBJ_COS_SIM], 0.0);
        }
        assert!(s.var_feats.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn edge_features_are_row_normalized() {
        let inst = MilpInstance::new(
            "e",
            2,
            vec![-1.0, -1.0],
            vec![vec![(0, 1.0)], vec![(1, 1.0)], vec![(0, 2.0), (1, 2.0)]],
            vec![1.0, 1.0, 4.0],
            vec![0.0; 2],
            vec![5.0; 2],
        );
        let s = solved(&inst);
        let row2: Vec<f64> = s.edges.iter().filter(|e| e.con == 2).map(|e| e.feat).collect();
        let expected = 2.0 / 8f64.sqrt();
        assert_eq!(row2.len(), 2);
        for f in row2 {
            assert!((f - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn non_optimal_lp_is_rejected() {
        let inst = MilpInstance::new(
            "inf",
            1,
            vec![1.0],
            vec![vec![(0, 1.0)], vec![(0, -1.0)]],
            vec![0.0, -1.0],
            vec![0.0],
            vec![1.0],
        );
        let lp = relax(&inst, &[]);
        let sol = solve(&lp, None);
        let stats = SolverStats::new(&inst);
        assert!(matches!(featurize(&inst, &lp, &sol, &stats), Err(Error::NotOptimal(_))));
    }

    #[test]
    fn batch_is_disjoint_union() {
        let a = BranchState {
            num_vars: 3,
            num_cons: 2,
            var_feats: vec![0.5; 3 * VAR_FEATS],
            con_feats: vec![0.1; 2 * CON_FEATS],
            edges: vec![
                Edge { con: 0, var: 0, feat: 1.0 },
                Edge { con: 1, var: 2, feat: 1.0 },
            ],
            candidate_mask: vec![true, false, true],
        };
        let b = BranchState {
            num_vars: 2,
            num_cons: 1,
            var_feats: vec![0.25; 2 * VAR_FEATS],
            con_feats: vec![0.2; CON_FEATS],
            edges: vec![Edge { con: 0, var: 1, feat: -1.0 }],
            candidate_mask: vec![false, true],
        };
        let one = batch(&[&a]);
        assert_eq!(one.state, a);
        let u = batch(&[&a, &b]);
        assert_eq!(u.state.num_vars, 5);
        assert_eq!(u.state.num_cons, 3);
        assert_eq!(u.var_offsets, vec![0, 3]);
        assert_eq!(u.con_offsets, vec![0, 2]);
        assert_eq!(u.cand_ranges, vec![0..2, 2..3]);
        // no edge crosses graphs
        for e in &u.state.edges {
            let g_con = usize::from(e.con >= 2);
            let g_var = usize::from(e.var >= 3);
            assert_eq!(g_con, g_var);
        }
        u.state.check_shape().unwrap();
    }
}
