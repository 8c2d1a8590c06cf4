//! Bounded-variable primal simplex.
//!
//! Rows are turned into equalities with one slack per row (`A x + s = b`,
//! `s >= 0`). Nonbasic columns sit at one of their bounds (or at zero when
//! free), so branching only ever edits bounds and a parent basis stays a valid
//! starting point for its children.
//!
//! Feasibility is restored with a composite phase 1 that minimizes the sum of
//! bound violations of the basic variables. The same loop handles cold starts,
//! warm starts with bound changes and numerical drift after refactorization.
//! Pricing is Dantzig's rule; after [`BLAND_AFTER`] consecutive degenerate
//! pivots it switches to Bland's rule until the objective moves again.
//!
//! Dual values follow the `y <= 0` convention for `<=` rows of a minimization.

use crate::milp::LpProblem;

pub const FEAS_TOL: f64 = 1e-7;
pub const OPT_TOL: f64 = 1e-7;
pub const PIVOT_TOL: f64 = 1e-10;
pub const REFACTOR_EVERY: usize = 100;
pub const BLAND_AFTER: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Iteration limit reached before a status was proven.
    Stalled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum BasisStatus {
    AtLower,
    Basic,
    AtUpper,
    /// Nonbasic free variable resting at zero.
    FixedZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Nonbasic {
    Lower,
    Upper,
    Free,
    Basic,
}

/// Warm-start handle: which columns (structurals first, then slacks) are
/// basic and where the nonbasic ones rest.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    basic: Vec<usize>,
    state: Vec<Nonbasic>,
}

impl Basis {
    pub fn basic_columns(&self) -> &[usize] {
        &self.basic
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub basis_status: Vec<BasisStatus>,
    /// Row slack `b - A x` is at most [`FEAS_TOL`].
    pub row_tight: Vec<bool>,
    pub iterations: usize,
    /// Final basis, usable as a warm start. `None` when the LP was rejected
    /// before any simplex work (empty domain).
    pub basis: Option<Basis>,
}

impl LpSolution {
    fn empty(status: LpStatus, n: usize, m: usize) -> Self {
        Self {
            status,
            x: vec![0.0; n],
            objective: match status {
                LpStatus::Infeasible => f64::INFINITY,
                LpStatus::Unbounded => f64::NEG_INFINITY,
                _ => f64::NAN,
            },
            duals: vec![0.0; m],
            reduced_costs: vec![0.0; n],
            basis_status: vec![BasisStatus::AtLower; n],
            row_tight: vec![false; m],
            iterations: 0,
            basis: None,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Solves with the default iteration limit `50 * (n + m)`.
pub fn solve(lp: &LpProblem<'_>, warm: Option<&Basis>) -> LpSolution {
    let limit = 50 * (lp.num_vars() + lp.num_rows()).max(1);
    solve_with_limit(lp, warm, limit)
}

/// Solves the child LP obtained by applying `patch` to `lp`.
pub fn solve_child(
    lp: &LpProblem<'_>,
    patch: &crate::milp::VarDomainPatch,
    warm: Option<&Basis>,
) -> LpSolution {
    solve(&lp.patched(patch), warm)
}

pub fn solve_with_limit(lp: &LpProblem<'_>, warm: Option<&Basis>, max_iter: usize) -> LpSolution {
    let n = lp.num_vars();
    let m = lp.num_rows();
    if lp.empty_domain.is_some() {
        return LpSolution::empty(LpStatus::Infeasible, n, m);
    }
    let mut s = Simplex::new(lp, warm);
    let status = s.run(max_iter);
    s.finish(status)
}

struct Simplex<'p, 'a> {
    lp: &'p LpProblem<'a>,
    n: usize,
    m: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    basic: Vec<usize>,
    state: Vec<Nonbasic>,
    /// Row-major dense inverse of the basis matrix.
    binv: Vec<f64>,
    since_refactor: usize,
    iterations: usize,
    degenerate_run: usize,
    bland: bool,
    // scratch
    y: Vec<f64>,
    alpha: Vec<f64>,
    cb: Vec<f64>,
}

impl<'p, 'a> Simplex<'p, 'a> {
    fn new(lp: &'p LpProblem<'a>, warm: Option<&Basis>) -> Self {
        let n = lp.num_vars();
        let m = lp.num_rows();
        let total = n + m;
        let mut lo = lp.lower.clone();
        let mut hi = lp.upper.clone();
        lo.extend(std::iter::repeat_n(0.0, m));
        hi.extend(std::iter::repeat_n(f64::INFINITY, m));
        let mut cost = lp.inst.obj().to_vec();
        cost.extend(std::iter::repeat_n(0.0, m));

        let mut s = Self {
            lp,
            n,
            m,
            lo,
            hi,
            cost,
            x: vec![0.0; total],
            basic: Vec::new(),
            state: vec![Nonbasic::Lower; total],
            binv: Vec::new(),
            since_refactor: 0,
            iterations: 0,
            degenerate_run: 0,
            bland: false,
            y: vec![0.0; m],
            alpha: vec![0.0; m],
            cb: vec![0.0; m],
        };

        let warm_ok = match warm {
            Some(b) if b.basic.len() == m && b.state.len() == total => {
                s.basic = b.basic.clone();
                s.state = b.state.clone();
                s.place_nonbasic();
                s.refactor()
            }
            _ => false,
        };
        if !warm_ok {
            s.slack_basis();
        }
        s.compute_basic_values();
        s
    }

    fn slack_basis(&mut self) {
        let (n, m) = (self.n, self.m);
        self.basic = (n..n + m).collect();
        for j in 0..n {
            self.state[j] = Nonbasic::Lower;
        }
        for j in n..n + m {
            self.state[j] = Nonbasic::Basic;
        }
        self.place_nonbasic();
        self.binv = vec![0.0; m * m];
        for i in 0..m {
            self.binv[i * m + i] = 1.0;
        }
        self.since_refactor = 0;
    }

    /// Puts every nonbasic column on the bound its state names, falling back
    /// to whichever bound is finite.
    fn place_nonbasic(&mut self) {
        for j in 0..self.n + self.m {
            let (l, u) = (self.lo[j], self.hi[j]);
            let st = match self.state[j] {
                Nonbasic::Basic => continue,
                Nonbasic::Upper if u.is_finite() => Nonbasic::Upper,
                _ if l.is_finite() => Nonbasic::Lower,
                _ if u.is_finite() => Nonbasic::Upper,
                _ => Nonbasic::Free,
            };
            self.state[j] = st;
            self.x[j] = match st {
                Nonbasic::Lower => l,
                Nonbasic::Upper => u,
                _ => 0.0,
            };
        }
    }

    fn column(&self, j: usize) -> ColumnIter<'_> {
        if j < self.n {
            ColumnIter::Structural(self.lp.inst.cols()[j].iter())
        } else {
            ColumnIter::Slack(Some(j - self.n))
        }
    }

    /// Rebuilds the dense inverse from the current basic columns by
    /// Gauss-Jordan elimination with partial pivoting.
    fn refactor(&mut self) -> bool {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for (k, &j) in self.basic.iter().enumerate() {
            for (i, v) in self.column(j) {
                a[i * m + k] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let mut piv = col;
            let mut best = a[col * m + col].abs();
            for r in col + 1..m {
                let v = a[r * m + col].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best < 1e-11 {
                return false;
            }
            if piv != col {
                for c in 0..m {
                    a.swap(piv * m + c, col * m + c);
                    inv.swap(piv * m + c, col * m + c);
                }
            }
            let d = a[col * m + col];
            for c in 0..m {
                a[col * m + c] /= d;
                inv[col * m + c] /= d;
            }
            for r in 0..m {
                if r == col {
                    continue;
                }
                let f = a[r * m + col];
                if f != 0.0 {
                    for c in 0..m {
                        a[r * m + c] -= f * a[col * m + c];
                        inv[r * m + c] -= f * inv[col * m + c];
                    }
                }
            }
        }
        // Row k of B^-1 belongs to basic position k.
        self.binv = inv;
        self.since_refactor = 0;
        true
    }

    fn compute_basic_values(&mut self) {
        let m = self.m;
        let mut r: Vec<f64> = self.lp.inst.rhs().to_vec();
        for j in 0..self.n + self.m {
            if self.state[j] != Nonbasic::Basic && self.x[j] != 0.0 {
                let xj = self.x[j];
                for (i, v) in self.column(j) {
                    r[i] -= v * xj;
                }
            }
        }
        for k in 0..m {
            let row = &self.binv[k * m..(k + 1) * m];
            let v: f64 = row.iter().zip(&r).map(|(a, b)| a * b).sum();
            self.x[self.basic[k]] = v;
        }
    }

    fn infeasibility(&self, k: usize) -> f64 {
        let j = self.basic[k];
        let v = self.x[j];
        if v < self.lo[j] - FEAS_TOL {
            self.lo[j] - v
        } else if v > self.hi[j] + FEAS_TOL {
            v - self.hi[j]
        } else {
            0.0
        }
    }

    fn compute_duals(&mut self, phase1: bool) {
        let m = self.m;
        for k in 0..m {
            let j = self.basic[k];
            self.cb[k] = if phase1 {
                let v = self.x[j];
                if v < self.lo[j] - FEAS_TOL {
                    -1.0
                } else if v > self.hi[j] + FEAS_TOL {
                    1.0
                } else {
                    0.0
                }
            } else {
                self.cost[j]
            };
        }
        self.y.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..m {
            let c = self.cb[k];
            if c != 0.0 {
                let row = &self.binv[k * m..(k + 1) * m];
                for (yi, b) in self.y.iter_mut().zip(row) {
                    *yi += c * b;
                }
            }
        }
    }

    fn reduced_cost(&self, j: usize, phase1: bool) -> f64 {
        let c = if phase1 { 0.0 } else { self.cost[j] };
        c - self.column(j).map(|(i, v)| self.y[i] * v).sum::<f64>()
    }

    fn compute_alpha(&mut self, q: usize) {
        let m = self.m;
        self.alpha.iter_mut().for_each(|v| *v = 0.0);
        let col: Vec<(usize, f64)> = self.column(q).collect();
        for k in 0..m {
            let row = &self.binv[k * m..(k + 1) * m];
            self.alpha[k] = col.iter().map(|&(i, v)| row[i] * v).sum();
        }
    }

    fn run(&mut self, max_iter: usize) -> LpStatus {
        let mut rechecks = 0;
        loop {
            if self.iterations >= max_iter {
                return LpStatus::Stalled;
            }
            if self.since_refactor >= REFACTOR_EVERY {
                if !self.refactor() {
                    self.slack_basis();
                }
                self.compute_basic_values();
            }
            let phase1 = (0..self.m).any(|k| self.infeasibility(k) > 0.0);
            self.compute_duals(phase1);

            // Pricing.
            let mut entering: Option<(usize, f64, f64)> = None; // (col, d, dir)
            for j in 0..self.n + self.m {
                let st = self.state[j];
                if st == Nonbasic::Basic || self.lo[j] == self.hi[j] {
                    continue;
                }
                let d = self.reduced_cost(j, phase1);
                let dir = if d < -OPT_TOL && matches!(st, Nonbasic::Lower | Nonbasic::Free) {
                    1.0
                } else if d > OPT_TOL && matches!(st, Nonbasic::Upper | Nonbasic::Free) {
                    -1.0
                } else {
                    continue;
                };
                let better = match entering {
                    None => true,
                    Some((_, bd, _)) => !self.bland && d.abs() > bd.abs(),
                };
                if better {
                    entering = Some((j, d, dir));
                    if self.bland {
                        break;
                    }
                }
            }

            let Some((q, _d, dir)) = entering else {
                // Confirm on a fresh factorization before concluding.
                if self.since_refactor > 0 && rechecks < 3 {
                    rechecks += 1;
                    if !self.refactor() {
                        self.slack_basis();
                    }
                    self.compute_basic_values();
                    continue;
                }
                return if phase1 {
                    LpStatus::Infeasible
                } else {
                    LpStatus::Optimal
                };
            };

            self.compute_alpha(q);
            let step = self.ratio_test(dir, phase1);
            self.iterations += 1;

            let flip = self.hi[q] - self.lo[q];
            match step {
                None if !flip.is_finite() => {
                    return if phase1 {
                        LpStatus::Stalled
                    } else {
                        LpStatus::Unbounded
                    };
                }
                Some((t, _, _)) if flip.is_finite() && flip <= t => {
                    self.bound_flip(q, dir, flip);
                }
                None => self.bound_flip(q, dir, flip),
                Some((t, k, leave_upper)) => self.pivot(q, dir, t, k, leave_upper),
            }
        }
    }

    /// Returns (step length, leaving basic position, leaves at upper bound).
    fn ratio_test(&self, dir: f64, phase1: bool) -> Option<(f64, usize, bool)> {
        let mut best: Option<(f64, usize, bool)> = None;
        let mut best_alpha = 0.0;
        for k in 0..self.m {
            let a = self.alpha[k];
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            let j = self.basic[k];
            let rate = -dir * a;
            let v = self.x[j];
            let (l, u) = (self.lo[j], self.hi[j]);
            let (limit, at_upper) = if rate < 0.0 {
                if v > u + FEAS_TOL {
                    ((v - u) / -rate, true)
                } else if v >= l - FEAS_TOL && l.is_finite() {
                    ((v - l) / -rate, false)
                } else {
                    continue;
                }
            } else if v < l - FEAS_TOL {
                ((l - v) / rate, false)
            } else if v <= u + FEAS_TOL && u.is_finite() {
                ((u - v) / rate, true)
            } else {
                continue;
            };
            debug_assert!(phase1 || v >= l - FEAS_TOL && v <= u + FEAS_TOL);
            let limit = limit.max(0.0);
            let take = match best {
                None => true,
                Some((bt, bk, _)) => {
                    if limit < bt - 1e-12 {
                        true
                    } else if limit <= bt + 1e-12 {
                        if self.bland {
                            j < self.basic[bk]
                        } else {
                            a.abs() > best_alpha
                        }
                    } else {
                        false
                    }
                }
            };
            if take {
                best = Some((limit, k, at_upper));
                best_alpha = a.abs();
            }
        }
        best
    }

    fn note_progress(&mut self, t: f64) {
        if t > 1e-12 {
            self.degenerate_run = 0;
            self.bland = false;
        } else {
            self.degenerate_run += 1;
            if self.degenerate_run >= BLAND_AFTER {
                self.bland = true;
            }
        }
    }

    fn bound_flip(&mut self, q: usize, dir: f64, flip: f64) {
        for k in 0..self.m {
            let j = self.basic[k];
            self.x[j] -= dir * flip * self.alpha[k];
        }
        if dir > 0.0 {
            self.x[q] = self.hi[q];
            self.state[q] = Nonbasic::Upper;
        } else {
            self.x[q] = self.lo[q];
            self.state[q] = Nonbasic::Lower;
        }
        self.note_progress(flip);
    }

    fn pivot(&mut self, q: usize, dir: f64, t: f64, r: usize, leave_upper: bool) {
        let m = self.m;
        for k in 0..m {
            let j = self.basic[k];
            self.x[j] -= dir * t * self.alpha[k];
        }
        let leaving = self.basic[r];
        self.x[leaving] = if leave_upper {
            self.hi[leaving]
        } else {
            self.lo[leaving]
        };
        self.state[leaving] = if leave_upper {
            Nonbasic::Upper
        } else {
            Nonbasic::Lower
        };
        self.x[q] += dir * t;
        self.state[q] = Nonbasic::Basic;
        self.basic[r] = q;

        let piv = self.alpha[r];
        {
            let (head, tail) = self.binv.split_at_mut(r * m);
            let (prow, rest) = tail.split_at_mut(m);
            prow.iter_mut().for_each(|v| *v /= piv);
            for (k, chunk) in head.chunks_mut(m).enumerate() {
                let f = self.alpha[k];
                if f != 0.0 {
                    chunk.iter_mut().zip(prow.iter()).for_each(|(a, b)| *a -= f * b);
                }
            }
            for (k, chunk) in rest.chunks_mut(m).enumerate() {
                let f = self.alpha[r + 1 + k];
                if f != 0.0 {
                    chunk.iter_mut().zip(prow.iter()).for_each(|(a, b)| *a -= f * b);
                }
            }
        }
        self.since_refactor += 1;
        self.note_progress(t);
    }

    fn finish(mut self, status: LpStatus) -> LpSolution {
        let (n, m) = (self.n, self.m);
        if status != LpStatus::Optimal {
            let mut sol = LpSolution::empty(status, n, m);
            sol.iterations = self.iterations;
            sol.x = self.x[..n].to_vec();
            sol.basis = Some(Basis {
                basic: self.basic,
                state: self.state,
            });
            return sol;
        }
        self.compute_duals(false);
        let mut reduced_costs = vec![0.0; n];
        let mut basis_status = vec![BasisStatus::AtLower; n];
        for j in 0..n {
            basis_status[j] = match self.state[j] {
                Nonbasic::Basic => BasisStatus::Basic,
                Nonbasic::Lower => BasisStatus::AtLower,
                Nonbasic::Upper => BasisStatus::AtUpper,
                Nonbasic::Free => BasisStatus::FixedZero,
            };
            reduced_costs[j] = if self.state[j] == Nonbasic::Basic {
                0.0
            } else {
                self.reduced_cost(j, false)
            };
        }
        let x: Vec<f64> = self.x[..n].to_vec();
        let objective = self.lp.inst.objective(&x);
        let row_tight = (0..m).map(|i| self.x[n + i] <= FEAS_TOL).collect();
        LpSolution {
            status,
            x,
            objective,
            duals: self.y.clone(),
            reduced_costs,
            basis_status,
            row_tight,
            iterations: self.iterations,
            basis: Some(Basis {
                basic: self.basic,
                state: self.state,
            }),
        }
    }
}

enum ColumnIter<'c> {
    Structural(std::slice::Iter<'c, (usize, f64)>),
    Slack(Option<usize>),
}

impl Iterator for ColumnIter<'_> {
    type Item = (usize, f64);
    fn next(&mut self) -> Option<(usize, f64)> {
        match self {
            ColumnIter::Structural(it) => it.next().copied(),
            ColumnIter::Slack(i) => i.take().map(|i| (i, 1.0)),
        }
    }
}
