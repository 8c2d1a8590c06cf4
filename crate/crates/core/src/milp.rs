//! Mixed-integer linear programs in canonical form
//!
//! ```text
//! minimize    c'x
//! subject to  A x <= b
//!             l <= x <= u
//!             x_j integral for j < p
//! ```
//!
//! Every row is a `<=` row; generators negate `>=` rows. Bounds may be
//! infinite in memory and are written as the `±1e20` sentinel on disk.
//!
//! # Text format
//!
//! ```text
//! milp <name> <n> <p> <m>
//! obj
//! <c_0> <c_1> ... <c_{n-1}>
//! bounds
//! <l_0> <u_0>
//! ...                          (n lines)
//! row <b_i> <k> <col> <coef> <col> <coef> ...
//! ...                          (m lines)
//! ```
//!
//! Numbers are plain decimals using the shortest representation that parses
//! back to the same `f64`. Blank lines and lines starting with `#` are ignored
//! on read. `<name>` must not contain whitespace.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// On-disk stand-in for an infinite bound.
pub const INF_SENTINEL: f64 = 1e20;

pub type SparseRow = Vec<(usize, f64)>;

#[derive(Debug, Clone, PartialEq)]
pub struct MilpInstance {
    name: String,
    num_int: usize,
    obj: Vec<f64>,
    rows: Vec<SparseRow>,
    rhs: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    // Column-major copy of `rows`, derived at construction.
    cols: Vec<SparseRow>,
}

impl MilpInstance {
    /// Builds an instance. No validation happens here; call [`validate`].
    /// Entries whose column is out of range are kept in `rows` (so validation
    /// can report them) but left out of the column view.
    pub fn new(
        name: impl Into<String>,
        num_int: usize,
        obj: Vec<f64>,
        rows: Vec<SparseRow>,
        rhs: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
    ) -> Self {
        let n = obj.len();
        let mut cols = vec![Vec::new(); n];
        for (i, row) in rows.iter().enumerate() {
            for &(j, a) in row {
                if j < n {
                    cols[j].push((i, a));
                }
            }
        }
        Self {
            name: name.into(),
            num_int,
            obj,
            rows,
            rhs,
            lower,
            upper,
            cols,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn num_vars(&self) -> usize {
        self.obj.len()
    }
    pub fn num_int(&self) -> usize {
        self.num_int
    }
    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }
    pub fn obj(&self) -> &[f64] {
        &self.obj
    }
    pub fn rows(&self) -> &[SparseRow] {
        &self.rows
    }
    pub fn cols(&self) -> &[SparseRow] {
        &self.cols
    }
    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }
    pub fn lower(&self) -> &[f64] {
        &self.lower
    }
    pub fn upper(&self) -> &[f64] {
        &self.upper
    }
    pub fn is_integral(&self, j: usize) -> bool {
        j < self.num_int
    }
    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Objective value of `x`.
    pub fn objective(&self, x: &[f64]) -> f64 {
        self.obj.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Row activities `A x`.
    pub fn activities(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(j, a)| a * x[j]).sum())
            .collect()
    }

    /// Whether `x` satisfies rows, bounds and integrality within `tol`.
    pub fn is_feasible(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.num_vars() {
            return false;
        }
        let bounds_ok = x.iter().enumerate().all(|(j, &v)| {
            v >= self.lower[j] - tol
                && v <= self.upper[j] + tol
                && (!self.is_integral(j) || (v - v.round()).abs() <= tol)
        });
        bounds_ok
            && self
                .activities(x)
                .iter()
                .zip(&self.rhs)
                .all(|(ax, b)| *ax <= b + tol)
    }
}

/// Reports every invariant violation; a valid instance yields an empty list.
pub fn validate(inst: &MilpInstance) -> Vec<String> {
    let n = inst.num_vars();
    let mut errs = Vec::new();
    if inst.num_int > n {
        errs.push(format!("num_int {} exceeds num_vars {}", inst.num_int, n));
    }
    if inst.lower.len() != n || inst.upper.len() != n {
        errs.push(format!(
            "bound vectors have lengths {}/{}, expected {}",
            inst.lower.len(),
            inst.upper.len(),
            n
        ));
    }
    if inst.rhs.len() != inst.rows.len() {
        errs.push(format!(
            "rhs has length {}, expected {}",
            inst.rhs.len(),
            inst.rows.len()
        ));
    }
    if inst.name.is_empty() || inst.name.chars().any(char::is_whitespace) {
        errs.push(format!("name {:?} must be non-empty without whitespace", inst.name));
    }
    for (j, (&l, &u)) in inst.lower.iter().zip(&inst.upper).enumerate() {
        if l.is_nan() || u.is_nan() {
            errs.push(format!("nan bound var {j}"));
        } else if l > u {
            errs.push(format!("empty domain var {j}"));
        }
        if l == f64::INFINITY || u == f64::NEG_INFINITY {
            errs.push(format!("unsatisfiable infinite bound var {j}"));
        }
    }
    for (j, c) in inst.obj.iter().enumerate() {
        if !c.is_finite() {
            errs.push(format!("non-finite objective coefficient var {j}"));
        }
    }
    for (i, b) in inst.rhs.iter().enumerate() {
        if b.is_nan() {
            errs.push(format!("nan rhs row {i}"));
        }
    }
    for (i, row) in inst.rows.iter().enumerate() {
        let mut seen: Vec<usize> = Vec::with_capacity(row.len());
        for &(j, a) in row {
            if j >= n {
                errs.push(format!("column {j} out of range in row {i}"));
                continue;
            }
            if a == 0.0 {
                errs.push(format!("explicit zero coefficient ({i},{j})"));
            } else if !a.is_finite() {
                errs.push(format!("non-finite coefficient ({i},{j})"));
            }
            seen.push(j);
        }
        seen.sort_unstable();
        for w in seen.windows(2) {
            if w[0] == w[1] {
                errs.push(format!("duplicate coefficient ({i},{})", w[0]));
            }
        }
    }
    errs
}

/// A bound change on one variable, as produced by branching.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct VarDomainPatch {
    pub var: usize,
    pub lower: f64,
    pub upper: f64,
}

impl VarDomainPatch {
    pub fn new(var: usize, lower: f64, upper: f64) -> Self {
        Self { var, lower, upper }
    }

    /// `x_var <= bound`.
    pub fn at_most(var: usize, bound: f64) -> Self {
        Self::new(var, f64::NEG_INFINITY, bound)
    }

    /// `x_var >= bound`.
    pub fn at_least(var: usize, bound: f64) -> Self {
        Self::new(var, bound, f64::INFINITY)
    }

    /// Intersects this patch's interval into `(lower, upper)`.
    pub fn apply(&self, lower: &mut [f64], upper: &mut [f64]) {
        lower[self.var] = lower[self.var].max(self.lower);
        upper[self.var] = upper[self.var].min(self.upper);
    }
}

/// LP relaxation of an instance under a set of bound patches. Problem data is
/// borrowed; only the bounds are owned.
#[derive(Debug, Clone)]
pub struct LpProblem<'a> {
    pub inst: &'a MilpInstance,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// First variable whose patched domain is empty, if any. Such an LP is
    /// infeasible by bounds alone.
    pub empty_domain: Option<usize>,
}

impl<'a> LpProblem<'a> {
    pub fn num_vars(&self) -> usize {
        self.inst.num_vars()
    }
    pub fn num_rows(&self) -> usize {
        self.inst.num_rows()
    }

    /// A copy with one more patch applied.
    pub fn patched(&self, patch: &VarDomainPatch) -> LpProblem<'a> {
        let mut lp = self.clone();
        patch.apply(&mut lp.lower, &mut lp.upper);
        if lp.empty_domain.is_none() && lp.lower[patch.var] > lp.upper[patch.var] {
            lp.empty_domain = Some(patch.var);
        }
        lp
    }
}

/// Drops integrality and applies `patches` by interval intersection.
pub fn relax<'a>(inst: &'a MilpInstance, patches: &[VarDomainPatch]) -> LpProblem<'a> {
    let mut lower = inst.lower.clone();
    let mut upper = inst.upper.clone();
    for p in patches {
        p.apply(&mut lower, &mut upper);
    }
    let empty_domain = (0..lower.len()).find(|&j| lower[j] > upper[j]);
    LpProblem {
        inst,
        lower,
        upper,
        empty_domain,
    }
}

fn fmt_num(out: &mut String, v: f64) {
    if v >= INF_SENTINEL {
        out.push_str("1e20");
    } else if v <= -INF_SENTINEL {
        out.push_str("-1e20");
    } else {
        write!(out, "{v}").unwrap();
    }
}

/// Renders the text format. Output is deterministic, so equal instances give
/// byte-identical text.
pub fn to_text(inst: &MilpInstance) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "milp {} {} {} {}",
        inst.name,
        inst.num_vars(),
        inst.num_int,
        inst.num_rows()
    )
    .unwrap();
    out.push_str("obj\n");
    for (j, &c) in inst.obj.iter().enumerate() {
        if j > 0 {
            out.push(' ');
        }
        fmt_num(&mut out, c);
    }
    out.push_str("\nbounds\n");
    for (&l, &u) in inst.lower.iter().zip(&inst.upper) {
        fmt_num(&mut out, l);
        out.push(' ');
        fmt_num(&mut out, u);
        out.push('\n');
    }
    for (row, &b) in inst.rows.iter().zip(&inst.rhs) {
        out.push_str("row ");
        fmt_num(&mut out, b);
        write!(out, " {}", row.len()).unwrap();
        for &(j, a) in row {
            write!(out, " {j} ").unwrap();
            fmt_num(&mut out, a);
        }
        out.push('\n');
    }
    out
}

struct Lines<'t> {
    path: &'t str,
    iter: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'t>>>,
    last: usize,
}

impl<'t> Lines<'t> {
    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_string(),
            line,
            msg: msg.into(),
        }
    }

    /// Next non-blank, non-comment line as (1-based line number, tokens).
    fn next(&mut self) -> Result<(usize, Vec<&'t str>)> {
        for (i, line) in self.iter.by_ref() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            self.last = i + 1;
            return Ok((i + 1, t.split_whitespace().collect()));
        }
        Err(self.err(self.last + 1, "unexpected end of file"))
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(usize, Vec<&'t str>)> {
        let (ln, toks) = self.next()?;
        if toks.first() != Some(&kw) {
            return Err(self.err(ln, format!("expected `{kw}`")));
        }
        Ok((ln, toks))
    }
}

fn parse_num(lines: &Lines<'_>, ln: usize, tok: &str) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| lines.err(ln, format!("bad number `{tok}`")))?;
    if v.is_nan() {
        return Err(lines.err(ln, "nan is not allowed"));
    }
    Ok(if v >= INF_SENTINEL {
        f64::INFINITY
    } else if v <= -INF_SENTINEL {
        f64::NEG_INFINITY
    } else {
        v
    })
}

fn parse_count(lines: &Lines<'_>, ln: usize, tok: &str, what: &str) -> Result<usize> {
    tok.parse()
        .map_err(|_| lines.err(ln, format!("bad {what} `{tok}`")))
}

/// Parses the text format. `path` is only used in error messages.
pub fn from_text(text: &str, path: &str) -> Result<MilpInstance> {
    let mut lines = Lines {
        path,
        iter: text.lines().enumerate().peekable(),
        last: 0,
    };
    let (ln, head) = lines.expect_keyword("milp")?;
    if head.len() != 5 {
        return Err(lines.err(ln, "header must be `milp <name> <vars> <int> <rows>`"));
    }
    let name = head[1].to_string();
    let n = parse_count(&lines, ln, head[2], "vars")?;
    let p = parse_count(&lines, ln, head[3], "int count")?;
    let m = parse_count(&lines, ln, head[4], "rows")?;
    if p > n {
        return Err(lines.err(ln, "int count exceeds vars"));
    }

    lines.expect_keyword("obj")?;
    let obj = if n == 0 {
        Vec::new()
    } else {
        let (ln, toks) = lines.next()?;
        if toks.len() != n {
            return Err(lines.err(ln, format!("expected {n} objective values")));
        }
        toks.iter()
            .map(|t| parse_num(&lines, ln, t))
            .collect::<Result<Vec<_>>>()?
    };

    lines.expect_keyword("bounds")?;
    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    for _ in 0..n {
        let (ln, toks) = lines.next()?;
        if toks.len() != 2 {
            return Err(lines.err(ln, "bounds line must be `<lower> <upper>`"));
        }
        lower.push(parse_num(&lines, ln, toks[0])?);
        upper.push(parse_num(&lines, ln, toks[1])?);
    }

    let mut rows = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    for _ in 0..m {
        let (ln, toks) = lines.expect_keyword("row")?;
        if toks.len() < 3 {
            return Err(lines.err(ln, "row must be `row <rhs> <k> ...`"));
        }
        let b = parse_num(&lines, ln, toks[1])?;
        let k = parse_count(&lines, ln, toks[2], "entry count")?;
        if toks.len() != 3 + 2 * k {
            return Err(lines.err(ln, format!("expected {k} (col, coef) pairs")));
        }
        let mut row = Vec::with_capacity(k);
        for e in 0..k {
            let j = parse_count(&lines, ln, toks[3 + 2 * e], "column")?;
            if j >= n {
                return Err(lines.err(ln, format!("column {j} out of range")));
            }
            let a = parse_num(&lines, ln, toks[4 + 2 * e])?;
            row.push((j, a));
        }
        rows.push(row);
        rhs.push(b);
    }
    if let Some((i, extra)) = lines.iter.find(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('#')
    }) {
        return Err(lines.err(i + 1, format!("trailing content `{}`", extra.trim())));
    }
    Ok(MilpInstance::new(name, p, obj, rows, rhs, lower, upper))
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<MilpInstance> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    from_text(&text, &path.display().to_string())
}

pub fn write_instance(inst: &MilpInstance, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_text(inst))?;
    Ok(())
}
