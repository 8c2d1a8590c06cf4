//! Seeded instance generators for set cover, maximum independent set and
//! capacitated facility location, plus the task sequences used in lifelong
//! experiments.
//!
//! Every instance is a pure function of `(spec, split, index)`: its rng is
//! derived from the task seed, a split label and the instance index.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::milp::{self, MilpInstance, SparseRow};
use crate::rng::{self, Rng};

const MAX_FACILITY_RETRIES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    SetCover {
        rows: usize,
        cols: usize,
        density: f64,
    },
    IndepSet {
        affinity: usize,
        size: usize,
    },
    FacilityLoc {
        customers: usize,
        facilities: usize,
        capacity: (u32, u32),
        demand: (u32, u32),
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_served: Option<usize>,
        #[serde(default = "one")]
        fixed_cost_scale: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn default_test() -> usize {
    20
}

/// One task of a lifelong sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    #[serde(flatten)]
    pub family: Family,
    /// Instances used for sample collection.
    pub train_instances: usize,
    /// Held-out instances used for evaluation.
    #[serde(default = "default_test")]
    pub test_instances: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn stream(self) -> u64 {
        match self {
            Split::Train => rng::stream::INSTANCES,
            Split::Test => rng::stream::EVAL_INSTANCES,
        }
    }
    fn label(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl TaskSpec {
    pub fn set_cover(name: impl Into<String>, rows: usize, cols: usize, density: f64, seed: u64) -> Self {
        Self {
            name: name.into(),
            family: Family::SetCover { rows, cols, density },
            train_instances: 100,
            test_instances: 20,
            seed,
        }
    }

    pub fn indep_set(name: impl Into<String>, affinity: usize, size: usize, seed: u64) -> Self {
        Self {
            name: name.into(),
            family: Family::IndepSet { affinity, size },
            train_instances: 100,
            test_instances: 20,
            seed,
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn facility(
        name: impl Into<String>,
        customers: usize,
        facilities: usize,
        capacity: (u32, u32),
        demand: (u32, u32),
        max_served: Option<usize>,
        seed: u64,
    ) -> Self {
        Self {
            name: name.into(),
            family: Family::FacilityLoc {
                customers,
                facilities,
                capacity,
                demand,
                max_served,
                fixed_cost_scale: 1.0,
            },
            train_instances: 100,
            test_instances: 20,
            seed,
        }
    }

    pub fn with_counts(mut self, train: usize, test: usize) -> Self {
        self.train_instances = train;
        self.test_instances = test;
        self
    }

    /// Every violated invariant of the spec.
    pub fn check(&self) -> Result<()> {
        let mut errs = Vec::new();
        match &self.family {
            Family::SetCover { rows, cols, density } => {
                if !(*density > 0.0 && *density < 1.0) {
                    errs.push(format!("density {density} outside (0,1)"));
                }
                if *rows == 0 || *cols < 2 {
                    errs.push("set cover needs rows >= 1 and cols >= 2".into());
                }
            }
            Family::IndepSet { affinity, size } => {
                if *affinity < 1 {
                    errs.push("affinity must be >= 1".into());
                }
                if size <= affinity {
                    errs.push(format!("size {size} must exceed affinity {affinity}"));
                }
            }
            Family::FacilityLoc {
                customers,
                facilities,
                capacity,
                demand,
                max_served,
                fixed_cost_scale,
            } => {
                if *customers == 0 || *facilities == 0 {
                    errs.push("facility location needs customers and facilities".into());
                }
                if capacity.0 > capacity.1 || capacity.0 == 0 {
                    errs.push(format!("bad capacity range {capacity:?}"));
                }
                if demand.0 > demand.1 || demand.0 == 0 {
                    errs.push(format!("bad demand range {demand:?}"));
                }
                if *max_served == Some(0) {
                    errs.push("max_served must be positive".into());
                }
                if fixed_cost_scale.is_nan() || *fixed_cost_scale < 0.0 {
                    errs.push("fixed_cost_scale must be non-negative".into());
                }
            }
        }
        if self.train_instances == 0 || self.test_instances == 0 {
            errs.push("instance counts must be >= 1".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!("task {}: {}", self.name, errs.join("; "))))
        }
    }

    pub fn count(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train_instances,
            Split::Test => self.test_instances,
        }
    }

    /// Stable hash of the spec's canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("task spec serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// Minimum-cost set cover. Rows are items, columns are sets; each row is
/// stored as `-Σ x_j ≤ -1`.
pub fn gen_set_cover(rows: usize, cols: usize, density: f64, rng: &mut Rng, name: &str) -> MilpInstance {
    let mut member: Vec<BTreeSet<usize>> = (0..rows)
        .map(|_| (0..cols).filter(|_| rng.gen_bool(density)).collect())
        .collect();
    // every row needs at least two covering columns
    for row in &mut member {
        while row.len() < 2.min(cols) {
            row.insert(rng.gen_range(0..cols));
        }
    }
    // every column covers at least one row
    let mut covered = vec![false; cols];
    for row in &member {
        for &c in row {
            covered[c] = true;
        }
    }
    for (c, done) in covered.iter().enumerate() {
        if !done {
            let r = rng.gen_range(0..rows);
            member[r].insert(c);
        }
    }
    let obj: Vec<f64> = (0..cols).map(|_| f64::from(rng.gen_range(1u32..=100))).collect();
    let a: Vec<SparseRow> = member
        .iter()
        .map(|row| row.iter().map(|&c| (c, -1.0)).collect())
        .collect();
    MilpInstance::new(
        name,
        cols,
        obj,
        a,
        vec![-1.0; rows],
        vec![0.0; cols],
        vec![1.0; cols],
    )
}

/// Barabási–Albert edges: an initial `affinity`-clique, then every new node
/// attaches to `affinity` distinct existing nodes chosen proportionally to
/// degree.
pub fn barabasi_albert(affinity: usize, size: usize, rng: &mut Rng) -> Vec<(usize, usize)> {
    let a = affinity;
    let mut edges = Vec::with_capacity(a * (a.saturating_sub(1)) / 2 + a * size.saturating_sub(a));
    // each node appears once per incident edge
    let mut ends: Vec<usize> = Vec::new();
    for u in 0..a.min(size) {
        for v in u + 1..a.min(size) {
            edges.push((u, v));
            ends.push(u);
            ends.push(v);
        }
    }
    for v in a..size {
        let mut targets = BTreeSet::new();
        if ends.is_empty() {
            // only possible for affinity 1: attach to the lone seed node
            targets.insert(0);
        }
        while targets.len() < a {
            targets.insert(*ends.choose(rng).expect("non-empty"));
        }
        for &u in &targets {
            edges.push((u, v));
            ends.push(u);
            ends.push(v);
        }
    }
    edges
}

/// Maximum independent set with one `x_u + x_v ≤ 1` row per edge, written
/// as minimization of `-Σ x`.
pub fn gen_indep_set(affinity: usize, size: usize, rng: &mut Rng, name: &str) -> MilpInstance {
    let edges = barabasi_albert(affinity, size, rng);
    let rows: Vec<SparseRow> = edges.iter().map(|&(u, v)| vec![(u, 1.0), (v, 1.0)]).collect();
    let m = rows.len();
    MilpInstance::new(
        name,
        size,
        vec![-1.0; size],
        rows,
        vec![1.0; m],
        vec![0.0; size],
        vec![1.0; size],
    )
}

/// Capacitated facility location with binary assignments.
///
/// Variables: `x_ij` (customer-major, index `i·F + j`) followed by the open
/// indicators `y_j`. Rows per customer: `Σ_j x_ij ≤ 1` and `-Σ_j x_ij ≤ -1`;
/// per facility: `Σ_i d_i x_ij - cap_j y_j ≤ 0`, plus `Σ_i x_ij ≤ MS` when a
/// service limit is given.
#[allow(clippy::too_many_arguments)]
pub fn gen_facility(
    customers: usize,
    facilities: usize,
    capacity: (u32, u32),
    demand: (u32, u32),
    max_served: Option<usize>,
    fixed_cost_scale: f64,
    rng: &mut Rng,
    name: &str,
) -> Result<MilpInstance> {
    let (nc, nf) = (customers, facilities);
    for _ in 0..MAX_FACILITY_RETRIES {
        let cpos: Vec<(f64, f64)> = (0..nc).map(|_| (rng.gen(), rng.gen())).collect();
        let fpos: Vec<(f64, f64)> = (0..nf).map(|_| (rng.gen(), rng.gen())).collect();
        let d: Vec<f64> = (0..nc)
            .map(|_| f64::from(rng.gen_range(demand.0..=demand.1)))
            .collect();
        let cap: Vec<f64> = (0..nf)
            .map(|_| f64::from(rng.gen_range(capacity.0..=capacity.1)))
            .collect();
        let fixed: Vec<f64> = (0..nf)
            .map(|_| rng.gen_range(100.0..=110.0) * fixed_cost_scale)
            .collect();
        let served_cap = max_served.map_or(f64::INFINITY, |ms| ms as f64);
        let usable: f64 = cap.iter().sum();
        if usable < d.iter().sum::<f64>() || served_cap * (nf as f64) < nc as f64 {
            continue;
        }
        let n = nc * nf + nf;
        let y = |j: usize| nc * nf + j;
        let mut obj = vec![0.0; n];
        for i in 0..nc {
            for j in 0..nf {
                let dist = ((cpos[i].0 - fpos[j].0).powi(2) + (cpos[i].1 - fpos[j].1).powi(2)).sqrt();
                obj[i * nf + j] = d[i] * dist;
            }
        }
        for j in 0..nf {
            obj[y(j)] = fixed[j];
        }
        let mut rows: Vec<SparseRow> = Vec::new();
        let mut rhs = Vec::new();
        for i in 0..nc {
            rows.push((0..nf).map(|j| (i * nf + j, 1.0)).collect());
            rhs.push(1.0);
            rows.push((0..nf).map(|j| (i * nf + j, -1.0)).collect());
            rhs.push(-1.0);
        }
        for j in 0..nf {
            let mut row: SparseRow = (0..nc).map(|i| (i * nf + j, d[i])).collect();
            row.push((y(j), -cap[j]));
            rows.push(row);
            rhs.push(0.0);
        }
        if let Some(ms) = max_served {
            for j in 0..nf {
                rows.push((0..nc).map(|i| (i * nf + j, 1.0)).collect());
                rhs.push(ms as f64);
            }
        }
        return Ok(MilpInstance::new(name, n, obj, rows, rhs, vec![0.0; n], vec![1.0; n]));
    }
    Err(Error::Generator(format!(
        "{name}: capacity below demand after {MAX_FACILITY_RETRIES} attempts"
    )))
}

fn instance_name(spec: &TaskSpec, split: Split, index: usize) -> String {
    format!("{}_{}_{index:04}", spec.name, split.label())
}

/// Generates instance `index` of a split. Pure in `(spec, split, index)`.
pub fn generate(spec: &TaskSpec, split: Split, index: usize) -> Result<MilpInstance> {
    let mut r = rng::rng_for(rng::derive_seed(spec.seed, split.stream()), index as u64);
    let name = instance_name(spec, split, index);
    let inst = match &spec.family {
        Family::SetCover { rows, cols, density } => gen_set_cover(*rows, *cols, *density, &mut r, &name),
        Family::IndepSet { affinity, size } => gen_indep_set(*affinity, *size, &mut r, &name),
        Family::FacilityLoc {
            customers,
            facilities,
            capacity,
            demand,
            max_served,
            fixed_cost_scale,
        } => gen_facility(
            *customers,
            *facilities,
            *capacity,
            *demand,
            *max_served,
            *fixed_cost_scale,
            &mut r,
            &name,
        )?,
    };
    let errs = milp::validate(&inst);
    if errs.is_empty() {
        Ok(inst)
    } else {
        Err(Error::InvalidInstance(errs))
    }
}

/// All instances of a split, generated in parallel, in index order.
pub fn generate_split(spec: &TaskSpec, split: Split) -> Result<Vec<MilpInstance>> {
    spec.check()?;
    (0..spec.count(split))
        .into_par_iter()
        .map(|i| generate(spec, split, i))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub split: Split,
    pub index: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub spec: TaskSpec,
    pub spec_hash: String,
    pub train_instances: usize,
    pub test_instances: usize,
    pub files: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

fn render_suite(spec: &TaskSpec) -> Result<Vec<(ManifestEntry, String)>> {
    let mut out = Vec::new();
    for split in [Split::Train, Split::Test] {
        for inst in generate_split(spec, split)? {
            let text = milp::to_text(&inst);
            let index = out.iter().filter(|(e, _): &&(ManifestEntry, String)| e.split == split).count();
            out.push((
                ManifestEntry {
                    file: format!("{}.milp", inst.name()),
                    split,
                    index,
                    sha256: hex::encode(Sha256::digest(text.as_bytes())),
                },
                text,
            ));
        }
    }
    Ok(out)
}

/// Writes every instance of `spec` into `dir` along with `manifest.json`.
pub fn gen_suite(spec: &TaskSpec, dir: impl AsRef<Path>) -> Result<Manifest> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let rendered = render_suite(spec)?;
    let mut files = Vec::with_capacity(rendered.len());
    for (entry, text) in rendered {
        std::fs::write(dir.join(&entry.file), text)?;
        files.push(entry);
    }
    let manifest = Manifest {
        version: 1,
        spec: spec.clone(),
        spec_hash: spec.hash(),
        train_instances: spec.train_instances,
        test_instances: spec.test_instances,
        files,
    };
    std::fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<Manifest> {
    let path = dir.as_ref().join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path)?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path,
        msg: e.to_string(),
    })
}

/// Regenerates the suite described by a manifest and checks that every file
/// on disk is byte-identical. Returns the mismatching files.
pub fn verify_suite(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let manifest = read_manifest(dir)?;
    if manifest.spec.hash() != manifest.spec_hash {
        return Err(Error::Format {
            path: dir.join(MANIFEST_FILE),
            msg: "spec hash mismatch".into(),
        });
    }
    let mut bad = Vec::new();
    for (entry, text) in render_suite(&manifest.spec)? {
        let path = dir.join(&entry.file);
        let on_disk = std::fs::read(&path).ok();
        if on_disk.as_deref() != Some(text.as_bytes()) || !manifest.files.contains(&entry) {
            bad.push(path);
        }
    }
    Ok(bad)
}

/// Loads one split of a suite written by [`gen_suite`].
pub fn load_split(dir: impl AsRef<Path>, split: Split) -> Result<Vec<MilpInstance>> {
    let dir = dir.as_ref();
    let manifest = read_manifest(dir)?;
    manifest
        .files
        .iter()
        .filter(|e| e.split == split)
        .map(|e| milp::read_instance(dir.join(&e.file)))
        .collect()
}

/// Task sequences from the original experiments and their desk-scale
/// counterparts.
pub mod presets {
    use super::TaskSpec;

    pub const SC_DENSITIES: [f64; 6] = [0.05, 0.075, 0.1, 0.125, 0.15, 0.2];
    pub const IS_PAIRS: [(usize, usize); 6] = [(4, 750), (4, 500), (4, 450), (5, 450), (5, 400), (5, 350)];
    /// ((Clow, Chigh), (Dlow, Dhigh), MS)
    pub const FC_TASKS: [((u32, u32), (u32, u32), Option<usize>); 5] = [
        ((40, 50), (5, 10), None),
        ((50, 55), (30, 35), None),
        ((80, 90), (60, 65), None),
        ((100, 110), (80, 90), None),
        ((100, 110), (80, 90), Some(95)),
    ];
    pub const SC_TRANSFER_DENSITY: f64 = 0.047;

    pub const DESK_SC_ROWS: usize = 60;
    pub const DESK_SC_COLS: usize = 80;
    pub const DESK_SC_DENSITIES: [f64; 3] = [0.1, 0.15, 0.2];

    fn seed_of(base: u64, k: usize) -> u64 {
        base.wrapping_add(k as u64 * 1_000_003)
    }

    /// Six set cover tasks, 700 rows × 800 columns.
    pub fn sc_paper(seed: u64) -> Vec<TaskSpec> {
        SC_DENSITIES
            .iter()
            .enumerate()
            .map(|(k, &p)| TaskSpec::set_cover(format!("sc_{p}"), 700, 800, p, seed_of(seed, k)))
            .collect()
    }

    pub fn is_paper(seed: u64) -> Vec<TaskSpec> {
        IS_PAIRS
            .iter()
            .enumerate()
            .map(|(k, &(a, s))| TaskSpec::indep_set(format!("is_{a}_{s}"), a, s, seed_of(seed, k)))
            .collect()
    }

    pub fn fc_paper(seed: u64) -> Vec<TaskSpec> {
        FC_TASKS
            .iter()
            .enumerate()
            .map(|(k, &(c, d, ms))| {
                let name = match ms {
                    Some(ms) => format!("fc_{}_{}_{}_{}_ms{ms}", c.0, c.1, d.0, d.1),
                    None => format!("fc_{}_{}_{}_{}", c.0, c.1, d.0, d.1),
                };
                TaskSpec::facility(name, 100, 100, c, d, ms, seed_of(seed, k))
            })
            .collect()
    }

    /// Three set cover tasks, 60 × 80, densities 0.1 / 0.15 / 0.2.
    pub fn sc_desk(seed: u64) -> Vec<TaskSpec> {
        DESK_SC_DENSITIES
            .iter()
            .enumerate()
            .map(|(k, &p)| {
                TaskSpec::set_cover(format!("sc_{p}"), DESK_SC_ROWS, DESK_SC_COLS, p, seed_of(seed, k))
            })
            .collect()
    }

    /// Independent set with graph sizes scaled down tenfold.
    pub fn is_desk(seed: u64) -> Vec<TaskSpec> {
        IS_PAIRS
            .iter()
            .enumerate()
            .map(|(k, &(a, s))| {
                let s = s / 10;
                TaskSpec::indep_set(format!("is_{a}_{s}"), a, s, seed_of(seed, k))
            })
            .collect()
    }

    /// Facility location with 10 customers and 10 facilities; the service
    /// limit is scaled with the customer count.
    pub fn fc_desk(seed: u64) -> Vec<TaskSpec> {
        FC_TASKS
            .iter()
            .enumerate()
            .map(|(k, &(c, d, ms))| {
                let ms = ms.map(|m| (m / 10).max(1));
                let name = match ms {
                    Some(ms) => format!("fc_{}_{}_{}_{}_ms{ms}", c.0, c.1, d.0, d.1),
                    None => format!("fc_{}_{}_{}_{}", c.0, c.1, d.0, d.1),
                };
                TaskSpec::facility(name, 10, 10, c, d, ms, seed_of(seed, k))
            })
            .collect()
    }

    /// Low-data transfer task at density 0.047.
    pub fn sc_transfer(rows: usize, cols: usize, seed: u64) -> TaskSpec {
        TaskSpec::set_cover(format!("sc_{SC_TRANSFER_DENSITY}"), rows, cols, SC_TRANSFER_DENSITY, seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_cover_repair_postconditions() {
        for seed in 0..20 {
            let spec = TaskSpec::set_cover("sc", 30, 25, 0.02, seed);
            let inst = generate(&spec, Split::Train, 0).unwrap();
            assert_eq!(inst.num_vars(), 25);
            assert_eq!(inst.num_rows(), 30);
            for row in inst.rows() {
                assert!(row.len() >= 2);
            }
            for col in inst.cols() {
                assert!(!col.is_empty());
            }
            assert!(inst.obj().iter().all(|&c| (1.0..=100.0).contains(&c) && c.fract() == 0.0));
        }
    }

    #[test]
    fn barabasi_albert_edge_count() {
        for (a, s) in [(1, 10), (2, 12), (4, 30), (5, 40)] {
            let mut r = rng::rng_for(1, 0);
            let edges = barabasi_albert(a, s, &mut r);
            assert_eq!(edges.len(), a * (a - 1) / 2 + a * (s - a));
            let uniq: BTreeSet<_> = edges.iter().map(|&(u, v)| (u.min(v), u.max(v))).collect();
            assert_eq!(uniq.len(), edges.len());
        }
    }

    #[test]
    fn complete_graph_corner() {
        let mut r = rng::rng_for(3, 0);
        let inst = gen_indep_set(4, 5, &mut r, "k5");
        assert_eq!(inst.num_rows(), 10);
    }

    #[test]
    fn max_served_adds_one_row_per_facility() {
        let mut r1 = rng::rng_for(5, 0);
        let mut r2 = rng::rng_for(5, 0);
        let a = gen_facility(6, 4, (40, 50), (5, 10), None, 1.0, &mut r1, "a").unwrap();
        let b = gen_facility(6, 4, (40, 50), (5, 10), Some(5), 1.0, &mut r2, "b").unwrap();
        assert_eq!(b.num_rows(), a.num_rows() + 4);
        assert_eq!(a.num_rows(), 2 * 6 + 4);
        assert_eq!(a.num_vars(), 6 * 4 + 4);
    }

    #[test]
    fn infeasible_capacity_errors() {
        let mut r = rng::rng_for(5, 0);
        let e = gen_facility(10, 1, (1, 1), (5, 5), None, 1.0, &mut r, "x");
        assert!(matches!(e, Err(Error::Generator(_))));
    }

    #[test]
    fn presets_match_sequences() {
        let sc = presets::sc_paper(0);
        let ps: Vec<f64> = sc
            .iter()
            .map(|t| match t.family {
                Family::SetCover { rows, cols, density } => {
                    assert_eq!((rows, cols), (700, 800));
                    density
                }
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(ps, vec![0.05, 0.075, 0.1, 0.125, 0.15, 0.2]);
        assert_eq!(presets::is_paper(0).len(), 6);
        let fc = presets::fc_paper(0);
        assert_eq!(fc.len(), 5);
        assert!(matches!(
            fc[4].family,
            Family::FacilityLoc { max_served: Some(95), customers: 100, facilities: 100, .. }
        ));
        for t in presets::sc_desk(0)
            .iter()
            .chain(&presets::is_desk(0))
            .chain(&presets::fc_desk(0))
        {
            t.check().unwrap();
        }
    }

    #[test]
    fn spec_validation() {
        assert!(TaskSpec::set_cover("x", 5, 5, 1.5, 0).check().is_err());
        assert!(TaskSpec::indep_set("x", 4, 4, 0).check().is_err());
        assert!(TaskSpec::facility("x", 3, 3, (5, 4), (1, 2), None, 0).check().is_err());
    }

    #[test]
    fn spec_toml_round_trip() {
        let spec = TaskSpec::facility("fc", 5, 5, (10, 20), (1, 3), Some(4), 9);
        #[derive(Serialize, Deserialize)]
        struct W {
            tasks: Vec<TaskSpec>,
        }
        let text = toml::to_string(&W { tasks: vec![spec.clone()] }).unwrap();
        let back: W = toml::from_str(&text).unwrap();
        assert_eq!(back.tasks[0], spec);
    }
}
