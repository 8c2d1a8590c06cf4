use std::path::PathBuf;

use branchlab::bnb::{collect_samples, CollectConfig, SolveLimits};
use branchlab::codec::{read_samples, write_samples};
use branchlab::instgen::{gen_suite, generate, load_split, read_manifest, verify_suite, Split, TaskSpec};
use branchlab::milp;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn golden_spec() -> TaskSpec {
    TaskSpec::set_cover("sc_tiny", 6, 8, 0.3, 42)
}

/// Generator output is frozen: any change to the sampling stream shows up
/// here. Regenerate with `BRANCHLAB_BLESS=1` only when the change is intended.
#[test]
fn set_cover_generator_matches_golden_file() {
    let inst = generate(&golden_spec(), Split::Train, 0).unwrap();
    let text = milp::to_text(&inst);
    let path = fixture("sc_tiny.milp");
    if std::env::var_os("BRANCHLAB_BLESS").is_some() {
        std::fs::write(&path, &text).unwrap();
    }
    let golden = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text, golden);
    let parsed = milp::read_instance(&path).unwrap();
    assert_eq!(parsed.num_vars(), 8);
    assert_eq!(parsed.num_rows(), 6);
    assert_eq!(milp::to_text(&parsed), golden);
}

#[test]
fn suites_round_trip_through_their_manifest() {
    let specs = [
        TaskSpec::set_cover("sc", 12, 15, 0.2, 1).with_counts(4, 3),
        TaskSpec::indep_set("is", 2, 15, 2).with_counts(4, 3),
        TaskSpec::facility("fc", 4, 3, (10, 20), (3, 8), Some(2), 3).with_counts(4, 3),
    ];
    for spec in specs {
        let dir = tempfile::tempdir().unwrap();
        let manifest = gen_suite(&spec, dir.path()).unwrap();
        assert_eq!(read_manifest(dir.path()).unwrap(), manifest);
        assert_eq!(manifest.files.len(), 7);
        assert!(verify_suite(dir.path()).unwrap().is_empty());
        for split in [Split::Train, Split::Test] {
            let loaded = load_split(dir.path(), split).unwrap();
            assert_eq!(loaded.len(), spec.count(split));
            for (i, inst) in loaded.iter().enumerate() {
                assert_eq!(*inst, generate(&spec, split, i).unwrap(), "{} {split:?} {i}", spec.name);
            }
        }
        // a tampered file is reported
        let first = dir.path().join(&manifest.files[0].file);
        let mut text = std::fs::read_to_string(&first).unwrap();
        text.push('\n');
        std::fs::write(&first, text).unwrap();
        assert_eq!(verify_suite(dir.path()).unwrap(), vec![first]);
    }
}

#[test]
fn splits_are_disjoint_and_indices_independent() {
    let spec = TaskSpec::set_cover("sc", 20, 25, 0.15, 9);
    let a = generate(&spec, Split::Train, 3).unwrap();
    let b = generate(&spec, Split::Test, 3).unwrap();
    assert_ne!(a.obj(), b.obj());
    assert_eq!(a, generate(&spec, Split::Train, 3).unwrap());
}

#[test]
fn sample_collection_is_deterministic_and_serializable() {
    let spec = TaskSpec::set_cover("sc", 25, 30, 0.2, 5);
    let instances: Vec<_> = (0..6).map(|i| generate(&spec, Split::Train, i).unwrap()).collect();
    let cfg = CollectConfig {
        quota: 40,
        explore_prob: 0.3,
        seed: 77,
        per_instance_cap: Some(10),
        limits: SolveLimits::default(),
    };
    let a = collect_samples(&instances, &cfg).unwrap();
    let b = collect_samples(&instances, &cfg).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
    for s in &a {
        assert!(s.expert_action < s.candidates.len());
        assert_eq!(s.candidates, s.state.candidates());
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.bin");
    write_samples(&path, &a).unwrap();
    assert_eq!(read_samples(&path).unwrap(), a);
}
