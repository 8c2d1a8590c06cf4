//! Branch-and-bound and LP results checked against independent oracles:
//! exhaustive enumeration on tiny binary programs and duality certificates.

use branchlab::bnb::{make_policy, solve_mip, MipStatus, PolicyKind, SolveLimits};
use branchlab::instgen::{generate, Split, TaskSpec};
use branchlab::lp::{self, LpStatus};
use branchlab::milp::{relax, MilpInstance, VarDomainPatch};

/// Minimum objective over all 0/1 points, computed without any LP.
fn brute_force(inst: &MilpInstance) -> Option<f64> {
    let n = inst.num_vars();
    assert!(n <= 16, "enumeration is for tiny instances");
    let mut best: Option<f64> = None;
    let mut x = vec![0.0; n];
    for mask in 0u32..(1 << n) {
        for (j, v) in x.iter_mut().enumerate() {
            *v = f64::from((mask >> j) & 1);
        }
        let feasible = inst
            .rows()
            .iter()
            .zip(inst.rhs())
            .all(|(row, &b)| row.iter().map(|&(j, a)| a * x[j]).sum::<f64>() <= b + 1e-9);
        if feasible {
            let obj = inst.objective(&x);
            if best.is_none_or(|b| obj < b) {
                best = Some(obj);
            }
        }
    }
    best
}

fn tiny_instances(per_family: usize) -> Vec<MilpInstance> {
    let sc = TaskSpec::set_cover("sc_tiny", 6, 12, 0.3, 11);
    let is = TaskSpec::indep_set("is_tiny", 2, 12, 12);
    let fc = TaskSpec::facility("fc_tiny", 3, 3, (10, 20), (3, 8), None, 13);
    let mut out = Vec::new();
    for spec in [sc, is, fc] {
        for i in 0..per_family {
            out.push(generate(&spec, Split::Train, i).unwrap());
        }
    }
    out
}

fn rounded_objective(inst: &MilpInstance, x: &[f64]) -> f64 {
    let r: Vec<f64> = x.iter().map(|v| v.round()).collect();
    assert!(x.iter().zip(&r).all(|(a, b)| (a - b).abs() < 1e-6), "solution not integral");
    assert!(inst.is_feasible(&r, 1e-9));
    inst.objective(&r)
}

#[test]
fn branch_and_bound_matches_enumeration_for_every_policy() {
    let policies = [
        PolicyKind::Strong,
        PolicyKind::MostFractional,
        PolicyKind::Random,
    ];
    for inst in tiny_instances(50) {
        let truth = brute_force(&inst).expect("generated instances are feasible");
        for kind in policies {
            let mut p = make_policy(kind, 5, None);
            let rep = solve_mip(&inst, p.as_mut(), &SolveLimits::default()).unwrap();
            assert_eq!(rep.status, MipStatus::Optimal, "{} {kind:?}", inst.name());
            let got = rounded_objective(&inst, rep.solution.as_ref().unwrap());
            // integer data gives exact equality; facility costs are real
            assert!(
                (got - truth).abs() <= 1e-9 * truth.abs().max(1.0),
                "{} {kind:?}: {got} vs {truth}",
                inst.name()
            );
        }
    }
}

#[test]
fn set_cover_and_independent_set_optima_are_bitwise_equal() {
    for inst in tiny_instances(20).into_iter().filter(|i| !i.name().starts_with("fc")) {
        let truth = brute_force(&inst).unwrap();
        let rep = solve_mip(&inst, &mut branchlab::bnb::StrongBranching, &SolveLimits::default()).unwrap();
        assert_eq!(rounded_objective(&inst, rep.solution.as_ref().unwrap()), truth);
    }
}

#[test]
fn root_bound_never_exceeds_the_optimum() {
    for inst in tiny_instances(30) {
        let truth = brute_force(&inst).unwrap();
        let sol = lp::solve(&relax(&inst, &[]), None);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!(sol.objective <= truth + 1e-9, "{}: {} > {truth}", inst.name(), sol.objective);
    }
}

/// Weak duality: for A x ≤ b with bounds l ≤ x ≤ u, the dual objective
/// y·b + Σ_j (d_j⁺ l_j − d_j⁻ u_j) equals the primal optimum when y ≤ 0 and
/// d = c − Aᵀy.
#[test]
fn lp_duals_certify_the_objective() {
    for inst in tiny_instances(70) {
        let lp = relax(&inst, &[]);
        let sol = lp::solve(&lp, None);
        assert_eq!(sol.status, LpStatus::Optimal);
        let y = &sol.duals;
        assert!(y.iter().all(|&v| v <= 1e-9), "duals of ≤ rows must be ≤ 0");
        let mut d = inst.obj().to_vec();
        for (i, row) in inst.rows().iter().enumerate() {
            for &(j, a) in row {
                d[j] -= a * y[i];
            }
        }
        let mut dual_obj: f64 = y.iter().zip(inst.rhs()).map(|(a, b)| a * b).sum();
        for j in 0..inst.num_vars() {
            dual_obj += if d[j] >= 0.0 { d[j] * lp.lower[j] } else { d[j] * lp.upper[j] };
        }
        let scale = sol.objective.abs().max(1.0);
        assert!((dual_obj - sol.objective).abs() <= 1e-7 * scale, "{}: {dual_obj} vs {}", inst.name(), sol.objective);
    }
}

#[test]
fn warm_and_cold_child_solves_agree() {
    let spec = TaskSpec::set_cover("sc_warm", 20, 25, 0.2, 21);
    let mut checked = 0;
    let mut i = 0;
    while checked < 200 {
        let inst = generate(&spec, Split::Train, i).unwrap();
        i += 1;
        let root_lp = relax(&inst, &[]);
        let root = lp::solve(&root_lp, None);
        let Some(j) = (0..inst.num_vars()).find(|&j| (root.x[j] - root.x[j].round()).abs() > 1e-6) else {
            continue;
        };
        for patch in [VarDomainPatch::at_most(j, root.x[j].floor()), VarDomainPatch::at_least(j, root.x[j].ceil())] {
            let child = root_lp.patched(&patch);
            let warm = lp::solve(&child, root.basis.as_ref());
            let cold = lp::solve(&relax(&inst, &[patch]), None);
            assert_eq!(warm.status, cold.status);
            if cold.status == LpStatus::Optimal {
                assert!(
                    (warm.objective - cold.objective).abs() <= 1e-9 * cold.objective.abs().max(1.0),
                    "{} var {j}: {} vs {}",
                    inst.name(),
                    warm.objective,
                    cold.objective
                );
            }
            checked += 1;
        }
    }
}

#[test]
fn solves_are_deterministic_under_a_tie_seed() {
    let spec = TaskSpec::set_cover("sc_det", 25, 30, 0.2, 3);
    for i in 0..10 {
        let inst = generate(&spec, Split::Test, i).unwrap();
        let limits = SolveLimits {
            tie_seed: Some(9),
            ..SolveLimits::default()
        };
        let a = solve_mip(&inst, make_policy(PolicyKind::Random, 4, None).as_mut(), &limits).unwrap();
        let b = solve_mip(&inst, make_policy(PolicyKind::Random, 4, None).as_mut(), &limits).unwrap();
        assert_eq!(a.node_count, b.node_count);
        assert_eq!(a.solution, b.solution);
    }
}
