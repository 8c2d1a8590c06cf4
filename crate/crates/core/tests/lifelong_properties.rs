use branchlab::bnb::BranchSample;
use branchlab::features::random_state;
use branchlab::gat::{self, Encoder, GatConfig, GatParams};
use branchlab::lifelong::{
    compute_importance, cross_entropy, ewc_penalty, kd_loss, reservoir_offer, Learner, LifelongConfig, ReplayEntry,
    Strategy, TaskSnapshot,
};
use branchlab::rng::rng_for;
use proptest::prelude::*;

fn sample(seed: u64, n: usize) -> BranchSample {
    let state = random_state(n, 5, 0.4, seed);
    let candidates = state.candidates();
    // a learnable rule: the candidate with the largest first feature
    let expert_action = candidates
        .iter()
        .enumerate()
        .max_by(|a, b| state.var_row(*a.1)[0].total_cmp(&state.var_row(*b.1)[0]))
        .unwrap()
        .0;
    BranchSample {
        state,
        candidates,
        expert_action,
        instance: format!("r{seed}"),
        depth: 0,
    }
}

fn task(offset: u64, count: u64) -> Vec<BranchSample> {
    (offset..offset + count).map(|s| sample(s, 8)).collect()
}

fn small_cfg(strategy: Strategy) -> LifelongConfig {
    LifelongConfig {
        strategy,
        gat: GatConfig::with_hidden(8, 2),
        max_epochs: 4,
        patience: 2,
        batch_size: 8,
        kd_batch: 8,
        buffer_capacity: 20,
        seed: 7,
        ..LifelongConfig::default()
    }
}

#[test]
fn reservoir_inclusion_is_uniform() {
    const CAP: usize = 50;
    const N: usize = 5000;
    const TRIALS: usize = 10_000;
    let mut hits = vec![0u32; N];
    let mut r = rng_for(2024, 0);
    let mut slots: Vec<u32> = Vec::with_capacity(CAP);
    for _ in 0..TRIALS {
        slots.clear();
        let mut count = 0u64;
        for item in 0..N as u32 {
            reservoir_offer(&mut slots, CAP, &mut count, item, &mut r);
        }
        for &s in &slots {
            hits[s as usize] += 1;
        }
    }
    let p = CAP as f64 / N as f64;
    let sigma = (p * (1.0 - p) / TRIALS as f64).sqrt();
    // per item: a 3σ band holds ~99.7% of items under the null
    let freqs: Vec<f64> = hits.iter().map(|&h| f64::from(h) / TRIALS as f64).collect();
    let outside = freqs.iter().filter(|&&f| (f - p).abs() > 3.0 * sigma).count();
    assert!(outside as f64 <= 0.01 * N as f64, "{outside} items outside 3σ");
    assert!(freqs.iter().all(|&f| (f - p).abs() <= 5.0 * sigma));
    // early, middle and late stream positions are equally likely to survive
    for decile in freqs.chunks(N / 10) {
        let mean = decile.iter().sum::<f64>() / decile.len() as f64;
        let s = sigma / (decile.len() as f64).sqrt();
        assert!((mean - p).abs() <= 3.0 * s, "decile mean {mean} vs {p}");
    }
}

#[test]
fn ft_equals_limip_with_zero_weights() {
    let data = [task(0, 40), task(100, 40)];
    let mut ft = Learner::new(small_cfg(Strategy::Ft));
    let mut zero = Learner::new(LifelongConfig {
        kd_weight: 0.0,
        ewc_weight: 0.0,
        ..small_cfg(Strategy::Limip)
    });
    for d in &data {
        ft.train_task(d).unwrap();
        zero.train_task(d).unwrap();
        assert_eq!(ft.params.flatten(), zero.params.flatten());
    }
    let imit = |l: &Learner| l.logs.iter().map(|g| (g.imitation, g.val_loss)).collect::<Vec<_>>();
    assert_eq!(imit(&ft), imit(&zero));
    assert!(zero.logs.iter().all(|g| g.kd == 0.0 && g.ewc == 0.0));
}

#[test]
fn huge_consolidation_pins_important_weights() {
    let data = [task(0, 40), task(300, 40)];
    let drift = |beta: f64, strategy: Strategy| {
        let mut l = Learner::new(LifelongConfig {
            ewc_only_weight: beta,
            ..small_cfg(strategy)
        });
        l.train_task(&data[0]).unwrap();
        let snap = l.snapshots.first().cloned();
        let theta1 = l.params.flatten().to_vec();
        l.train_task(&data[1]).unwrap();
        (theta1, l.params.flatten().to_vec(), snap)
    };
    let (t1, t2, snap) = drift(1e9, Strategy::Ewc);
    let omega = snap.expect("EWC keeps a snapshot").omega;
    let (f1, f2, _) = drift(0.0, Strategy::Ft);
    assert_eq!(t1, f1, "same first task");
    let weighted = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).zip(&omega).map(|((x, y), w)| w * (x - y).abs()).sum() };
    let pinned = weighted(&t1, &t2);
    let free = weighted(&f1, &f2);
    assert!(free > 0.0);
    assert!(pinned < 0.1 * free, "pinned drift {pinned} vs free {free}");
    let wnorm = t1.iter().zip(&t2).zip(&omega).map(|((a, b), w)| w * (a - b).powi(2)).sum::<f64>().sqrt();
    assert!(wnorm <= 1e-3, "Ω-weighted distance {wnorm}");
}

#[test]
fn single_sample_importance_is_squared_gradient() {
    let p = GatParams::init(GatConfig::with_hidden(8, 2), 3);
    let s = sample(42, 9);
    let omega = compute_importance(&p, std::slice::from_ref(&s), Encoder::Attention);
    let (z, tr) = gat::forward(&p, &s.state);
    let (_, d) = cross_entropy(&z, s.expert_action);
    let g = gat::backward(&p, &s.state, &tr, &d);
    for (o, gi) in omega.iter().zip(&g) {
        assert_eq!(*o, gi * gi);
    }
}

#[test]
fn consolidation_and_distillation_vanish_at_their_anchors() {
    let p = GatParams::init(GatConfig::with_hidden(8, 2), 5);
    let samples = task(500, 10);
    let omega = compute_importance(&p, &samples, Encoder::Attention);
    assert!(omega.iter().all(|&o| o >= 0.0));
    let snap = TaskSnapshot {
        task: 0,
        theta: p.flatten().to_vec(),
        omega,
    };
    let (pen, grad) = ewc_penalty(p.flatten(), &[snap]);
    assert_eq!(pen, 0.0);
    assert!(grad.iter().all(|&g| g == 0.0));

    let entries: Vec<ReplayEntry> = samples
        .iter()
        .map(|s| ReplayEntry {
            state: s.state.clone(),
            logits: gat::logits(&p, &s.state, Encoder::Attention),
            action: s.expert_action,
            task: 0,
        })
        .collect();
    let refs: Vec<&ReplayEntry> = entries.iter().collect();
    let (kd, grads) = kd_loss(&p, &refs, Encoder::Attention);
    assert!(kd.abs() < 1e-12, "kd {kd}");
    assert!(grads.iter().flatten().all(|g| g.abs() < 1e-12));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn importance_is_nonnegative(seed in 0u64..10_000) {
        let p = GatParams::init(GatConfig::with_hidden(4, 2), seed);
        let samples: Vec<BranchSample> = (0..3).map(|k| sample(seed * 3 + k, 6)).collect();
        let omega = compute_importance(&p, &samples, Encoder::Attention);
        prop_assert!(omega.iter().all(|&o| o >= 0.0 && o.is_finite()));
    }

    #[test]
    fn ewc_penalty_is_nonnegative_and_matches_gradient(
        seed in 0u64..10_000,
        shift in -1.0f64..1.0,
    ) {
        let mut r = rng_for(seed, 0);
        use rand::Rng as _;
        let theta_star: Vec<f64> = (0..20).map(|_| r.gen_range(-1.0..1.0)).collect();
        let omega: Vec<f64> = (0..20).map(|_| r.gen_range(0.0..2.0)).collect();
        let theta: Vec<f64> = theta_star.iter().map(|t| t + shift * r.gen_range(0.0..1.0)).collect();
        let snap = TaskSnapshot { task: 0, theta: theta_star, omega };
        let (pen, grad) = ewc_penalty(&theta, std::slice::from_ref(&snap));
        prop_assert!(pen >= 0.0);
        for w in 0..theta.len() {
            let h = 1e-6;
            let mut tp = theta.clone();
            tp[w] += h;
            let mut tm = theta.clone();
            tm[w] -= h;
            let fd = (ewc_penalty(&tp, std::slice::from_ref(&snap)).0 - ewc_penalty(&tm, std::slice::from_ref(&snap)).0) / (2.0 * h);
            prop_assert!((fd - grad[w]).abs() < 1e-6);
        }
    }
}
