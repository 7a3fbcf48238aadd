mod common;

use common::{censored_instance, instance, reachable_mean, rng, tv};
use maxent_fusion::simgen::{build_instance, ReplicaConfig};
use maxent_fusion::solver::{primal_lagrangian, solve_dual_with, SolverOptions};
use maxent_fusion::{
    censored_estimate, dual_gradient, dual_objective, entropy, estimate_population, reconstruct_primal, ConstraintSet,
    DualState, Error,
};
use rand::Rng;

fn constraint_set(inst: &common::Instance) -> ConstraintSet {
    ConstraintSet::new(
        inst.grid.clone(),
        inst.moments.clone(),
        Some((inst.observed.clone(), inst.selection.clone())),
    )
    .unwrap()
}

fn random_state(cs: &ConstraintSet, seed: u64, scale: f64) -> DualState {
    let mut r = rng(seed);
    let mut s = DualState::zeros(cs);
    s.lambda_f.iter_mut().for_each(|v| *v = r.gen_range(-scale..scale));
    s.lambda_obs.iter_mut().for_each(|v| *v = r.gen_range(-scale..scale));
    s
}

#[test]
fn dual_objective_matches_direct_summation() {
    let inst = instance(4, 2, 2, 3);
    let cs = constraint_set(&inst);
    let state = random_state(&cs, 3, 2.0);
    let mut log_terms = Vec::new();
    for c in 0..8 {
        let mut e = 0.0;
        for (k, f) in inst.features.iter().enumerate() {
            e += state.lambda_f[k] * f[c];
        }
        e += state.lambda_obs[c / 2] * inst.selection.prob()[c];
        log_terms.push(e);
    }
    let log_n = log_terms.iter().map(|e| e.exp()).sum::<f64>().ln();
    let mut value = log_n;
    for (k, m) in inst.moments.iter().enumerate() {
        value -= state.lambda_f[k] * m.target();
    }
    for (i, o) in inst.observed.observed_mass().iter().enumerate() {
        value -= state.lambda_obs[i] * o;
    }
    let got = dual_objective(&state, &cs).unwrap();
    assert!((got - value).abs() < 1e-12, "{got} vs {value}");
}

#[test]
fn gradient_matches_central_differences() {
    for seed in 0..10 {
        let inst = instance(3 + seed as usize % 3, 2, 1 + seed as usize % 2, 100 + seed);
        let cs = constraint_set(&inst);
        let state = random_state(&cs, seed, 1.5);
        let grad = dual_gradient(&state, &cs).unwrap();
        let h = 1e-6;
        let n_f = state.lambda_f.len();
        for j in 0..grad.len() {
            let mut plus = state.clone();
            let mut minus = state.clone();
            if j < n_f {
                plus.lambda_f[j] += h;
                minus.lambda_f[j] -= h;
            } else {
                plus.lambda_obs[j - n_f] += h;
                minus.lambda_obs[j - n_f] -= h;
            }
            let fd = (dual_objective(&plus, &cs).unwrap() - dual_objective(&minus, &cs).unwrap()) / (2.0 * h);
            let rel = (fd - grad[j]).abs() / grad[j].abs().max(1e-3);
            assert!(rel < 1e-5, "seed {seed} component {j}: {fd} vs {}", grad[j]);
        }
    }
}

#[test]
fn three_by_two_seed_5_matches_oracle() {
    let inst = instance(3, 2, 1, 5);
    let cs = constraint_set(&inst);
    let sol = solve_dual_with(&cs, None, &SolverOptions::default()).unwrap();
    assert!(sol.max_gradient <= 1e-8);
    let joint = reconstruct_primal(&sol.state, &cs).unwrap();
    let oracle = inst.oracle_joint();
    assert!(tv(joint.mass(), &oracle) < 1e-6);
    let est = estimate_population(&inst.observed, &inst.selection, &inst.moments).unwrap();
    assert!(tv(est.marginal.mass(), &inst.oracle_marginal()) < 1e-6);
}

#[test]
fn four_by_two_seed_9_matches_oracle() {
    let inst = instance(4, 2, 1, 9);
    let est = estimate_population(&inst.observed, &inst.selection, &inst.moments).unwrap();
    assert!(tv(est.joint.mass(), &inst.oracle_joint()) < 1e-6);
    assert!(est.max_residual() <= 1e-8);
}

#[test]
fn strong_duality_at_the_optimum() {
    for seed in 0..5 {
        let inst = instance(4, 3, 2, 40 + seed);
        let cs = constraint_set(&inst);
        let est = estimate_population(&inst.observed, &inst.selection, &inst.moments).unwrap();
        let dual = dual_objective(&est.dual, &cs).unwrap();
        let lagrangian = primal_lagrangian(&est.dual, &cs).unwrap();
        let h = entropy(&est.joint);
        assert!((dual - h).abs() < 1e-8, "dual {dual} entropy {h}");
        assert!((lagrangian - h).abs() < 1e-8);
        // the oracle cannot beat the estimate's entropy
        let oracle = maxent_fusion::BinnedJoint::new(inst.grid.clone(), inst.oracle_joint()).unwrap();
        assert!(entropy(&oracle) <= h + 1e-10);
    }
}

#[test]
fn lagrangian_equals_dual_everywhere() {
    let inst = instance(5, 2, 2, 77);
    let cs = constraint_set(&inst);
    for seed in 0..5 {
        let s = random_state(&cs, seed, 1.0);
        let d = dual_objective(&s, &cs).unwrap();
        let l = primal_lagrangian(&s, &cs).unwrap();
        assert!((d - l).abs() < 1e-10);
    }
}

#[test]
fn censored_seed_13_matches_nested_oracle() {
    let inst = censored_instance(4, 2, 1, 13);
    let est = censored_estimate(&inst.shape, &inst.observable, &inst.moments).unwrap();
    let (oracle, w) = inst.oracle();
    assert!(tv(est.estimate.marginal.mass(), &oracle) < 1e-5);
    assert!((est.sample_weight - w).abs() < 1e-5);
}

#[test]
fn censored_with_two_moments_matches_nested_oracle() {
    for seed in 0..3 {
        let inst = censored_instance(7, 4, 2, 200 + seed);
        let est = censored_estimate(&inst.shape, &inst.observable, &inst.moments).unwrap();
        let (oracle, _) = inst.oracle();
        assert!(tv(est.estimate.marginal.mass(), &oracle) < 1e-5, "seed {seed}");
    }
}

#[test]
fn shifting_moment_origin_leaves_estimate_unchanged() {
    let inst = instance(5, 2, 2, 31);
    let a = estimate_population(&inst.observed, &inst.selection, &inst.moments).unwrap();
    let shifted: Vec<_> = inst.moments.iter().map(|m| m.shifted(3.5)).collect();
    let b = estimate_population(&inst.observed, &inst.selection, &shifted).unwrap();
    assert!(tv(a.joint.mass(), b.joint.mass()) < 1e-9);
}

/// Replicas 113 and 296 of the seed-1 benchmark have a prior mean outside the
/// range any population consistent with their samples can reach.
#[test]
fn failed_benchmark_replicas_are_truly_infeasible() {
    let cfg = ReplicaConfig {
        n_replicas: 300,
        rng_seed: 1,
        ..ReplicaConfig::default()
    };
    for replica in [113, 296] {
        let inst = build_instance(&cfg, replica).unwrap();
        let lo = inst.selection_probs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = inst.selection_probs.iter().copied().fold(0.0, f64::max);
        let (min, max) = reachable_mean(&inst.grid.midpoints(), &inst.observed.observed_mass(), lo, hi)
            .expect("mass bounds admit 1");
        assert!(inst.prior_mean < min || inst.prior_mean > max, "replica {replica}");
        let err = estimate_population(&inst.observed, &inst.selection, &inst.moments().unwrap()).unwrap_err();
        assert!(matches!(err, Error::Infeasible { .. }), "replica {replica}: {err}");
    }
    for replica in [0, 1, 2] {
        let inst = build_instance(&cfg, replica).unwrap();
        assert!(estimate_population(&inst.observed, &inst.selection, &inst.moments().unwrap()).is_ok());
    }
}
