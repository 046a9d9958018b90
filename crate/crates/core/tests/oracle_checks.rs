use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rmab_core::experiments::criteria::{random_small_instance, sandwich_row, A7_SLACK};
use rmab_core::experiments::sweep::{make_policy, PolicyKind, PriorityChoice};
use rmab_core::lp::{relax_instance, upper_bound, LpConfig, Truncation};
use rmab_core::model::{ArmModel, InitialOccupancy, InstanceSpec};
use rmab_core::oracle::{exact_policy_value, exact_value};
use rmab_core::scalar::Rational;
use rmab_core::sim::{run_many, SimConfig};

/// a -pull-> b (pays 1), b -pull-> e (pays 2), idle b falls back to a, e absorbs.
fn deterministic_chain() -> InstanceSpec<f64> {
    let idle = vec![vec![1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]];
    let pull = vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 1.0]];
    let rewards = vec![[0.0, 1.0], [0.0, 2.0], [0.0, 0.0]];
    let model = ArmModel::new(vec!["a".into(), "b".into(), "e".into()], idle, pull, rewards, 0.8).unwrap();
    InstanceSpec::new(model, 4, vec![Rational::new(1, 2)], InitialOccupancy::Counts(vec![4, 0, 0])).unwrap()
}

#[test]
fn fluid_balance_is_optimal_on_a_deterministic_chain() {
    let inst = deterministic_chain();
    let relax = relax_instance(&inst, &LpConfig::with_truncation(Truncation::TailTol(1e-10))).unwrap();
    let ub = upper_bound(&relax.solution, inst.arms());
    let v_star = exact_value(&inst, 1e-12).unwrap().value;
    let policy = make_policy(PolicyKind::FluidBalance, &inst, &relax, &PriorityChoice::LpDual).unwrap();
    let fluid = exact_policy_value(&inst, policy.as_ref(), relax.periods).unwrap();
    let slack = 1e-8 + fluid.tail_bound;
    assert!((fluid.value - v_star).abs() <= slack, "fluid {} vs V* {v_star}", fluid.value);
    assert!((v_star - ub).abs() <= slack, "V* {v_star} vs UB {ub}");

    // deterministic dynamics leave nothing for the simulator to average
    let config = SimConfig { horizon: Some(relax.periods), replications: 5, ..SimConfig::default() };
    let sim = run_many(&inst, policy.as_ref(), &config).unwrap();
    assert!((sim.summary.mean - fluid.value).abs() <= 1e-9);
    assert!(sim.summary.std_error <= 1e-12);
}

#[test]
fn sandwich_holds_on_many_random_instances() {
    for seed in 0..20u64 {
        let inst = random_small_instance(&mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let row = sandwich_row(format!("seed-{seed}"), &inst, 7 + seed).unwrap();
        assert!(row.fluid_exact <= row.v_star + A7_SLACK + row.tail_bound, "{row:?}");
        assert!(row.v_star <= row.lp_upper_bound + A7_SLACK + row.tail_bound, "{row:?}");
        // 20 instances at 3 standard errors would flag one in twenty honest runs
        assert!((row.sim_mean - row.fluid_exact).abs() <= 4.0 * row.sim_stderr + 1e-9, "{row:?}");
    }
}

#[test]
fn exact_value_exceeds_every_simple_policy() {
    for seed in 100..110u64 {
        let inst = random_small_instance(&mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let relax = relax_instance(&inst, &LpConfig::with_truncation(Truncation::TailTol(1e-10))).unwrap();
        let v_star = exact_value(&inst, 1e-10).unwrap().value;
        for kind in [PolicyKind::FluidBalance, PolicyKind::Whittle] {
            let Ok(policy) = make_policy(kind, &inst, &relax, &PriorityChoice::LpDual) else { continue };
            let v = exact_policy_value(&inst, policy.as_ref(), relax.periods).unwrap();
            assert!(v.value <= v_star + A7_SLACK + v.tail_bound, "seed {seed} {kind:?}: {} > {v_star}", v.value);
        }
    }
}
