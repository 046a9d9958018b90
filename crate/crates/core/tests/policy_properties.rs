use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rmab_core::experiments::builders::build_benchmark_4state;
use rmab_core::experiments::sweep::{make_policy, prepare, PolicyKind, PriorityChoice};
use rmab_core::policies::{priority_greedy_action, whittle_action, whittle_report};
use rmab_core::scalar::floor_times;

proptest! {
    #[test]
    fn greedy_pulls_are_feasible(
        counts in prop::collection::vec(0u64..50, 1..6),
        scores in prop::collection::vec(-5.0f64..5.0, 6),
        frac in 0.0f64..=1.0,
    ) {
        let total: u64 = counts.iter().sum();
        let budget = (frac * total as f64).floor() as u64;
        let u = priority_greedy_action(&scores[..counts.len()], &counts, budget).unwrap();
        prop_assert_eq!(u.iter().sum::<u64>(), budget);
        prop_assert!(u.iter().zip(&counts).all(|(a, b)| a <= b));
        prop_assert!(priority_greedy_action(&scores[..counts.len()], &counts, total + 1).is_err());
    }

    #[test]
    fn whittle_pulls_are_feasible(counts in prop::collection::vec(0u64..300, 4), frac in 0.0f64..=1.0) {
        let model = build_benchmark_4state::<f64>().model().clone();
        let report = whittle_report(&model, 201);
        let budget = (frac * counts.iter().sum::<u64>() as f64).floor() as u64;
        let u = whittle_action(&report, &counts, budget).unwrap();
        prop_assert_eq!(u.iter().sum::<u64>(), budget);
        prop_assert!(u.iter().zip(&counts).all(|(a, b)| a <= b));
    }
}

fn random_counts(rng: &mut ChaCha8Rng, center: &[f64], spread: f64, arms: u64) -> Vec<u64> {
    let mut c: Vec<u64> =
        center.iter().map(|z| (z * arms as f64 + spread * rng.random_range(-1.0..1.0)).max(0.0).round() as u64).collect();
    // restore the total on the largest state
    let total: u64 = c.iter().sum();
    let big = (0..c.len()).max_by_key(|&s| c[s]).unwrap();
    if total > arms {
        c[big] -= (total - arms).min(c[big]);
    } else {
        c[big] += arms - total;
    }
    c
}

/// Largest `|X̃₁ − X̃₂|₁ / |Z̃₁ − Z̃₂|₁` over random pairs of count vectors near
/// the fluid path.
fn max_quotient(arms: u64, pairs: usize) -> f64 {
    let template = build_benchmark_4state::<f64>();
    let (instance, relax) = prepare(&template, arms, 1e-6).unwrap();
    let policy = make_policy(PolicyKind::FluidBalance, &instance, &relax, &PriorityChoice::LpDual).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(arms);
    let mut worst: f64 = 0.0;
    for i in 0..pairs {
        let t = 1 + i % 5;
        let z = relax.solution.occupation.z(t);
        let spread = 3.0 * (arms as f64).sqrt();
        let a = random_counts(&mut rng, &z, spread, arms);
        let b = random_counts(&mut rng, &z, spread, arms);
        let dz: u64 = a.iter().zip(&b).map(|(x, y)| x.abs_diff(*y)).sum();
        if dz == 0 {
            continue;
        }
        let budget = floor_times(instance.budget_fraction(t), arms);
        let (ua, _) = policy.act(t, &a, budget).unwrap();
        let (ub, _) = policy.act(t, &b, budget).unwrap();
        // pull and idle components both move
        let dx: u64 = (0..a.len()).map(|s| ua[s].abs_diff(ub[s]) + (a[s] - ua[s]).abs_diff(b[s] - ub[s])).sum();
        worst = worst.max(dx as f64 / dz as f64);
    }
    worst
}

#[test]
fn induced_map_difference_quotients_are_bounded() {
    let n_states = 4.0;
    for arms in [600, 6000, 60000] {
        let q = max_quotient(arms, 2000);
        assert!(q <= 10.0 * n_states, "N={arms}: quotient {q}");
    }
}
