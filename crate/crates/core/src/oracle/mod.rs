//! Exact answers for small instances: dynamic programming over arm counts,
//! exact evaluation of deterministic policies, and closed forms for the
//! slow-and-steady problem.

mod count_space;
mod slow_steady;

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::tail_bound;
use crate::model::{ArmModel, InstanceSpec, IDLE, PULL};
use crate::policies::Policy;

pub use count_space::{binomial_coefficient, pull_vectors, CountSpace};
pub use slow_steady::{expected_shortfall, slow_steady_forms, SlowSteadyForms};

/// Bound on state-action pairs for exact value iteration.
/// Successor count states with probabilities.
type Sparse = Vec<(usize, f64)>;

pub const STATE_ACTION_LIMIT: u128 = 10_000_000;
pub const DEFAULT_TOL: f64 = 1e-10;
/// Cached transition entries above which rows are recomputed every sweep.
const CACHE_LIMIT: usize = 20_000_000;

/// Per-group multinomial laws, keyed by `(state, action, group size)`.
struct Laws<'a> {
    model: &'a ArmModel<f64>,
    space: &'a CountSpace,
    ln_fact: Vec<f64>,
    memo: HashMap<(usize, usize, u64), Vec<(u64, f64)>>,
}

impl<'a> Laws<'a> {
    fn new(model: &'a ArmModel<f64>, space: &'a CountSpace) -> Self {
        let mut ln_fact = vec![0.0; space.arms() as usize + 1];
        for k in 1..ln_fact.len() {
            ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
        }
        Self { model, space, ln_fact, memo: HashMap::new() }
    }

    /// Law of where `size` arms in `s` taking `a` land, as packed keys.
    fn group(&mut self, s: usize, a: usize, size: u64) -> &[(u64, f64)] {
        let (model, space, ln_fact) = (self.model, self.space, &self.ln_fact);
        self.memo.entry((s, a, size)).or_insert_with(|| {
            let row = model.row(s, a);
            let support: Vec<usize> = (0..row.len()).filter(|&k| row[k] > 0.0).collect();
            let mut out = Vec::new();
            for comp in count_space::compositions(size, support.len()) {
                let mut counts = vec![0u64; row.len()];
                let mut lp = ln_fact[size as usize];
                for (&k, &c) in support.iter().zip(&comp) {
                    counts[k] = c;
                    lp += c as f64 * row[k].ln() - ln_fact[c as usize];
                }
                out.push((space.key(&counts), lp.exp()));
            }
            out
        })
    }

    /// Next-count law given counts and pulls, sorted by state index.
    fn transition(&mut self, counts: &[u64], pulls: &[u64]) -> Vec<(usize, f64)> {
        let mut dist: BTreeMap<u64, f64> = BTreeMap::from([(0, 1.0)]);
        for s in 0..counts.len() {
            for (a, size) in [(IDLE, counts[s] - pulls[s]), (PULL, pulls[s])] {
                if size == 0 {
                    continue;
                }
                let law = self.group(s, a, size).to_vec();
                let mut next = BTreeMap::new();
                for (k1, p1) in &dist {
                    for (k2, p2) in &law {
                        *next.entry(k1 + k2).or_insert(0.0) += p1 * p2;
                    }
                }
                dist = next;
            }
        }
        dist.into_iter()
            .map(|(k, p)| (self.space.index_of_key(k).expect("reachable count vector"), p))
            .collect()
    }
}

fn period_reward(model: &ArmModel<f64>, counts: &[u64], pulls: &[u64]) -> f64 {
    (0..counts.len())
        .map(|s| model.reward(s, PULL) * pulls[s] as f64 + model.reward(s, IDLE) * (counts[s] - pulls[s]) as f64)
        .sum()
}

fn constant_budget(instance: &InstanceSpec<f64>) -> Result<u64> {
    let b = instance.budget_at(1);
    let horizon = instance.budget_fractions().len();
    if (1..=horizon + 1).any(|t| instance.budget_at(t) != b) {
        return Err(Error::Dimension("exact value iteration needs a time-invariant budget".into()));
    }
    Ok(b)
}

#[derive(Clone, Debug, Serialize)]
pub struct ExactValue {
    /// `V*_N = γ·W(Z_1)`, rewards weighted `γ^t` from `t = 1`.
    pub value: f64,
    pub iterations: usize,
    pub residual: f64,
    pub states: usize,
    pub state_actions: u128,
    /// Component-wise optimal stationary pulls per count state.
    #[serde(skip)]
    pub policy: Vec<Vec<u64>>,
    #[serde(skip)]
    pub space: Option<CountSpace>,
}

fn guarded_space(instance: &InstanceSpec<f64>, budget: u64) -> Result<(CountSpace, u128)> {
    let n = instance.model().n_states();
    let size = CountSpace::size_of(instance.arms(), n);
    if size > STATE_ACTION_LIMIT {
        return Err(Error::SizeGuard { size, limit: STATE_ACTION_LIMIT });
    }
    let space = CountSpace::new(instance.arms(), n, STATE_ACTION_LIMIT)?;
    let pairs: u128 = space.states().iter().map(|c| count_pull_vectors(c, budget)).sum();
    if pairs > STATE_ACTION_LIMIT {
        return Err(Error::SizeGuard { size: pairs, limit: STATE_ACTION_LIMIT });
    }
    Ok((space, pairs))
}

fn count_pull_vectors(counts: &[u64], budget: u64) -> u128 {
    // ways[r] = number of partial pull vectors using r pulls
    let mut ways = vec![0u128; budget as usize + 1];
    ways[0] = 1;
    for &c in counts {
        let mut next = vec![0u128; ways.len()];
        for (r, w) in ways.iter().enumerate() {
            if *w == 0 {
                continue;
            }
            for u in 0..=c.min(budget - r as u64) {
                next[r + u as usize] += w;
            }
        }
        ways = next;
    }
    ways[budget as usize]
}

/// Optimal value by value iteration on the count-space MDP, stopped when the
/// residual is `≤ tol·(1−γ)`.
pub fn exact_value(instance: &InstanceSpec<f64>, tol: f64) -> Result<ExactValue> {
    let model = instance.model();
    let gamma = *model.discount();
    let budget = constant_budget(instance)?;
    let (space, pairs) = guarded_space(instance, budget)?;
    let mut laws = Laws::new(model, &space);
    let actions: Vec<Vec<Vec<u64>>> = space.states().iter().map(|c| pull_vectors(c, budget)).collect();
    let rewards: Vec<Vec<f64>> = space
        .states()
        .iter()
        .zip(&actions)
        .map(|(c, acts)| acts.iter().map(|u| period_reward(model, c, u)).collect())
        .collect();

    let mut cache: Option<Vec<Vec<Sparse>>> = Some(Vec::with_capacity(space.len()));
    let mut entries = 0usize;
    for (c, acts) in space.states().iter().zip(&actions) {
        let rows: Vec<Vec<(usize, f64)>> = acts.iter().map(|u| laws.transition(c, u)).collect();
        entries += rows.iter().map(Vec::len).sum::<usize>();
        if entries > CACHE_LIMIT {
            cache = None;
            break;
        }
        cache.as_mut().expect("cache").push(rows);
    }

    let target = tol * (1.0 - gamma);
    let mut w = vec![0.0; space.len()];
    let mut best = vec![0usize; space.len()];
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    while residual > target {
        let mut next = vec![0.0; space.len()];
        residual = 0.0;
        for i in 0..space.len() {
            let mut top = f64::NEG_INFINITY;
            for (k, u) in actions[i].iter().enumerate() {
                let cont: f64 = match &cache {
                    Some(rows) => rows[i][k].iter().map(|(j, p)| p * w[*j]).sum(),
                    None => laws.transition(space.state(i), u).iter().map(|(j, p)| p * w[*j]).sum(),
                };
                let q = rewards[i][k] + gamma * cont;
                if q > top {
                    top = q;
                    best[i] = k;
                }
            }
            residual = residual.max((top - w[i]).abs());
            next[i] = top;
        }
        w = next;
        iterations += 1;
    }
    let start = space.index_of(instance.initial_counts()).expect("initial counts in space");
    let policy = best.iter().zip(&actions).map(|(&k, acts)| acts[k].clone()).collect();
    Ok(ExactValue {
        value: gamma * w[start],
        iterations,
        residual,
        states: space.len(),
        state_actions: pairs,
        policy,
        space: Some(space),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct PolicyValue {
    /// `E Σ_{t ≤ T} γ^t R_t`.
    pub value: f64,
    pub horizon: usize,
    /// `2BNγ^{T+1}/(1−γ)`, bounding the neglected tail.
    pub tail_bound: f64,
}

/// Expected discounted reward of a deterministic policy over `horizon`
/// periods, by propagating the exact count distribution.
pub fn exact_policy_value(instance: &InstanceSpec<f64>, policy: &dyn Policy, horizon: usize) -> Result<PolicyValue> {
    let model = instance.model();
    let gamma = *model.discount();
    let n = model.n_states();
    let size = CountSpace::size_of(instance.arms(), n);
    if size > STATE_ACTION_LIMIT {
        return Err(Error::SizeGuard { size, limit: STATE_ACTION_LIMIT });
    }
    let space = CountSpace::new(instance.arms(), n, STATE_ACTION_LIMIT)?;
    let mut laws = Laws::new(model, &space);
    let mut dist = vec![0.0; space.len()];
    dist[space.index_of(instance.initial_counts()).expect("initial counts in space")] = 1.0;
    let mut value = 0.0;
    let mut weight = 1.0;
    for t in 1..=horizon {
        weight *= gamma;
        let budget = instance.budget_at(t);
        let mut next = vec![0.0; space.len()];
        for i in 0..space.len() {
            let p = dist[i];
            if p == 0.0 {
                continue;
            }
            let c = space.state(i);
            let (pulls, _) = policy.act(t, c, budget)?;
            if pulls.iter().sum::<u64>() != budget || pulls.iter().zip(c).any(|(u, z)| u > z) {
                return Err(Error::InfeasiblePulls(format!("period {t}: {pulls:?} for counts {c:?}")));
            }
            value += weight * p * period_reward(model, c, &pulls);
            for (j, q) in laws.transition(c, &pulls) {
                next[j] += p * q;
            }
        }
        dist = next;
    }
    Ok(PolicyValue {
        value,
        horizon,
        tail_bound: tail_bound(instance.arms(), gamma, *model.reward_bound(), horizon),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::builders::build_benchmark_4state;
    use crate::lp::{relax_instance, upper_bound, LpConfig, Truncation};
    use crate::policies::{PriorityPolicy, PrioritySchedule};
    use crate::scalar::Rational;
    use crate::InitialOccupancy;

    fn two_state(arms: u64, alpha: Rational, initial: Vec<u64>) -> InstanceSpec<f64> {
        // state a pays 1 when pulled and is absorbing; b moves to a when pulled
        let m = ArmModel::new(
            vec!["a".into(), "b".into()],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![1.0, 0.0], vec![0.5, 0.5]],
            vec![[0.0, 1.0], [0.0, 0.0]],
            0.5,
        )
        .unwrap();
        InstanceSpec::new(m, arms, vec![alpha], InitialOccupancy::Counts(initial)).unwrap()
    }

    #[test]
    fn matches_forward_enumeration() {
        let inst = two_state(2, Rational::new(1, 2), vec![1, 1]);
        let exact = exact_value(&inst, 1e-12).unwrap();
        // pulling the arm in a forever is optimal: Σ γ^t = 1
        assert!((exact.value - 1.0).abs() < 1e-10);
        let pol = PriorityPolicy::new("a-first", PrioritySchedule::constant(vec![1.0, 0.0]));
        let fwd = exact_policy_value(&inst, &pol, 20).unwrap();
        assert!((fwd.value - (1.0 - 0.5f64.powi(20))).abs() < 1e-12);
        assert!(exact.value - fwd.value <= fwd.tail_bound + 1e-12);
    }

    #[test]
    fn single_arm_by_hand() {
        // always pulling from b: W(a) = 2, W(b) = 1/2 + W(b)/4, so V = γ·2/3
        let inst = two_state(1, Rational::from_integer(1), vec![0, 1]);
        assert!((exact_value(&inst, 1e-12).unwrap().value - 1.0 / 3.0).abs() < 1e-10);
        let inst = two_state(1, Rational::from_integer(0), vec![0, 1]);
        assert_eq!(exact_value(&inst, 1e-12).unwrap().value, 0.0);
    }

    #[test]
    fn lp_bound_dominates() {
        let inst = build_benchmark_4state::<f64>().instantiate(6).unwrap();
        let exact = exact_value(&inst, 1e-10).unwrap();
        let relax = relax_instance(&inst, &LpConfig::with_truncation(Truncation::Fixed(45))).unwrap();
        let ub = upper_bound(&relax.solution, 6);
        let tail = tail_bound(6, 0.5, 1.0, 45);
        assert!(exact.value <= ub + tail + 1e-8, "{} > {ub}", exact.value);
    }

    #[test]
    fn relabeling_states_keeps_the_value() {
        let inst = build_benchmark_4state::<f64>().instantiate(6).unwrap();
        let base = exact_value(&inst, 1e-10).unwrap().value;
        let perm = [3, 1, 0, 2];
        let model = inst.model().permuted(&perm);
        let counts: Vec<u64> = perm.iter().map(|&old| inst.initial_counts()[old]).collect();
        let relabeled =
            InstanceSpec::new(model, 6, inst.budget_fractions().to_vec(), InitialOccupancy::Counts(counts)).unwrap();
        let v = exact_value(&relabeled, 1e-10).unwrap().value;
        assert!((v - base).abs() < 1e-9);
    }

    #[test]
    fn zero_reward_policy_value() {
        let m = ArmModel::new(
            vec!["a".into(), "b".into()],
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            vec![[0.0, 0.0], [0.0, 0.0]],
            0.9,
        )
        .unwrap();
        let inst = InstanceSpec::new(m, 4, vec![Rational::new(1, 2)], InitialOccupancy::Counts(vec![2, 2])).unwrap();
        let pol = PriorityPolicy::new("p", PrioritySchedule::constant(vec![0.0, 0.0]));
        assert_eq!(exact_policy_value(&inst, &pol, 30).unwrap().value, 0.0);
        assert_eq!(exact_value(&inst, 1e-10).unwrap().value, 0.0);
    }

    #[test]
    fn size_guard_trips() {
        let inst = build_benchmark_4state::<f64>().instantiate(600).unwrap();
        assert!(matches!(exact_value(&inst, 1e-10), Err(Error::SizeGuard { .. })));
    }

    #[test]
    fn pull_vector_counts_agree() {
        for c in [vec![2u64, 1, 3], vec![0, 0, 4], vec![5]] {
            for b in 0..=c.iter().sum::<u64>() {
                assert_eq!(count_pull_vectors(&c, b), pull_vectors(&c, b).len() as u128);
            }
        }
    }
}
