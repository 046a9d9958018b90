//! Truncated single-arm occupation-measure LP: construction, solution,
//! the N-arm upper bound and dual-based priority scores.

pub mod simplex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ArmModel, InstanceSpec, OccupationMeasure, PULL};
use crate::policies::PrioritySchedule;
use crate::scalar::Scalar;
pub use simplex::{LinearProgram, PivotRule, SimplexOptions, SimplexResult};

/// How many periods the LP keeps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Truncation {
    Fixed(usize),
    /// `⌈½ log N / log(1/γ)⌉`
    HalfLog,
    /// Smallest `T` with `2BNγ^{T+1}/(1−γ) < tol`.
    TailTol(f64),
}

#[derive(Clone, Debug)]
pub struct LpConfig {
    pub truncation: Truncation,
    pub pivot_tol: f64,
    pub objective_tol: f64,
    pub pivot_rule: PivotRule,
    pub max_iterations: Option<usize>,
    /// Start from the greedy feasible basis built with the problem.
    pub crash_start: bool,
}

impl Default for LpConfig {
    fn default() -> Self {
        Self {
            truncation: Truncation::HalfLog,
            pivot_tol: 1e-9,
            objective_tol: 1e-9,
            pivot_rule: PivotRule::DantzigThenBland,
            max_iterations: None,
            crash_start: true,
        }
    }
}

impl LpConfig {
    pub fn with_truncation(truncation: Truncation) -> Self {
        Self { truncation, ..Self::default() }
    }

    fn simplex_options(&self) -> SimplexOptions {
        SimplexOptions {
            pivot_tol: self.pivot_tol,
            objective_tol: self.objective_tol,
            rule: self.pivot_rule,
            max_iterations: self.max_iterations,
            ..SimplexOptions::default()
        }
    }
}

pub fn tail_bound(arms: u64, gamma: f64, reward_bound: f64, periods: usize) -> f64 {
    2.0 * reward_bound * arms as f64 * gamma.powi(periods as i32 + 1) / (1.0 - gamma)
}

pub fn choose_truncation(arms: u64, gamma: f64, reward_bound: f64, rule: Truncation) -> usize {
    match rule {
        Truncation::Fixed(t) => t,
        Truncation::HalfLog => {
            let t = 0.5 * (arms.max(1) as f64).ln() / (1.0 / gamma).ln();
            (t.ceil() as usize).max(1)
        }
        Truncation::TailTol(tol) => {
            let mut t = 1;
            while tail_bound(arms, gamma, reward_bound, t) >= tol && t < 1_000_000 {
                t += 1;
            }
            t
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    /// `Σ_a x_1(s,a) = z_1(s)`
    Initial { state: usize },
    /// `Σ_s x_t(s,1) = α_t`
    Budget { period: usize },
    /// `Σ_a x_t(s,a) = Σ x_{t−1} p(·,·,s)`, for `t ≥ 2`
    Flow { period: usize, state: usize },
}

#[derive(Clone, Debug)]
pub struct LpProblem<S = f64> {
    periods: usize,
    n_states: usize,
    program: LinearProgram<S>,
    rows: Vec<RowKind>,
    discount_powers: Vec<S>,
    crash: Vec<usize>,
}

impl<S: Scalar> LpProblem<S> {
    pub fn periods(&self) -> usize {
        self.periods
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_columns(&self) -> usize {
        self.program.columns.len()
    }

    pub fn n_rows(&self) -> usize {
        self.program.n_rows
    }

    pub fn program(&self) -> &LinearProgram<S> {
        &self.program
    }

    pub fn rows(&self) -> &[RowKind] {
        &self.rows
    }

    pub fn crash_basis(&self) -> &[usize] {
        &self.crash
    }

    /// Column of `x_t(s,a)`, `t` from 1.
    pub fn column(&self, t: usize, s: usize, a: usize) -> usize {
        ((t - 1) * self.n_states + s) * 2 + a
    }

    pub fn budget_row(&self, t: usize) -> usize {
        t * (self.n_states + 1) - 1
    }

    /// `γ^t`, `t` from 1.
    pub fn discount_power(&self, t: usize) -> &S {
        &self.discount_powers[t - 1]
    }

    pub fn occupation_from(&self, x: &[S]) -> OccupationMeasure<S> {
        let cells = x.chunks(2).map(|c| [c[0].clone(), c[1].clone()]).collect();
        OccupationMeasure::new(self.periods, self.n_states, cells)
    }

    /// Largest absolute residual over all equality rows, plus the most
    /// negative entry.
    pub fn max_violation(&self, occupation: &OccupationMeasure<S>) -> f64 {
        let mut lhs = vec![0.0; self.program.n_rows];
        let mut worst: f64 = 0.0;
        for t in 1..=self.periods {
            for s in 0..self.n_states {
                for a in 0..2 {
                    let v = occupation.x(t, s, a).to_f64_lossy();
                    worst = worst.max(-v);
                    for (r, c) in &self.program.columns[self.column(t, s, a)] {
                        lhs[*r] += c.to_f64_lossy() * v;
                    }
                }
            }
        }
        lhs.iter()
            .zip(&self.program.rhs)
            .fold(worst, |acc, (l, b)| acc.max((l - b.to_f64_lossy()).abs()))
    }
}

fn period_value<S: Clone>(list: &[S], t: usize) -> S {
    list[(t - 1).min(list.len() - 1)].clone()
}

/// Build the `T`-period LP. `alpha[t−1]` is the budget fraction of period
/// `t`; the last entry repeats.
pub fn build_lp<S: Scalar>(model: &ArmModel<S>, alpha: &[S], z1: &[S], periods: usize) -> Result<LpProblem<S>> {
    if periods < 1 {
        return Err(Error::InvalidTruncation);
    }
    let n = model.n_states();
    if z1.len() != n {
        return Err(Error::Dimension(format!("initial distribution has {} entries, model has {n} states", z1.len())));
    }
    if alpha.is_empty() {
        return Err(Error::BudgetOutOfRange("empty budget list".into()));
    }
    for a in alpha {
        if a < &S::zero() || a > &S::one() {
            return Err(Error::BudgetOutOfRange(format!("{a:?}")));
        }
    }
    let gamma = model.discount().clone();
    let discount_powers: Vec<S> = (1..=periods).map(|t| gamma.powu(t)).collect();
    let block = n + 1;
    let n_rows = periods * block;
    let initial_or_flow = |t: usize, s: usize| (t - 1) * block + s;

    let mut rows = Vec::with_capacity(n_rows);
    for t in 1..=periods {
        for s in 0..n {
            rows.push(if t == 1 { RowKind::Initial { state: s } } else { RowKind::Flow { period: t, state: s } });
        }
        rows.push(RowKind::Budget { period: t });
    }

    let mut columns = Vec::with_capacity(periods * n * 2);
    let mut objective = Vec::with_capacity(periods * n * 2);
    for t in 1..=periods {
        for s in 0..n {
            for a in 0..2 {
                let mut col = vec![(initial_or_flow(t, s), S::one())];
                if a == PULL {
                    col.push((t * block - 1, S::one()));
                }
                if t < periods {
                    for (next, p) in model.row(s, a).iter().enumerate() {
                        if !p.is_zero() {
                            col.push((initial_or_flow(t + 1, next), -p.clone()));
                        }
                    }
                }
                columns.push(col);
                objective.push(discount_powers[t - 1].clone() * model.reward(s, a).clone());
            }
        }
    }

    let mut rhs = vec![S::zero(); n_rows];
    for t in 1..=periods {
        if t == 1 {
            rhs[..n].clone_from_slice(z1);
        }
        rhs[t * block - 1] = period_value(alpha, t);
    }

    // Greedy crash: fill the budget in state order; one state per period
    // straddles the budget and keeps both columns basic.
    let mut crash = Vec::with_capacity(n_rows);
    let mut z = z1.to_vec();
    for t in 1..=periods {
        let a_t = period_value(alpha, t);
        let mut cum = S::zero();
        let mut split = n - 1;
        for (s, zs) in z.iter().enumerate() {
            cum = cum + zs.clone();
            if cum >= a_t {
                split = s;
                break;
            }
        }
        let mut x = vec![[S::zero(), S::zero()]; n];
        let mut rem = a_t.clone();
        for s in 0..n {
            let base = ((t - 1) * n + s) * 2;
            if s < split {
                crash.push(base + 1);
                x[s][1] = z[s].clone();
                rem = rem - z[s].clone();
            } else if s == split {
                crash.push(base);
                crash.push(base + 1);
                x[s][1] = rem.clone();
                x[s][0] = z[s].clone() - rem.clone();
            } else {
                crash.push(base);
                x[s][0] = z[s].clone();
            }
        }
        z = crate::model::propagate_mean(&x, model);
    }

    Ok(LpProblem {
        periods,
        n_states: n,
        program: LinearProgram { n_rows, columns, objective, rhs },
        rows,
        discount_powers,
        crash,
    })
}

#[derive(Clone, Debug)]
pub struct LpSolution<S = f64> {
    pub occupation: OccupationMeasure<S>,
    /// Per-arm value `Σ_t γ^t Σ x_t r`.
    pub objective: S,
    /// Budget prices `λ_t` in per-period reward units.
    pub duals: Vec<S>,
    pub warnings: Vec<String>,
    pub iterations: usize,
}

impl<S: Scalar> LpSolution<S> {
    pub fn periods(&self) -> usize {
        self.occupation.periods()
    }
}

pub fn solve_lp<S: Scalar>(problem: &LpProblem<S>, config: &LpConfig) -> Result<LpSolution<S>> {
    let start = config.crash_start.then_some(problem.crash.as_slice());
    // period-t columns carry costs of order γ^t; price them on a common scale
    let price_scale: Vec<S> = (0..problem.n_columns())
        .map(|j| problem.discount_powers[j / (2 * problem.n_states)].clone())
        .collect();
    let res = simplex::solve_scaled(&problem.program, start, &config.simplex_options(), Some(&price_scale))?;
    let mut warnings = Vec::new();
    if res.alternative_optima {
        warnings.push("nonbasic column with zero reduced cost at optimum; occupation measure may not be unique".into());
    }
    let duals = (1..=problem.periods)
        .map(|t| res.duals[problem.budget_row(t)].clone() / problem.discount_power(t).clone())
        .collect();
    Ok(LpSolution {
        occupation: problem.occupation_from(&res.x),
        objective: res.objective,
        duals,
        warnings,
        iterations: res.iterations,
    })
}

/// `N ·` per-arm value.
pub fn upper_bound<S: Scalar>(solution: &LpSolution<S>, arms: u64) -> S {
    S::from_u64(arms).expect("arm count fits the scalar") * solution.objective.clone()
}

/// Problem and solution for an instance, with the LP budget `⌊α_t N⌋/N`.
#[derive(Clone, Debug)]
pub struct Relaxation<S = f64> {
    pub problem: LpProblem<S>,
    pub solution: LpSolution<S>,
    pub periods: usize,
    pub alpha: Vec<S>,
}

pub fn relax_instance<S: Scalar>(instance: &InstanceSpec<S>, config: &LpConfig) -> Result<Relaxation<S>> {
    let model = instance.model();
    let periods = choose_truncation(
        instance.arms(),
        model.discount().to_f64_lossy(),
        model.reward_bound().to_f64_lossy(),
        config.truncation,
    );
    if periods < 1 {
        return Err(Error::InvalidTruncation);
    }
    let alpha: Vec<S> = instance.lp_budget(periods).iter().map(S::from_ratio).collect();
    let z1: Vec<S> = instance.initial_distribution().iter().map(S::from_ratio).collect();
    let problem = build_lp(model, &alpha, &z1, periods).map_err(|e| e.in_stage("build_lp"))?;
    let solution = solve_lp(&problem, config).map_err(|e| e.in_stage("solve_lp"))?;
    Ok(Relaxation { problem, solution, periods, alpha })
}

/// Finite-horizon DP with per-pull penalty `λ_t`, `V_{T+1} = 0`.
/// Returns `Q_t(s,a)` for `t = 1..=T`.
pub fn penalized_q<S: Scalar>(model: &ArmModel<S>, penalties: &[S]) -> Vec<Vec<[S; 2]>> {
    let n = model.n_states();
    let gamma = model.discount().clone();
    let mut next = vec![S::zero(); n];
    let mut out = vec![Vec::new(); penalties.len()];
    for t in (0..penalties.len()).rev() {
        let q: Vec<[S; 2]> = (0..n)
            .map(|s| {
                let cont = |a: usize| {
                    model.row(s, a)
                        .iter()
                        .zip(&next)
                        .fold(S::zero(), |acc, (p, v)| acc + p.clone() * v.clone())
                };
                [
                    model.reward(s, 0).clone() + gamma.clone() * cont(0),
                    model.reward(s, 1).clone() - penalties[t].clone() + gamma.clone() * cont(1),
                ]
            })
            .collect();
        next = q.iter().map(|[a, b]| S::max_of(a.clone(), b.clone())).collect();
        out[t] = q;
    }
    out
}

/// `P_t(s) = Q_t(s,1) − Q_t(s,0)` under the LP budget prices.
pub fn default_priorities<S: Scalar>(solution: &LpSolution<S>, model: &ArmModel<S>) -> PrioritySchedule<S> {
    let q = penalized_q(model, &solution.duals);
    PrioritySchedule::new(
        q.into_iter()
            .map(|row| row.into_iter().map(|[idle, pull]| pull - idle).collect())
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::builders::{build_benchmark_4state, build_slow_and_steady, SlowSteadyParams};
    use crate::scalar::Rational;
    use num_rational::BigRational;

    fn single_state() -> ArmModel<f64> {
        ArmModel::new(
            vec!["s".into()],
            vec![vec![1.0]],
            vec![vec![1.0]],
            vec![[0.0, 1.0]],
            0.5,
        )
        .unwrap()
    }

    #[test]
    fn truncation_rules() {
        assert_eq!(choose_truncation(10_000, 0.5, 1.0, Truncation::HalfLog), 7);
        assert_eq!(choose_truncation(1, 0.9, 1.0, Truncation::HalfLog), 1);
        assert_eq!(choose_truncation(1, 0.1, 1.0, Truncation::HalfLog), 1);
        assert_eq!(choose_truncation(600, 0.5, 1.0, Truncation::TailTol(1e-15)), 61);
        assert_eq!(choose_truncation(5, 0.5, 1.0, Truncation::Fixed(4)), 4);
    }

    #[test]
    fn benchmark_dimensions() {
        let inst = build_benchmark_4state::<f64>().instantiate(600).unwrap();
        let alpha = [0.5];
        let z1 = [1.0 / 6.0, 1.0 / 3.0, 0.5, 0.0];
        let lp = build_lp(inst.model(), &alpha, &z1, 100).unwrap();
        assert_eq!(lp.n_columns(), 800);
        assert_eq!(lp.n_rows(), 4 * 99 + 100 + 4);
        assert_eq!(lp.crash_basis().len(), lp.n_rows());
        assert!(matches!(build_lp(inst.model(), &alpha, &z1, 0), Err(Error::InvalidTruncation)));
        assert!(matches!(build_lp(inst.model(), &[1.5], &z1, 3), Err(Error::BudgetOutOfRange(_))));
    }

    #[test]
    fn slow_steady_dimensions() {
        let tpl = build_slow_and_steady::<f64>(&SlowSteadyParams::pinned()).unwrap();
        let inst = tpl.instantiate(900).unwrap();
        let z1: Vec<f64> = inst.initial_distribution().iter().map(f64::from_ratio).collect();
        let lp = build_lp(inst.model(), &[0.9], &z1, 200).unwrap();
        assert_eq!(lp.n_columns(), 2400);
        assert_eq!(lp.n_rows(), 199 * 6 + 200 + 6);
    }

    #[test]
    fn forced_single_state_objective() {
        let lp = build_lp(&single_state(), &[0.5], &[1.0], 3).unwrap();
        for crash_start in [true, false] {
            let cfg = LpConfig { crash_start, ..LpConfig::default() };
            let sol = solve_lp(&lp, &cfg).unwrap();
            assert!((sol.objective - 0.4375).abs() < 1e-12);
            assert!(lp.max_violation(&sol.occupation) < 1e-12);
        }
    }

    #[test]
    fn full_budget_pulls_everything() {
        let inst = build_benchmark_4state::<f64>().instantiate(600).unwrap();
        let z1 = [1.0 / 6.0, 1.0 / 3.0, 0.5, 0.0];
        let lp = build_lp(inst.model(), &[1.0], &z1, 5).unwrap();
        let sol = solve_lp(&lp, &LpConfig::default()).unwrap();
        for t in 1..=5 {
            let idle: f64 = (0..4).map(|s| *sol.occupation.x(t, s, 0)).sum();
            assert!(idle.abs() < 1e-12);
        }
    }

    #[test]
    fn slow_steady_per_arm_value() {
        let tpl = build_slow_and_steady::<f64>(&SlowSteadyParams::pinned()).unwrap();
        let inst = tpl.instantiate(900).unwrap();
        let cfg = LpConfig::with_truncation(Truncation::TailTol(1e-9 * 6561.0));
        let relax = relax_instance(&inst, &cfg).unwrap();
        assert!((relax.solution.objective - 7.29).abs() < 1e-6, "{}", relax.solution.objective);
        assert!((upper_bound(&relax.solution, 900) - 6561.0).abs() < 1e-3);
        assert!(relax.problem.max_violation(&relax.solution.occupation) < 1e-8);
    }

    #[test]
    fn upper_bound_is_linear() {
        let lp = build_lp(&single_state(), &[0.5], &[1.0], 3).unwrap();
        let sol = solve_lp(&lp, &LpConfig::default()).unwrap();
        assert_eq!(upper_bound(&sol, 1), sol.objective);
        assert_eq!(upper_bound(&sol, 8), 8.0 * sol.objective);
    }

    #[test]
    fn exact_and_float_agree_on_benchmark() {
        let exact = build_benchmark_4state::<BigRational>().instantiate(600).unwrap();
        let cfg = LpConfig::with_truncation(Truncation::Fixed(6));
        let relax_q = relax_instance(&exact, &cfg).unwrap();
        let float = build_benchmark_4state::<f64>().instantiate(600).unwrap();
        let relax_f = relax_instance(&float, &cfg).unwrap();
        let q = relax_q.solution.objective.to_f64_lossy();
        assert!((q - relax_f.solution.objective).abs() < 1e-12);
        assert!(relax_q.problem.max_violation(&relax_q.solution.occupation) < 1e-15);
    }

    #[test]
    fn single_precision_solve() {
        let inst = build_benchmark_4state::<f32>().instantiate(600).unwrap();
        let relax = relax_instance(&inst, &LpConfig::with_truncation(Truncation::Fixed(10))).unwrap();
        let f64_inst = build_benchmark_4state::<f64>().instantiate(600).unwrap();
        let reference = relax_instance(&f64_inst, &LpConfig::with_truncation(Truncation::Fixed(10))).unwrap();
        assert!((relax.solution.objective as f64 - reference.solution.objective).abs() < 1e-4);
    }

    #[test]
    fn identical_states_get_equal_scores() {
        let m = ArmModel::new(
            vec!["a".into(), "b".into()],
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            vec![[0.0, 1.0], [0.0, 1.0]],
            0.9,
        )
        .unwrap();
        let lp = build_lp(&m, &[0.5], &[0.5, 0.5], 4).unwrap();
        let sol = solve_lp(&lp, &LpConfig::default()).unwrap();
        let p = default_priorities(&sol, &m);
        for t in 1..=4 {
            assert_eq!(p.at(t)[0], p.at(t)[1]);
        }
    }

    #[test]
    fn slow_steady_first_period_priorities() {
        let tpl = build_slow_and_steady::<f64>(&SlowSteadyParams::pinned()).unwrap();
        let inst = tpl.instantiate(900).unwrap();
        let relax = relax_instance(&inst, &LpConfig::with_truncation(Truncation::Fixed(60))).unwrap();
        let p = default_priorities(&relax.solution, inst.model());
        let (us, ps, end) = (0, 4, 5);
        assert!(p.at(1)[us] > p.at(1)[end]);
        assert!(p.at(1)[ps] >= p.at(1)[end]);
    }

    #[test]
    fn budget_duals_give_strong_duality() {
        let inst = build_benchmark_4state::<f64>().instantiate(600).unwrap();
        let relax = relax_instance(&inst, &LpConfig::with_truncation(Truncation::Fixed(30))).unwrap();
        let q = penalized_q(inst.model(), &relax.solution.duals);
        let gamma = 0.5f64;
        let z1 = [1.0 / 6.0, 1.0 / 3.0, 0.5, 0.0];
        let dual: f64 = gamma * (0..4).map(|s| z1[s] * q[0][s][0].max(q[0][s][1])).sum::<f64>()
            + (1..=30).map(|t| gamma.powi(t as i32) * relax.solution.duals[t - 1] * 0.5).sum::<f64>();
        assert!((dual - relax.solution.objective).abs() < 1e-10);
    }

    /// Bases of this chain have inverse entries growing like Fibonacci
    /// numbers in `T`.
    #[test]
    fn long_deterministic_chain_stays_accurate() {
        let idle = vec![vec![1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]];
        let pull = vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 1.0]];
        let m: ArmModel<f64> = ArmModel::new(vec!["a".into(), "b".into(), "e".into()], idle, pull, vec![[0.0, 1.0], [0.0, 2.0], [0.0, 0.0]], 0.8)
            .unwrap();
        let lp = build_lp(&m, &[0.5], &[1.0, 0.0, 0.0], 100).unwrap();
        for crash_start in [true, false] {
            for pivot_rule in [PivotRule::DantzigThenBland, PivotRule::Bland] {
                let cfg = LpConfig { crash_start, pivot_rule, ..LpConfig::default() };
                let sol = solve_lp(&lp, &cfg).unwrap();
                assert!(lp.max_violation(&sol.occupation) < 1e-9);
                // the tail beyond T = 100 is below 1e-9
                assert!((sol.objective - 2.0).abs() < 1e-9, "{crash_start} {pivot_rule:?}: {}", sol.objective);
            }
        }
    }

    #[test]
    fn rational_budget_flooring() {
        let tpl = build_benchmark_4state::<f64>();
        let inst = tpl.instantiate(6).unwrap();
        assert_eq!(inst.lp_budget(2), vec![Rational::new(1, 2); 2]);
    }
}
