//! Single-arm models, N-arm instances, and mean-field bookkeeping.
//!
//! Periods are numbered from 1, matching the reward weighting `γ^t`.
//! An arm takes action [`IDLE`] (0) or [`PULL`] (1).

use std::fmt;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::{floor_times, Rational, Real, Scalar};

pub const IDLE: usize = 0;
pub const PULL: usize = 1;

/// One arm: a finite-state MDP with binary actions.
#[derive(Clone, Debug, PartialEq)]
pub struct ArmModel<S = f64> {
    labels: Vec<String>,
    /// `kernel[a][s][s']`.
    kernel: [Vec<Vec<S>>; 2],
    /// `reward[s][a]`.
    reward: Vec<[S; 2]>,
    discount: S,
    reward_bound: S,
}

impl<S: Scalar> ArmModel<S> {
    /// Build and validate a model. Fails with the full violation report.
    pub fn new(
        labels: Vec<String>,
        idle_kernel: Vec<Vec<S>>,
        pull_kernel: Vec<Vec<S>>,
        reward: Vec<[S; 2]>,
        discount: S,
    ) -> Result<Self> {
        let model = Self::new_unchecked(labels, idle_kernel, pull_kernel, reward, discount);
        let report = validate_model(&model);
        if report.is_valid() {
            Ok(model)
        } else {
            Err(Error::InvalidModel(report))
        }
    }

    /// Build without validation; pair with [`validate_model`].
    pub fn new_unchecked(
        labels: Vec<String>,
        idle_kernel: Vec<Vec<S>>,
        pull_kernel: Vec<Vec<S>>,
        reward: Vec<[S; 2]>,
        discount: S,
    ) -> Self {
        let reward_bound = reward
            .iter()
            .flat_map(|r| r.iter())
            .fold(S::zero(), |acc, r| S::max_of(acc, r.abs()));
        Self {
            labels,
            kernel: [idle_kernel, pull_kernel],
            reward,
            discount,
            reward_bound,
        }
    }

    pub fn n_states(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, s: usize) -> &str {
        &self.labels[s]
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn p(&self, s: usize, a: usize, next: usize) -> &S {
        &self.kernel[a][s][next]
    }

    pub fn row(&self, s: usize, a: usize) -> &[S] {
        &self.kernel[a][s]
    }

    pub fn kernel(&self, a: usize) -> &[Vec<S>] {
        &self.kernel[a]
    }

    pub fn reward(&self, s: usize, a: usize) -> &S {
        &self.reward[s][a]
    }

    pub fn rewards(&self) -> &[[S; 2]] {
        &self.reward
    }

    pub fn discount(&self) -> &S {
        &self.discount
    }

    /// `B = max_{s,a} |r(s,a)|`.
    pub fn reward_bound(&self) -> &S {
        &self.reward_bound
    }

    /// Convert every entry to another scalar type.
    pub fn map_scalar<T: Scalar>(&self, f: impl Fn(&S) -> T) -> ArmModel<T> {
        let conv = |k: &Vec<Vec<S>>| k.iter().map(|r| r.iter().map(&f).collect()).collect();
        ArmModel::new_unchecked(
            self.labels.clone(),
            conv(&self.kernel[0]),
            conv(&self.kernel[1]),
            self.reward.iter().map(|r| [f(&r[0]), f(&r[1])]).collect(),
            f(&self.discount),
        )
    }

    /// Relabel states: new state `i` is old state `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n_states();
        assert_eq!(perm.len(), n);
        let mut inv = vec![0; n];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        let conv = |k: &Vec<Vec<S>>| -> Vec<Vec<S>> {
            perm.iter()
                .map(|&old| {
                    let mut row = vec![S::zero(); n];
                    for (old_next, v) in k[old].iter().enumerate() {
                        row[inv[old_next]] = v.clone();
                    }
                    row
                })
                .collect()
        };
        Self::new_unchecked(
            perm.iter().map(|&p| self.labels[p].clone()).collect(),
            conv(&self.kernel[0]),
            conv(&self.kernel[1]),
            perm.iter().map(|&p| self.reward[p].clone()).collect(),
            self.discount.clone(),
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    Shape(String),
    RowSum { action: usize, state: usize, sum: f64 },
    EntryOutOfRange { action: usize, state: usize, next: usize, value: f64 },
    Discount(f64),
    NonFiniteReward { state: usize, action: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Shape(msg) => write!(f, "shape: {msg}"),
            Violation::RowSum { action, state, sum } => {
                write!(f, "kernel{action} state {state}: row sum {sum}")
            }
            Violation::EntryOutOfRange { action, state, next, value } => {
                write!(f, "kernel{action}[{state}][{next}] = {value} not in [0,1]")
            }
            Violation::Discount(g) => write!(f, "discount not in (0,1): {g}"),
            Violation::NonFiniteReward { state, action } => {
                write!(f, "reward[{state}][{action}] is not finite")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Every invariant violation of `model`; empty iff the model is valid.
pub fn validate_model<S: Scalar>(model: &ArmModel<S>) -> ValidationReport {
    let mut violations = Vec::new();
    let n = model.n_states();
    if n == 0 {
        violations.push(Violation::Shape("no states".into()));
    }
    let row_tol = S::tolerance(1e-12);
    for a in [IDLE, PULL] {
        if model.kernel[a].len() != n {
            violations.push(Violation::Shape(format!(
                "kernel{a} has {} rows, expected {n}",
                model.kernel[a].len()
            )));
            continue;
        }
        for (s, row) in model.kernel[a].iter().enumerate() {
            if row.len() != n {
                violations.push(Violation::Shape(format!(
                    "kernel{a} row {s} has {} entries, expected {n}",
                    row.len()
                )));
                continue;
            }
            for (next, v) in row.iter().enumerate() {
                let f = v.to_f64_lossy();
                if v < &S::zero() || v > &S::one() || !f.is_finite() {
                    violations.push(Violation::EntryOutOfRange { action: a, state: s, next, value: f });
                }
            }
            let sum = row.iter().cloned().fold(S::zero(), |a, b| a + b);
            if (sum.clone() - S::one()).abs() > row_tol {
                violations.push(Violation::RowSum { action: a, state: s, sum: sum.to_f64_lossy() });
            }
        }
    }
    if model.reward.len() != n {
        violations.push(Violation::Shape(format!(
            "reward table has {} rows, expected {n}",
            model.reward.len()
        )));
    }
    for (s, r) in model.reward.iter().enumerate() {
        for (a, v) in r.iter().enumerate() {
            if !v.to_f64_lossy().is_finite() {
                violations.push(Violation::NonFiniteReward { state: s, action: a });
            }
        }
    }
    let g = &model.discount;
    if !(g > &S::zero() && g < &S::one()) || !g.to_f64_lossy().is_finite() {
        violations.push(Violation::Discount(g.to_f64_lossy()));
    }
    ValidationReport { violations }
}

/// Integer counts summing exactly to `n`: `fraction·n` where integral,
/// otherwise largest-remainder apportionment with ties going to the earlier
/// state.
pub fn counts_from_fractions(fractions: &[Rational], n: u64) -> Result<Vec<u64>> {
    for (state, f) in fractions.iter().enumerate() {
        if *f < Rational::zero() {
            return Err(Error::NegativeFraction { state, value: *f });
        }
    }
    let total: Rational = fractions.iter().fold(Rational::zero(), |a, b| a + b);
    if total != Rational::one() {
        return Err(Error::FractionSum(total));
    }
    let mut counts: Vec<u64> = fractions.iter().map(|f| floor_times(f, n)).collect();
    let assigned: u64 = counts.iter().sum();
    let remainders: Vec<Rational> = fractions
        .iter()
        .zip(&counts)
        .map(|(f, &c)| *f * Rational::from_integer(n as i64) - Rational::from_integer(c as i64))
        .collect();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    // stable: equal remainders keep state order
    order.sort_by(|&a, &b| remainders[b].cmp(&remainders[a]));
    for &s in order.iter().take((n - assigned) as usize) {
        counts[s] += 1;
    }
    Ok(counts)
}

/// Initial placement of the N arms.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialOccupancy {
    Counts(Vec<u64>),
    Fractions(Vec<Rational>),
}

/// An N-arm problem.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceSpec<S = f64> {
    model: ArmModel<S>,
    arms: u64,
    budget: Vec<Rational>,
    initial: InitialOccupancy,
    initial_counts: Vec<u64>,
}

impl<S: Scalar> InstanceSpec<S> {
    /// `budget` lists α_t for t = 1, 2, ...; the last entry repeats.
    pub fn new(
        model: ArmModel<S>,
        arms: u64,
        budget: Vec<Rational>,
        initial: InitialOccupancy,
    ) -> Result<Self> {
        if arms == 0 {
            return Err(Error::NoArms);
        }
        if budget.is_empty() {
            return Err(Error::BudgetOutOfRange("empty budget list".into()));
        }
        if let Some(bad) = budget.iter().find(|a| **a < Rational::zero() || **a > Rational::one()) {
            return Err(Error::BudgetOutOfRange(bad.to_string()));
        }
        let n = model.n_states();
        let initial_counts = match &initial {
            InitialOccupancy::Counts(c) => {
                let got: u64 = c.iter().sum();
                if got != arms {
                    return Err(Error::CountSum { got, expected: arms });
                }
                c.clone()
            }
            InitialOccupancy::Fractions(f) => counts_from_fractions(f, arms)?,
        };
        if initial_counts.len() != n {
            return Err(Error::Dimension(format!(
                "initial occupancy has {} entries for {n} states",
                initial_counts.len()
            )));
        }
        Ok(Self { model, arms, budget, initial, initial_counts })
    }

    pub fn model(&self) -> &ArmModel<S> {
        &self.model
    }

    pub fn arms(&self) -> u64 {
        self.arms
    }

    pub fn initial(&self) -> &InitialOccupancy {
        &self.initial
    }

    pub fn initial_counts(&self) -> &[u64] {
        &self.initial_counts
    }

    pub fn budget_fractions(&self) -> &[Rational] {
        &self.budget
    }

    pub fn budget_fraction(&self, t: usize) -> &Rational {
        let i = t.saturating_sub(1).min(self.budget.len() - 1);
        &self.budget[i]
    }

    /// Realized per-period budget `⌊α_t N⌋`.
    pub fn budget_at(&self, t: usize) -> u64 {
        floor_times(self.budget_fraction(t), self.arms)
    }

    /// Budget fractions `⌊α_t N⌋ / N` for t = 1..=periods, the relaxation's
    /// budget right-hand sides.
    pub fn lp_budget(&self, periods: usize) -> Vec<Rational> {
        (1..=periods)
            .map(|t| Rational::new(self.budget_at(t) as i64, self.arms as i64))
            .collect()
    }

    /// Empirical initial distribution `Z_1 / N`.
    pub fn initial_distribution(&self) -> Vec<Rational> {
        self.initial_counts
            .iter()
            .map(|&c| Rational::new(c as i64, self.arms as i64))
            .collect()
    }

    /// Same instance with a different arm count (fractions re-apportioned).
    pub fn with_arms(&self, arms: u64) -> Result<Self> {
        let initial = match &self.initial {
            InitialOccupancy::Counts(_) => InitialOccupancy::Fractions(self.initial_distribution()),
            f => f.clone(),
        };
        Self::new(self.model.clone(), arms, self.budget.clone(), initial)
    }

    pub fn map_scalar<T: Scalar>(&self, f: impl Fn(&S) -> T) -> InstanceSpec<T> {
        InstanceSpec {
            model: self.model.map_scalar(f),
            arms: self.arms,
            budget: self.budget.clone(),
            initial: self.initial.clone(),
            initial_counts: self.initial_counts.clone(),
        }
    }
}

/// Realized counts `Z_t(s)` at period `t`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountState {
    pub period: usize,
    pub counts: Vec<u64>,
}

impl CountState {
    pub fn new(period: usize, counts: Vec<u64>) -> Self {
        Self { period, counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Single-arm occupation measure `x_t(s,a)` for t = 1..=T.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupationMeasure<S = f64> {
    periods: usize,
    n_states: usize,
    x: Vec<[S; 2]>,
}

impl<S: Scalar> OccupationMeasure<S> {
    /// `x` is laid out period-major: entry `(t-1)·|S| + s`.
    pub fn new(periods: usize, n_states: usize, x: Vec<[S; 2]>) -> Self {
        assert_eq!(x.len(), periods * n_states);
        Self { periods, n_states, x }
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    /// Period-`t` slice; periods past T reuse period T.
    pub fn slice(&self, t: usize) -> &[[S; 2]] {
        let t = t.clamp(1, self.periods);
        &self.x[(t - 1) * self.n_states..t * self.n_states]
    }

    pub fn x(&self, t: usize, s: usize, a: usize) -> &S {
        &self.slice(t)[s][a]
    }

    /// State marginal `z_t(s) = Σ_a x_t(s,a)`.
    pub fn z(&self, t: usize) -> Vec<S> {
        self.slice(t).iter().map(|xs| xs[0].clone() + xs[1].clone()).collect()
    }

    pub fn map_scalar<T: Scalar>(&self, f: impl Fn(&S) -> T) -> OccupationMeasure<T> {
        OccupationMeasure {
            periods: self.periods,
            n_states: self.n_states,
            x: self.x.iter().map(|xs| [f(&xs[0]), f(&xs[1])]).collect(),
        }
    }
}

/// `z_{t+1}(s') = Σ_{s,a} x_t(s,a) p(s,a,s')`.
pub fn propagate_mean<S: Scalar>(x_t: &[[S; 2]], model: &ArmModel<S>) -> Vec<S> {
    let n = model.n_states();
    let mut next = vec![S::zero(); n];
    for (s, xs) in x_t.iter().enumerate() {
        for a in [IDLE, PULL] {
            if xs[a].is_zero() {
                continue;
            }
            for (sp, p) in model.row(s, a).iter().enumerate() {
                next[sp] = next[sp].clone() + xs[a].clone() * p.clone();
            }
        }
    }
    next
}

/// Diffusion statistics `Z̃ = (Z - N z)/√N` and, when pulls are known,
/// `X̃(s,a) = (X(s,a) - N x(s,a))/√N`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionStats<R = f64> {
    pub ztilde: Vec<R>,
    pub xtilde: Option<Vec<[R; 2]>>,
}

impl<R: Real> DiffusionStats<R> {
    pub fn l1(&self) -> R {
        self.ztilde.iter().fold(R::zero(), |a, z| a + z.abs())
    }

    /// Attach `X̃` given per-state pulls and the period's occupation slice.
    pub fn with_pulls(mut self, counts: &CountState, pulls: &[u64], x_t: &[[R; 2]]) -> Self {
        let n = R::from_u64(counts.total()).expect("arm count");
        let root = n.sqrt();
        let xt = counts
            .counts
            .iter()
            .zip(pulls)
            .zip(x_t)
            .map(|((&z, &p), xs)| {
                let idle = R::from_u64(z - p).expect("count");
                let pull = R::from_u64(p).expect("count");
                [(idle - n * xs[0]) / root, (pull - n * xs[1]) / root]
            })
            .collect();
        self.xtilde = Some(xt);
        self
    }

    /// Counts implied by `Z = N z + √N Z̃` (exact up to rounding).
    pub fn reconstruct_counts(&self, z_t: &[R], n: u64) -> Vec<R> {
        let nf = R::from_u64(n).expect("arm count");
        self.ztilde.iter().zip(z_t).map(|(zt, z)| nf * *z + nf.sqrt() * *zt).collect()
    }
}

pub fn diffusion_from_counts<R: Real>(counts: &CountState, z_t: &[R], n: u64) -> DiffusionStats<R> {
    let nf = R::from_u64(n).expect("arm count");
    let root = nf.sqrt();
    let ztilde = counts
        .counts
        .iter()
        .zip(z_t)
        .map(|(&c, z)| (R::from_u64(c).expect("count") - nf * *z) / root)
        .collect();
    DiffusionStats { ztilde, xtilde: None }
}
