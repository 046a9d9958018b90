//! Builders for the two reference problems: the non-indexable
//! slow-and-steady arm and the four-state benchmark.

use num_integer::Integer;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::model::{ArmModel, InitialOccupancy, InstanceSpec};
use crate::scalar::{Rational, Scalar};

pub const SLOW_STEADY_STATES: [&str; 6] = [
    "Uncommitted-Steady",
    "Uncommitted-Brief",
    "Steady",
    "Brief",
    "Pre-Steady",
    "End",
];

/// A model plus budget and initial fractions, awaiting an arm count.
#[derive(Clone, Debug)]
pub struct InstanceTemplate<S = f64> {
    model: ArmModel<S>,
    budget: Vec<Rational>,
    initial_fractions: Vec<Rational>,
    stride: u64,
    warnings: Vec<String>,
}

impl<S: Scalar> InstanceTemplate<S> {
    pub fn new(model: ArmModel<S>, budget: Vec<Rational>, initial_fractions: Vec<Rational>) -> Self {
        let stride = budget
            .iter()
            .chain(&initial_fractions)
            .fold(1i64, |acc, r| acc.lcm(r.denom())) as u64;
        Self { model, budget, initial_fractions, stride, warnings: Vec::new() }
    }

    pub fn model(&self) -> &ArmModel<S> {
        &self.model
    }

    pub fn budget(&self) -> &[Rational] {
        &self.budget
    }

    pub fn initial_fractions(&self) -> &[Rational] {
        &self.initial_fractions
    }

    /// Smallest N step for which every budget and initial fraction times N
    /// is an integer.
    pub fn admissible_stride(&self) -> u64 {
        self.stride
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn check_integral(&self, arms: u64) -> Result<()> {
        if !arms.is_multiple_of(self.stride) {
            return Err(Error::Integrality(format!(
                "N = {arms} is not a multiple of the admissible stride {}",
                self.stride
            )));
        }
        Ok(())
    }

    pub fn instantiate(&self, arms: u64) -> Result<InstanceSpec<S>> {
        InstanceSpec::new(
            self.model.clone(),
            arms,
            self.budget.clone(),
            InitialOccupancy::Fractions(self.initial_fractions.clone()),
        )
    }
}

/// Parameters of the slow-and-steady arm. `alpha_reward` is the per-pull
/// reward in the Steady state, `beta` the one-off reward in Brief.
#[derive(Clone, Debug, PartialEq)]
pub struct SlowSteadyParams {
    pub gamma: Rational,
    pub alpha_reward: Rational,
    pub beta: Rational,
    pub epsilon: Rational,
}

impl SlowSteadyParams {
    /// γ = 0.9, α = 1, β = 5, ε = 0.1.
    pub fn pinned() -> Self {
        Self::with_gamma(Rational::new(9, 10), Rational::one(), Rational::from_integer(5))
    }

    /// Couples ε = 1 - γ.
    pub fn with_gamma(gamma: Rational, alpha_reward: Rational, beta: Rational) -> Self {
        Self { epsilon: Rational::one() - gamma, gamma, alpha_reward, beta }
    }

    /// Initial fractions on (Uncommitted-Steady, End, Pre-Steady).
    pub fn phi(&self) -> [Rational; 3] {
        let g = self.gamma;
        let two = Rational::from_integer(2);
        [two - g.recip(), g + g.recip() - two, Rational::one() - g]
    }

    pub fn check_window(&self) -> Result<()> {
        let (g, a, b, e) = (self.gamma, self.alpha_reward, self.beta, self.epsilon);
        if !(g > Rational::zero() && g < Rational::one()) {
            return Err(Error::WindowViolated(format!("gamma = {g} not in (0,1)")));
        }
        let lower = (Rational::one() + (g * g).recip()) * a;
        let upper = g * a / (Rational::one() - g);
        if !(Rational::zero() < lower && lower < b && b < upper) {
            return Err(Error::WindowViolated(format!(
                "need 0 < (1 + 1/γ²)α = {lower} < β = {b} < γα/(1-γ) = {upper}"
            )));
        }
        if !(e > Rational::zero() && e < Rational::new(1, 8)) {
            return Err(Error::WindowViolated(format!("epsilon = {e} not in (0, 1/8)")));
        }
        if let Some(bad) = self.phi().iter().find(|p| **p < Rational::zero()) {
            return Err(Error::WindowViolated(format!("negative initial fraction {bad}")));
        }
        Ok(())
    }
}

pub fn build_slow_and_steady<S: Scalar>(params: &SlowSteadyParams) -> Result<InstanceTemplate<S>> {
    params.check_window()?;
    let n = SLOW_STEADY_STATES.len();
    let [us, ub, steady, brief, pre, end] = [0, 1, 2, 3, 4, 5];
    let eps = params.epsilon;
    let mut idle = vec![vec![Rational::zero(); n]; n];
    let mut pull = vec![vec![Rational::zero(); n]; n];
    idle[us][ub] = Rational::one();
    idle[ub][us] = Rational::one();
    idle[steady][steady] = Rational::one();
    idle[brief][brief] = Rational::one();
    idle[pre][steady] = Rational::one();
    idle[end][end] = Rational::one();
    pull[us][steady] = Rational::one() - eps;
    pull[us][end] = eps;
    pull[ub][brief] = Rational::one() - eps;
    pull[ub][end] = eps;
    pull[steady][steady] = Rational::one();
    pull[brief][end] = Rational::one();
    pull[pre][steady] = Rational::one();
    pull[end][end] = Rational::one();
    let mut reward = vec![[Rational::zero(); 2]; n];
    reward[steady][1] = params.alpha_reward;
    reward[brief][1] = params.beta;

    let conv = |k: Vec<Vec<Rational>>| -> Vec<Vec<S>> {
        k.iter().map(|r| r.iter().map(S::from_ratio).collect()).collect()
    };
    let model = ArmModel::new(
        SLOW_STEADY_STATES.iter().map(|s| s.to_string()).collect(),
        conv(idle),
        conv(pull),
        reward.iter().map(|r| [S::from_ratio(&r[0]), S::from_ratio(&r[1])]).collect(),
        S::from_ratio(&params.gamma),
    )?;
    let [phi1, phi2, phi3] = params.phi();
    let mut initial = vec![Rational::zero(); n];
    initial[us] = phi1;
    initial[end] = phi2;
    initial[pre] = phi3;
    let mut template = InstanceTemplate::new(model, vec![params.gamma], initial);
    if params.gamma != Rational::one() - params.epsilon {
        template
            .warnings
            .push(format!("gamma = {} overrides gamma = 1 - epsilon = {}", params.gamma, Rational::one() - eps));
    }
    Ok(template)
}

pub const BENCHMARK_IDLE: [[Rational; 4]; 4] = benchmark_matrix([[1, 0, 0, 1], [1, 1, 0, 0], [0, 1, 1, 0], [0, 0, 1, 1]]);
pub const BENCHMARK_PULL: [[Rational; 4]; 4] = benchmark_matrix([[1, 1, 0, 0], [0, 1, 1, 0], [0, 0, 1, 1], [1, 0, 0, 1]]);

const fn benchmark_matrix(halves: [[i64; 4]; 4]) -> [[Rational; 4]; 4] {
    let mut out = [[Rational::new_raw(0, 1); 4]; 4];
    let mut i = 0;
    while i < 4 {
        let mut j = 0;
        while j < 4 {
            out[i][j] = if halves[i][j] == 1 { Rational::new_raw(1, 2) } else { Rational::new_raw(0, 1) };
            j += 1;
        }
        i += 1;
    }
    out
}

/// Four-state benchmark: γ = 1/2, half the arms pulled each period,
/// initial fractions (1/6, 1/3, 1/2, 0), state rewards (-1, 0, 0, 1).
pub fn build_benchmark_4state<S: Scalar>() -> InstanceTemplate<S> {
    build_benchmark_with_budget(Rational::new(1, 2))
}

/// Benchmark dynamics under a different budget fraction (e.g. 1/10).
pub fn build_benchmark_with_budget<S: Scalar>(alpha: Rational) -> InstanceTemplate<S> {
    let conv = |k: &[[Rational; 4]; 4]| -> Vec<Vec<S>> {
        k.iter().map(|r| r.iter().map(S::from_ratio).collect()).collect()
    };
    let reward = [-1i64, 0, 0, 1]
        .iter()
        .map(|&r| {
            let v = S::from_ratio(&Rational::from_integer(r));
            [v.clone(), v]
        })
        .collect();
    let model = ArmModel::new(
        (0..4).map(|s| s.to_string()).collect(),
        conv(&BENCHMARK_IDLE),
        conv(&BENCHMARK_PULL),
        reward,
        S::from_ratio(&Rational::new(1, 2)),
    )
    .expect("benchmark model is valid");
    InstanceTemplate::new(
        model,
        vec![alpha],
        vec![Rational::new(1, 6), Rational::new(1, 3), Rational::new(1, 2), Rational::zero()],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{IDLE, PULL};

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn slow_steady_fractions_at_point_nine() {
        let p = SlowSteadyParams::pinned();
        assert_eq!(p.phi(), [r(8, 9), r(1, 90), r(1, 10)]);
        let t = build_slow_and_steady::<f64>(&p).unwrap();
        let total: Rational = t.initial_fractions().iter().sum();
        assert_eq!(total, Rational::one());
        assert_eq!(t.admissible_stride(), 90);
        assert!(t.warnings().is_empty());
    }

    #[test]
    fn slow_steady_transitions() {
        let t = build_slow_and_steady::<f64>(&SlowSteadyParams::pinned()).unwrap();
        let m = t.model();
        let idx = |l: &str| m.state_index(l).unwrap();
        let (us, ub, st, end) = (idx("Uncommitted-Steady"), idx("Uncommitted-Brief"), idx("Steady"), idx("End"));
        assert!((m.p(us, PULL, st) - 0.9).abs() < 1e-15);
        assert!((m.p(us, PULL, end) - 0.1).abs() < 1e-15);
        assert_eq!(*m.p(us, IDLE, ub), 1.0);
        assert_eq!(*m.p(ub, IDLE, us), 1.0);
        assert_eq!(*m.reward(st, PULL), 1.0);
        assert_eq!(*m.reward(idx("Brief"), PULL), 5.0);
        assert_eq!(*m.reward(st, IDLE), 0.0);
    }

    #[test]
    fn window_is_enforced() {
        let mut p = SlowSteadyParams::pinned();
        p.beta = Rational::from_integer(20);
        assert!(matches!(build_slow_and_steady::<f64>(&p), Err(Error::WindowViolated(_))));
        let mut p = SlowSteadyParams::pinned();
        p.beta = Rational::from_integer(2);
        assert!(build_slow_and_steady::<f64>(&p).is_err());
        let p = SlowSteadyParams::with_gamma(r(4, 5), Rational::one(), Rational::from_integer(3));
        assert!(build_slow_and_steady::<f64>(&p).is_err(), "epsilon = 1/5 is outside the window");
    }

    #[test]
    fn gamma_override_warns() {
        let mut p = SlowSteadyParams::pinned();
        p.epsilon = r(1, 11);
        let t = build_slow_and_steady::<f64>(&p).unwrap();
        assert_eq!(t.warnings().len(), 1);
    }

    #[test]
    fn benchmark_literals() {
        let t = build_benchmark_4state::<f64>();
        let m = t.model();
        assert_eq!(m.row(3, PULL), &[0.5, 0.0, 0.0, 0.5]);
        assert_eq!(m.row(0, IDLE), &[0.5, 0.0, 0.0, 0.5]);
        assert_eq!(m.row(2, IDLE), &[0.0, 0.5, 0.5, 0.0]);
        assert_eq!(m.row(1, PULL), &[0.0, 0.5, 0.5, 0.0]);
        let rewards: Vec<[f64; 2]> = m.rewards().to_vec();
        assert_eq!(rewards, vec![[-1.0, -1.0], [0.0, 0.0], [0.0, 0.0], [1.0, 1.0]]);
        assert_eq!(*m.discount(), 0.5);
        let inst = t.instantiate(600).unwrap();
        assert_eq!(inst.initial_counts(), &[100, 200, 300, 0]);
        assert_eq!(inst.budget_at(1), 300);
        assert_eq!(t.admissible_stride(), 6);
        assert!(t.check_integral(601).is_err());
    }
}
