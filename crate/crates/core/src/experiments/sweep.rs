use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiments::builders::InstanceTemplate;
use crate::lp::{default_priorities, relax_instance, upper_bound, LpConfig, Relaxation, Truncation};
use crate::model::InstanceSpec;
use crate::policies::{whittle_report, FluidBalancePolicy, Policy, PriorityPolicy, PrioritySchedule, DEFAULT_GRID_POINTS};
use crate::sim::{run_many, SimConfig, SimOutcome, DEFAULT_SEED};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum PolicyKind {
    #[serde(rename = "fluid-balance")]
    FluidBalance,
    #[serde(rename = "whittle")]
    Whittle,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::FluidBalance => "fluid-balance",
            PolicyKind::Whittle => "whittle",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fluid" | "fluid-balance" => Ok(PolicyKind::FluidBalance),
            "whittle" => Ok(PolicyKind::Whittle),
            other => Err(Error::Parse(format!("unknown policy {other:?} (expected fluid or whittle)"))),
        }
    }
}

/// Priority scores handed to fluid balance.
#[derive(Clone, Debug, Default)]
pub enum PriorityChoice {
    /// `Q_t(s,1) − Q_t(s,0)` under the LP budget prices.
    #[default]
    LpDual,
    /// Constant Whittle indices; needs an indexable model.
    WhittleOrder,
    Schedule(PrioritySchedule<f64>),
}

impl PriorityChoice {
    /// `whittle-order`, `lp-dual`, or `file:PATH`.
    pub fn parse(text: &str, n_states: usize) -> Result<Self> {
        match text {
            "lp-dual" => Ok(PriorityChoice::LpDual),
            "whittle-order" => Ok(PriorityChoice::WhittleOrder),
            _ => match text.strip_prefix("file:") {
                Some(path) => Ok(PriorityChoice::Schedule(PrioritySchedule::from_file(path.as_ref(), n_states)?)),
                None => Err(Error::Parse(format!("unknown priority {text:?}"))),
            },
        }
    }
}

fn whittle_policy(instance: &InstanceSpec<f64>) -> Result<PriorityPolicy> {
    PriorityPolicy::whittle(&whittle_report(instance.model(), DEFAULT_GRID_POINTS))
}

pub fn make_policy(
    kind: PolicyKind,
    instance: &InstanceSpec<f64>,
    relaxation: &Relaxation<f64>,
    priority: &PriorityChoice,
) -> Result<Box<dyn Policy>> {
    match kind {
        PolicyKind::Whittle => Ok(Box::new(whittle_policy(instance)?)),
        PolicyKind::FluidBalance => {
            let scores = match priority {
                PriorityChoice::LpDual => default_priorities(&relaxation.solution, instance.model()),
                PriorityChoice::WhittleOrder => whittle_policy(instance)?.schedule().clone(),
                PriorityChoice::Schedule(s) => s.clone(),
            };
            Ok(Box::new(FluidBalancePolicy::new(
                relaxation.solution.occupation.clone(),
                scores,
                instance.budget_fractions().to_vec(),
            )?))
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub template: InstanceTemplate<f64>,
    pub arms: Vec<u64>,
    pub policies: Vec<PolicyKind>,
    pub replications: usize,
    pub seed: u64,
    /// Absolute tail tolerance; fixes both the LP truncation and the
    /// simulated horizon.
    pub tail_tol: f64,
    pub priority: PriorityChoice,
    pub threads: Option<usize>,
}

impl SweepSpec {
    pub fn new(template: InstanceTemplate<f64>, arms: Vec<u64>, policies: Vec<PolicyKind>) -> Self {
        Self {
            template,
            arms,
            policies,
            replications: 2000,
            seed: DEFAULT_SEED,
            tail_tol: 1e-6,
            priority: PriorityChoice::LpDual,
            threads: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.arms.is_empty() || self.policies.is_empty() {
            return Err(Error::Parse("a sweep needs at least one N and one policy".into()));
        }
        if self.arms.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Parse(format!("N list {:?} is not strictly increasing", self.arms)));
        }
        if self.replications == 0 {
            return Err(Error::Parse("at least one replication is required".into()));
        }
        if self.tail_tol.is_nan() || self.tail_tol <= 0.0 {
            return Err(Error::Parse("tail tolerance must be positive".into()));
        }
        self.arms.iter().try_for_each(|&n| self.template.check_integral(n))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    #[serde(rename = "N")]
    pub arms: u64,
    pub policy: String,
    pub per_arm_value: f64,
    pub total_value: f64,
    pub stderr: f64,
    pub ci95: f64,
    pub lp_upper_bound: f64,
    pub gap: f64,
    pub gap_over_sqrt_n: f64,
    pub gap_over_n: f64,
    pub reps: usize,
    pub seed: u64,
    #[serde(rename = "T")]
    pub lp_periods: usize,
    #[serde(rename = "T_sim")]
    pub sim_horizon: usize,
    pub fallback_periods: usize,
}

/// The columns printed by a single simulation run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulationRow {
    #[serde(rename = "N")]
    pub arms: u64,
    pub policy: String,
    pub mean: f64,
    pub stderr: f64,
    pub ci95: f64,
    pub lp_upper_bound: f64,
    pub gap: f64,
    pub reps: usize,
    pub seed: u64,
    #[serde(rename = "T")]
    pub lp_periods: usize,
    #[serde(rename = "T_sim")]
    pub sim_horizon: usize,
}

impl From<&SweepRow> for SimulationRow {
    fn from(r: &SweepRow) -> Self {
        Self {
            arms: r.arms,
            policy: r.policy.clone(),
            mean: r.total_value,
            stderr: r.stderr,
            ci95: r.ci95,
            lp_upper_bound: r.lp_upper_bound,
            gap: r.gap,
            reps: r.reps,
            seed: r.seed,
            lp_periods: r.lp_periods,
            sim_horizon: r.sim_horizon,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlopeRow {
    pub policy: String,
    /// Least-squares slope of `ln gap` on `ln N`; `None` when a gap is not
    /// positive or fewer than two points exist.
    pub slope: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub slopes: Vec<SlopeRow>,
}

impl SweepResult {
    pub fn row(&self, arms: u64, policy: PolicyKind) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.arms == arms && r.policy == policy.name())
    }

    pub fn slope(&self, policy: PolicyKind) -> Option<f64> {
        self.slopes.iter().find(|s| s.policy == policy.name()).and_then(|s| s.slope)
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 || points.iter().any(|&(x, y)| x <= 0.0 || y <= 0.0) {
        return None;
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = logs.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Instance and relaxation for one grid point.
pub fn prepare(template: &InstanceTemplate<f64>, arms: u64, tail_tol: f64) -> Result<(InstanceSpec<f64>, Relaxation<f64>)> {
    let instance = template.instantiate(arms).map_err(|e| e.in_stage("build"))?;
    let relax = relax_instance(&instance, &LpConfig::with_truncation(Truncation::TailTol(tail_tol)))
        .map_err(|e| e.in_stage("lp"))?;
    Ok((instance, relax))
}

/// Simulate one policy on a prepared instance; the horizon defaults to the
/// LP truncation.
pub fn simulate_cell(
    instance: &InstanceSpec<f64>,
    relax: &Relaxation<f64>,
    kind: PolicyKind,
    priority: &PriorityChoice,
    config: &SimConfig,
) -> Result<(SweepRow, SimOutcome)> {
    let policy = make_policy(kind, instance, relax, priority).map_err(|e| e.in_stage("policies"))?;
    let config = SimConfig { horizon: config.horizon.or(Some(relax.periods)), ..config.clone() };
    let out = run_many(instance, policy.as_ref(), &config).map_err(|e| e.in_stage("simulate"))?;
    let n = instance.arms();
    let ub = upper_bound(&relax.solution, n);
    let gap = ub - out.summary.mean;
    let row = SweepRow {
        arms: n,
        policy: kind.name().to_string(),
        per_arm_value: out.summary.mean / n as f64,
        total_value: out.summary.mean,
        stderr: out.summary.std_error,
        ci95: out.summary.ci95_halfwidth,
        lp_upper_bound: ub,
        gap,
        gap_over_sqrt_n: gap / (n as f64).sqrt(),
        gap_over_n: gap / n as f64,
        reps: config.replications,
        seed: config.master_seed,
        lp_periods: relax.periods,
        sim_horizon: out.horizon,
        fallback_periods: out.fallback_periods,
    };
    Ok((row, out))
}

fn run_cells(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    let prepared: Vec<(InstanceSpec<f64>, Relaxation<f64>)> =
        spec.arms.par_iter().map(|&n| prepare(&spec.template, n, spec.tail_tol)).collect::<Result<_>>()?;
    let cells: Vec<(usize, PolicyKind)> =
        (0..prepared.len()).flat_map(|i| spec.policies.iter().map(move |&p| (i, p))).collect();
    let config = SimConfig { replications: spec.replications, master_seed: spec.seed, ..SimConfig::default() };
    cells
        .par_iter()
        .map(|&(i, kind)| {
            let (instance, relax) = &prepared[i];
            simulate_cell(instance, relax, kind, &spec.priority, &config).map(|(row, _)| row)
        })
        .collect()
}

/// Rows are ordered by N, then by the policy list.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let rows = match spec.threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::Parse(e.to_string()))?
            .install(|| run_cells(spec))?,
        None => run_cells(spec)?,
    };
    let slopes = spec
        .policies
        .iter()
        .map(|&p| {
            let pts: Vec<(f64, f64)> =
                rows.iter().filter(|r| r.policy == p.name()).map(|r| (r.arms as f64, r.gap)).collect();
            SlopeRow { policy: p.name().to_string(), slope: log_log_slope(&pts) }
        })
        .collect();
    Ok(SweepResult { rows, slopes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::builders::build_benchmark_4state;
    use crate::model::ArmModel;
    use crate::scalar::Rational;

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [10.0f64, 100.0, 1000.0].iter().map(|&x| (x, 3.0 * x.powf(0.5))).collect();
        assert!((log_log_slope(&pts).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(log_log_slope(&[(1.0, 1.0)]), None);
        assert_eq!(log_log_slope(&[(1.0, 1.0), (2.0, 0.0)]), None);
    }

    #[test]
    fn single_state_has_no_gap() {
        let model = ArmModel::new(vec!["s".into()], vec![vec![1.0]], vec![vec![1.0]], vec![[0.0, 1.0]], 0.5).unwrap();
        let template = InstanceTemplate::new(model, vec![Rational::new(1, 2)], vec![Rational::from_integer(1)]);
        let mut spec = SweepSpec::new(template, vec![2, 4, 8], vec![PolicyKind::FluidBalance, PolicyKind::Whittle]);
        spec.replications = 5;
        let res = run_sweep(&spec).unwrap();
        assert_eq!(res.rows.len(), 6);
        for r in &res.rows {
            assert!(r.gap.abs() < 1e-9 * r.lp_upper_bound, "{r:?}");
            assert_eq!(r.stderr, 0.0);
        }
        assert_eq!(res.slope(PolicyKind::FluidBalance), None);
    }

    #[test]
    fn validation() {
        let t = build_benchmark_4state::<f64>();
        assert!(SweepSpec::new(t.clone(), vec![60, 30], vec![PolicyKind::Whittle]).validate().is_err());
        assert!(matches!(
            SweepSpec::new(t.clone(), vec![60, 61], vec![PolicyKind::Whittle]).validate(),
            Err(Error::Integrality(_))
        ));
        assert!(SweepSpec::new(t, vec![6, 12], vec![PolicyKind::Whittle]).validate().is_ok());
        assert_eq!("fluid".parse::<PolicyKind>().unwrap(), PolicyKind::FluidBalance);
        assert!("greedy".parse::<PolicyKind>().is_err());
    }

    #[test]
    fn rows_do_not_depend_on_threads() {
        let t = build_benchmark_4state::<f64>();
        let mut spec = SweepSpec::new(t, vec![6, 12, 24], vec![PolicyKind::FluidBalance, PolicyKind::Whittle]);
        spec.replications = 50;
        spec.threads = Some(1);
        let a = run_sweep(&spec).unwrap();
        spec.threads = Some(3);
        let b = run_sweep(&spec).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.slopes, b.slopes);
    }
}
