//! Decision rules for the N-arm problem.

mod fluid;
mod schedule;
mod whittle;

pub use fluid::{fluid_balance_action, FluidBalancePolicy, FluidDecision};
pub use schedule::{priority_greedy_action, ranking, PrioritySchedule};
pub use whittle::{
    active_set, default_grid, indexability_scan, lambda_bracket, single_arm_solve, whittle_action, whittle_report,
    IndexReport, SingleArmSolution, Witness, DEFAULT_GRID_POINTS, TIE_EPS,
};

use crate::error::Result;

/// What the simulator asks of a policy: pulls per state summing to `budget`.
pub trait Policy: Send + Sync {
    fn name(&self) -> &str;

    /// Pulls at period `t`, plus whether a fallback rule was used.
    fn act(&self, t: usize, counts: &[u64], budget: u64) -> Result<(Vec<u64>, bool)>;
}

impl Policy for FluidBalancePolicy<f64> {
    fn name(&self) -> &str {
        "fluid-balance"
    }

    fn act(&self, t: usize, counts: &[u64], budget: u64) -> Result<(Vec<u64>, bool)> {
        let d = self.decide(counts, t, budget)?;
        let extended = d.extended();
        Ok((d.pulls, extended))
    }
}

/// Greedy pulling under a priority schedule; with constant Whittle scores
/// this is the Whittle index policy.
#[derive(Clone, Debug)]
pub struct PriorityPolicy {
    name: String,
    schedule: PrioritySchedule<f64>,
}

impl PriorityPolicy {
    pub fn new(name: impl Into<String>, schedule: PrioritySchedule<f64>) -> Self {
        Self { name: name.into(), schedule }
    }

    pub fn whittle(report: &IndexReport<f64>) -> Result<Self> {
        if !report.indexable {
            return Err(crate::error::Error::NotIndexable);
        }
        Ok(Self::new("whittle", PrioritySchedule::constant(report.indices.clone())))
    }

    pub fn schedule(&self) -> &PrioritySchedule<f64> {
        &self.schedule
    }
}

impl Policy for PriorityPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn act(&self, t: usize, counts: &[u64], budget: u64) -> Result<(Vec<u64>, bool)> {
        Ok((priority_greedy_action(self.schedule.at(t), counts, budget)?, false))
    }
}
