use crate::error::{Error, Result};
use crate::model::{CountState, OccupationMeasure};
use crate::scalar::{floor_times, lit, Rational, Real};

use super::schedule::{ranking, PrioritySchedule};

/// Fluid-balance rule: track `N·x_t(s,1)` per state within a box of
/// half-width `|Z_t(s) − N z_t(s)|`, settling the budget by priority.
#[derive(Clone, Debug)]
pub struct FluidBalancePolicy<R = f64> {
    occupation: OccupationMeasure<R>,
    priorities: PrioritySchedule<R>,
    budget: Vec<Rational>,
}

/// Pulls plus which fallbacks, if any, were needed to meet the budget.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FluidDecision {
    pub pulls: Vec<u64>,
    /// Caps summed below the budget; pulls were added best-first.
    pub undershoot: bool,
    /// Every state reached its lower bound with the budget still exceeded.
    pub stall: bool,
    pub cap: Vec<u64>,
    pub lower: Vec<u64>,
}

impl FluidDecision {
    pub fn extended(&self) -> bool {
        self.undershoot || self.stall
    }
}

impl<R: Real> FluidBalancePolicy<R> {
    pub fn new(occupation: OccupationMeasure<R>, priorities: PrioritySchedule<R>, budget: Vec<Rational>) -> Result<Self> {
        if priorities.n_states() != occupation.n_states() {
            return Err(Error::Dimension(format!(
                "priorities cover {} states, occupation {}",
                priorities.n_states(),
                occupation.n_states()
            )));
        }
        if budget.is_empty() {
            return Err(Error::BudgetOutOfRange("empty budget list".into()));
        }
        Ok(Self { occupation, priorities, budget })
    }

    pub fn occupation(&self) -> &OccupationMeasure<R> {
        &self.occupation
    }

    pub fn priorities(&self) -> &PrioritySchedule<R> {
        &self.priorities
    }

    pub fn periods(&self) -> usize {
        self.occupation.periods()
    }

    pub fn budget_at(&self, t: usize, arms: u64) -> u64 {
        let i = t.saturating_sub(1).min(self.budget.len() - 1);
        floor_times(&self.budget[i], arms)
    }

    /// Decide pulls at period `t` for an explicit budget.
    pub fn decide(&self, counts: &[u64], t: usize, budget: u64) -> Result<FluidDecision> {
        let arms: u64 = counts.iter().sum();
        if budget > arms {
            return Err(Error::BudgetExceedsArms { budget, arms });
        }
        let n = R::from_u64(arms).expect("arm count");
        let slice = self.occupation.slice(t);
        let z = self.occupation.z(t);
        let mut cap = Vec::with_capacity(counts.len());
        let mut lower = Vec::with_capacity(counts.len());
        for (s, &c) in counts.iter().enumerate() {
            let centre = slice[s][1] * n;
            let spread = (R::from_u64(c).expect("count") - n * z[s]).abs();
            cap.push(c.min(to_count(snap(centre + spread).ceil())));
            lower.push(to_count(snap(centre - spread).floor()));
        }
        let mut pulls = cap.clone();
        let mut total: u64 = pulls.iter().sum();
        let order = ranking(self.priorities.at(t));
        let mut stall = false;
        let mut undershoot = false;
        if total > budget {
            for &s in order.iter().rev() {
                let drop = pulls[s].saturating_sub(lower[s]).min(total - budget);
                pulls[s] -= drop;
                total -= drop;
            }
            if total > budget {
                stall = true;
                for &s in order.iter().rev() {
                    let drop = pulls[s].min(total - budget);
                    pulls[s] -= drop;
                    total -= drop;
                }
            }
        } else if total < budget {
            undershoot = true;
            for &s in &order {
                let add = (counts[s] - pulls[s]).min(budget - total);
                pulls[s] += add;
                total += add;
            }
        }
        debug_assert_eq!(total, budget);
        Ok(FluidDecision { pulls, undershoot, stall, cap, lower })
    }
}

/// Values within `1e-9` of an integer are treated as that integer before
/// rounding.
fn snap<R: Real>(v: R) -> R {
    let r = v.round();
    if (v - r).abs() <= lit(1e-9) {
        r
    } else {
        v
    }
}

fn to_count<R: Real>(v: R) -> u64 {
    if v <= R::zero() {
        0
    } else {
        v.to_u64().unwrap_or(u64::MAX)
    }
}

/// Pulls at period `t` under the policy's own budget `⌊α_t N⌋`.
pub fn fluid_balance_action<R: Real>(policy: &FluidBalancePolicy<R>, counts: &CountState, t: usize) -> Result<FluidDecision> {
    let budget = policy.budget_at(t, counts.total());
    policy.decide(&counts.counts, t, budget)
}
