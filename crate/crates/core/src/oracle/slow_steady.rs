use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiments::builders::SlowSteadyParams;
use crate::scalar::{floor_times, Rational};

/// Closed forms for the slow-and-steady instance with `N` arms.
#[derive(Clone, Debug, Serialize)]
pub struct SlowSteadyForms {
    pub arms: u64,
    /// `αγ³N/(1−γ)`.
    pub lp_value: f64,
    /// Expected loss of fluid balance against the relaxation.
    pub fb_gap_mean: f64,
    pub fb_value: f64,
    /// Limit of `gap/√N` divided by `αγ²/(1−γ)` when ε = 1 − γ.
    pub theta: f64,
}

fn ln_factorials(n: u64) -> Vec<f64> {
    let mut out = vec![0.0; n as usize + 1];
    for k in 1..out.len() {
        out[k] = out[k - 1] + (k as f64).ln();
    }
    out
}

/// `E[(c − K)^+]` for `K ~ Bin(n, p)`, summed over the pmf.
pub fn expected_shortfall(c: u64, n: u64, p: f64) -> f64 {
    if p <= 0.0 {
        return c as f64;
    }
    let lf = ln_factorials(n);
    let mut acc = 0.0;
    for k in 0..c.min(n + 1) {
        let pmf = if p >= 1.0 {
            if k == n { 1.0 } else { 0.0 }
        } else {
            (lf[n as usize] - lf[k as usize] - lf[(n - k) as usize] + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln())
                .exp()
        };
        acc += (c - k) as f64 * pmf;
    }
    acc
}

fn integral(what: &str, r: Rational, arms: u64) -> Result<u64> {
    let v = r * Rational::from_integer(arms as i64);
    if !v.is_integer() {
        return Err(Error::Integrality(format!("{what}·N = {v} is not an integer at N = {arms}")));
    }
    Ok(floor_times(&r, arms))
}

pub fn slow_steady_forms(params: &SlowSteadyParams, arms: u64) -> Result<SlowSteadyForms> {
    params.check_window()?;
    let [phi1, phi2, phi3] = params.phi();
    let uncommitted = integral("phi_1", phi1, arms)?;
    integral("phi_2", phi2, arms)?;
    let pre = integral("phi_3", phi3, arms)?;
    let budget = integral("gamma", params.gamma, arms)?;
    let f = |r: Rational| *r.numer() as f64 / *r.denom() as f64;
    let (g, a, e) = (f(params.gamma), f(params.alpha_reward), f(params.epsilon));

    let lp_value = a * g.powi(3) * arms as f64 / (1.0 - g);
    // Steady count at t = 2 is K + pre; every arm short of the budget costs αγ²/(1−γ)
    let shortfall = expected_shortfall(budget.saturating_sub(pre), uncommitted, 1.0 - e);
    let fb_gap_mean = a * g * g / (1.0 - g) * shortfall;
    let theta = ((1.0 - g) * (2.0 * g - 1.0) / (2.0 * std::f64::consts::PI)).max(0.0).sqrt();
    Ok(SlowSteadyForms { arms, lp_value, fb_gap_mean, fb_value: lp_value - fb_gap_mean, theta })
}
