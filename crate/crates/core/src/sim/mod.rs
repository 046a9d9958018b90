//! Monte Carlo simulation of N exchangeable arms.
//!
//! Arms in the same state taking the same action are moved together by one
//! multinomial draw. Every replication owns a ChaCha8 generator derived from
//! `(master_seed, rep_index)`, and every `(t, s, a)` group draws from its
//! own stream of that generator, so results do not depend on scheduling.

pub mod sampling;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::tail_bound;
use crate::model::{ArmModel, InstanceSpec, OccupationMeasure, IDLE, PULL};
use crate::policies::Policy;

pub use sampling::{binomial, multinomial};

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn replication_seed(master_seed: u64, rep_index: u64) -> u64 {
    mix64(master_seed ^ mix64(rep_index))
}

pub fn replication_rng(master_seed: u64, rep_index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(replication_seed(master_seed, rep_index))
}

fn group_rng(base: &ChaCha8Rng, t: usize, s: usize, a: usize, n_states: usize) -> ChaCha8Rng {
    let mut rng = base.clone();
    rng.set_stream((t * 2 * n_states + 2 * s + a) as u64);
    rng.set_word_pos(0);
    rng
}

/// One transition of all arms. `t` selects the random substreams.
pub fn step(counts: &[u64], pulls: &[u64], model: &ArmModel<f64>, t: usize, rng: &ChaCha8Rng) -> Result<Vec<u64>> {
    let n = model.n_states();
    if counts.len() != n || pulls.len() != n {
        return Err(Error::Dimension(format!("expected {n} states")));
    }
    if let Some(s) = (0..n).find(|&s| pulls[s] > counts[s]) {
        return Err(Error::InfeasiblePulls(format!("state {s}: {} pulls for {} arms", pulls[s], counts[s])));
    }
    let mut next = vec![0; n];
    for s in 0..n {
        for (a, size) in [(IDLE, counts[s] - pulls[s]), (PULL, pulls[s])] {
            if size == 0 {
                continue;
            }
            let mut g = group_rng(rng, t, s, a, n);
            for (k, c) in multinomial(size, model.row(s, a), &mut g).into_iter().enumerate() {
                next[k] += c;
            }
        }
    }
    Ok(next)
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    /// Fixed horizon; when `None`, the smallest `T` with tail bound below
    /// `tail_tol`.
    pub horizon: Option<usize>,
    pub replications: usize,
    pub master_seed: u64,
    /// Absolute tolerance on the neglected discounted tail.
    pub tail_tol: f64,
    /// Track `|Z̃_t|₁` against `reference` (the LP occupation).
    pub record_diffusion: bool,
    pub reference: Option<OccupationMeasure<f64>>,
    /// Keep per-period counts and pulls in each trajectory.
    pub record_paths: bool,
    /// Worker threads; `None` uses the global pool. Affects speed only.
    pub threads: Option<usize>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            horizon: None,
            replications: 2000,
            master_seed: DEFAULT_SEED,
            tail_tol: 1e-6,
            record_diffusion: false,
            reference: None,
            record_paths: false,
            threads: None,
        }
    }
}

pub const DEFAULT_SEED: u64 = 12345;

impl SimConfig {
    /// Tail tolerance `1e-9·|upper bound|`.
    pub fn relative_tail(upper_bound: f64) -> f64 {
        (1e-9 * upper_bound.abs()).max(f64::MIN_POSITIVE)
    }

    pub fn resolve_horizon(&self, instance: &InstanceSpec<f64>) -> usize {
        self.horizon.unwrap_or_else(|| {
            let m = instance.model();
            let mut t = 1;
            while tail_bound(instance.arms(), *m.discount(), *m.reward_bound(), t) >= self.tail_tol && t < 100_000 {
                t += 1;
            }
            t
        })
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct TrajectoryStats {
    pub discounted_reward: f64,
    /// `|Z̃_t|₁` for `t = 1..=T_sim`, when recorded.
    pub ztilde_l1: Vec<f64>,
    /// `X_t(s,1)` when paths are recorded.
    pub pulls: Vec<Vec<u64>>,
    /// `Z_t(s)` when paths are recorded.
    pub counts: Vec<Vec<u64>>,
    /// Periods in which the policy used a fallback rule.
    pub fallback_periods: usize,
}

pub fn run_replication(
    instance: &InstanceSpec<f64>,
    policy: &dyn Policy,
    config: &SimConfig,
    rep_index: u64,
) -> Result<TrajectoryStats> {
    let horizon = config.resolve_horizon(instance);
    run_with_horizon(instance, policy, config, rep_index, horizon)
}

fn run_with_horizon(
    instance: &InstanceSpec<f64>,
    policy: &dyn Policy,
    config: &SimConfig,
    rep_index: u64,
    horizon: usize,
) -> Result<TrajectoryStats> {
    let model = instance.model();
    let arms = instance.arms();
    let n = model.n_states();
    let gamma = *model.discount();
    let rng = replication_rng(config.master_seed, rep_index);
    let root = (arms as f64).sqrt();
    let mut counts = instance.initial_counts().to_vec();
    let mut stats = TrajectoryStats::default();
    let mut weight = 1.0;
    for t in 1..=horizon {
        weight *= gamma;
        let budget = instance.budget_at(t);
        let (pulls, fallback) = policy.act(t, &counts, budget)?;
        if pulls.len() != n || pulls.iter().sum::<u64>() != budget {
            return Err(Error::InfeasiblePulls(format!("period {t}: pulls {pulls:?} for budget {budget}")));
        }
        if fallback {
            stats.fallback_periods += 1;
        }
        let reward: f64 = (0..n)
            .map(|s| model.reward(s, PULL) * pulls[s] as f64 + model.reward(s, IDLE) * (counts[s] - pulls[s]) as f64)
            .sum();
        stats.discounted_reward += weight * reward;
        if config.record_diffusion {
            if let Some(reference) = &config.reference {
                let z = reference.z(t);
                let l1 = counts.iter().zip(&z).map(|(&c, zs)| (c as f64 - arms as f64 * zs).abs()).sum::<f64>() / root;
                stats.ztilde_l1.push(l1);
            }
        }
        let next = step(&counts, &pulls, model, t, &rng)?;
        if config.record_paths {
            stats.pulls.push(pulls);
            stats.counts.push(std::mem::take(&mut counts));
        }
        assert_eq!(next.iter().sum::<u64>(), arms, "arm count not conserved");
        counts = next;
    }
    Ok(stats)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicationSummary {
    pub mean: f64,
    pub std_error: f64,
    pub ci95_halfwidth: f64,
    pub replications: usize,
}

impl ReplicationSummary {
    /// Mean, `sd/√R` with the `R−1` variance, and `1.96·se`. A single sample
    /// has zero standard error.
    pub fn from_samples(xs: &[f64]) -> Self {
        let r = xs.len();
        let mean = xs.iter().sum::<f64>() / r as f64;
        let std_error = if r < 2 {
            0.0
        } else {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1) as f64;
            (var / r as f64).sqrt()
        };
        Self { mean, std_error, ci95_halfwidth: 1.96 * std_error, replications: r }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DiffusionSeries {
    pub mean_abs_ztilde: Vec<f64>,
    pub std_error: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SimOutcome {
    pub summary: ReplicationSummary,
    pub horizon: usize,
    /// Tail bound on the neglected reward beyond the horizon.
    pub truncation_error: f64,
    pub diffusion: Option<DiffusionSeries>,
    pub fallback_periods: usize,
    #[serde(skip)]
    pub trajectories: Vec<TrajectoryStats>,
}

/// Run all replications in parallel and reduce them in index order.
pub fn run_many(instance: &InstanceSpec<f64>, policy: &dyn Policy, config: &SimConfig) -> Result<SimOutcome> {
    if config.replications == 0 {
        return Err(Error::Parse("at least one replication is required".into()));
    }
    let horizon = config.resolve_horizon(instance);
    let work = || -> Result<Vec<TrajectoryStats>> {
        (0..config.replications as u64)
            .into_par_iter()
            .map(|r| run_with_horizon(instance, policy, config, r, horizon))
            .collect()
    };
    let trajectories = match config.threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::Parse(e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    let rewards: Vec<f64> = trajectories.iter().map(|t| t.discounted_reward).collect();
    let summary = ReplicationSummary::from_samples(&rewards);
    let diffusion = (config.record_diffusion && config.reference.is_some()).then(|| {
        let (mean, se) = (0..horizon)
            .map(|t| {
                let col: Vec<f64> = trajectories.iter().map(|tr| tr.ztilde_l1[t]).collect();
                let s = ReplicationSummary::from_samples(&col);
                (s.mean, s.std_error)
            })
            .unzip();
        DiffusionSeries { mean_abs_ztilde: mean, std_error: se }
    });
    let m = instance.model();
    Ok(SimOutcome {
        summary,
        horizon,
        truncation_error: tail_bound(instance.arms(), *m.discount(), *m.reward_bound(), horizon),
        diffusion,
        fallback_periods: trajectories.iter().map(|t| t.fallback_periods).sum(),
        trajectories: if config.record_paths { trajectories } else { Vec::new() },
    })
}
