use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ArmModel, IDLE, PULL};
use crate::scalar::{lit, Real};

use super::schedule::priority_greedy_action;

/// Indifference within this margin counts as active.
pub const TIE_EPS: f64 = 1e-9;
pub const DEFAULT_GRID_POINTS: usize = 2001;
const BISECTION_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SingleArmSolution<R = f64> {
    pub values: Vec<R>,
    /// `Q(s,1) − Q(s,0)`
    pub margins: Vec<R>,
    pub active: Vec<bool>,
    /// Sup-norm Bellman residual of `values`.
    pub residual: R,
}

/// Solve `A v = b` by Gaussian elimination with partial pivoting.
pub(crate) fn solve_dense<R: Real>(mut a: Vec<Vec<R>>, mut b: Vec<R>) -> Vec<R> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[i][k].abs().partial_cmp(&a[j][k].abs()).unwrap_or(std::cmp::Ordering::Equal))
            .unwrap_or(k);
        a.swap(k, p);
        b.swap(k, p);
        let piv = a[k][k];
        if piv == R::zero() {
            continue;
        }
        for i in k + 1..n {
            let f = a[i][k] / piv;
            if f == R::zero() {
                continue;
            }
            for j in k..n {
                let v = a[k][j];
                a[i][j] = a[i][j] - f * v;
            }
            let v = b[k];
            b[i] = b[i] - f * v;
        }
    }
    let mut x = vec![R::zero(); n];
    for k in (0..n).rev() {
        let mut acc = b[k];
        for j in k + 1..n {
            acc = acc - a[k][j] * x[j];
        }
        x[k] = if a[k][k] == R::zero() { R::zero() } else { acc / a[k][k] };
    }
    x
}

fn q_values<R: Real>(model: &ArmModel<R>, lambda: R, v: &[R]) -> Vec<[R; 2]> {
    let gamma = *model.discount();
    (0..model.n_states())
        .map(|s| {
            let q = |a: usize| {
                let cont = model.row(s, a).iter().zip(v).fold(R::zero(), |acc, (p, w)| acc + *p * *w);
                let penalty = if a == PULL { lambda } else { R::zero() };
                *model.reward(s, a) - penalty + gamma * cont
            };
            [q(IDLE), q(PULL)]
        })
        .collect()
}

/// Infinite-horizon values of the arm with reward `r(s,a) − λa`, by policy
/// iteration polished with value-iteration sweeps. `tol` bounds the Bellman
/// residual by `tol·(1−γ)`.
pub fn single_arm_solve<R: Real>(model: &ArmModel<R>, lambda: R, tol: R) -> SingleArmSolution<R> {
    let n = model.n_states();
    let gamma = *model.discount();
    let target = R::max_of(tol, R::epsilon() * lit(64.0)) * (R::one() - gamma);
    let mut policy: Vec<usize> = (0..n)
        .map(|s| if *model.reward(s, PULL) - lambda >= *model.reward(s, IDLE) { PULL } else { IDLE })
        .collect();
    let mut v = vec![R::zero(); n];
    for _ in 0..10 * (n + 10) {
        let a: Vec<Vec<R>> = (0..n)
            .map(|s| {
                let row = model.row(s, policy[s]);
                (0..n)
                    .map(|j| if s == j { R::one() } else { R::zero() } - gamma * row[j])
                    .collect()
            })
            .collect();
        let b: Vec<R> =
            (0..n).map(|s| *model.reward(s, policy[s]) - if policy[s] == PULL { lambda } else { R::zero() }).collect();
        v = solve_dense(a, b);
        let q = q_values(model, lambda, &v);
        let scale = v.iter().fold(R::one(), |m, x| m.max(x.abs()));
        let slack = R::epsilon() * lit(256.0) * scale;
        let mut changed = false;
        for s in 0..n {
            let other = 1 - policy[s];
            if q[s][other] > q[s][policy[s]] + slack {
                policy[s] = other;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut q = q_values(model, lambda, &v);
    let mut residual = residual_of(&q, &v);
    let mut sweeps = 0;
    while residual > target && sweeps < 100_000 {
        v = q.iter().map(|[a, b]| a.max(*b)).collect();
        q = q_values(model, lambda, &v);
        residual = residual_of(&q, &v);
        sweeps += 1;
    }
    let eps = tie_eps::<R>();
    let margins: Vec<R> = q.iter().map(|[idle, pull]| *pull - *idle).collect();
    let active = margins.iter().map(|m| *m >= -eps).collect();
    SingleArmSolution { values: v, margins, active, residual }
}

fn residual_of<R: Real>(q: &[[R; 2]], v: &[R]) -> R {
    q.iter().zip(v).fold(R::zero(), |m, ([a, b], w)| m.max((a.max(*b) - *w).abs()))
}

fn tie_eps<R: Real>() -> R {
    R::max_of(lit(TIE_EPS), R::epsilon() * lit(64.0))
}

fn solve_tol<R: Real>() -> R {
    lit(1e-12)
}

pub fn active_set<R: Real>(model: &ArmModel<R>, lambda: R) -> Vec<bool> {
    single_arm_solve(model, lambda, solve_tol()).active
}

/// `λ_lo < λ_hi` with `state` inactive at `λ_lo` and active at `λ_hi`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness<R = f64> {
    pub lambda_lo: R,
    pub lambda_hi: R,
    pub state: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IndexReport<R = f64> {
    pub indexable: bool,
    /// Whittle indices; empty unless indexable.
    pub indices: Vec<R>,
    pub witness: Option<Witness<R>>,
}

/// Half-width `2B/(1−γ) + 1` of a penalty range outside which the active set
/// is constant.
pub fn lambda_bracket<R: Real>(model: &ArmModel<R>) -> R {
    let two = R::one() + R::one();
    two * *model.reward_bound() / (R::one() - *model.discount()) + R::one()
}

pub fn default_grid<R: Real>(model: &ArmModel<R>, points: usize) -> Vec<R> {
    let half = lambda_bracket(model);
    let points = points.max(2);
    let step = (half + half) / R::from_usize(points - 1).expect("grid size");
    (0..points).map(|i| -half + step * R::from_usize(i).expect("grid index")).collect()
}

/// Scan `grid` (increasing) for monotonicity of the active set and, if it
/// shrinks monotonically, locate each state's index by bisection.
pub fn indexability_scan<R: Real>(model: &ArmModel<R>, grid: &[R]) -> IndexReport<R> {
    let n = model.n_states();
    let sets: Vec<Vec<bool>> = grid.iter().map(|&l| active_set(model, l)).collect();
    for i in 1..sets.len() {
        if let Some(s) = (0..n).find(|&s| !sets[i - 1][s] && sets[i][s]) {
            return IndexReport {
                indexable: false,
                indices: Vec::new(),
                witness: Some(Witness { lambda_lo: grid[i - 1], lambda_hi: grid[i], state: s }),
            };
        }
    }
    let two = R::one() + R::one();
    let indices = (0..n)
        .map(|s| {
            let Some(last) = sets.iter().rposition(|a| a[s]) else {
                return grid[0];
            };
            if last + 1 == grid.len() {
                return grid[last];
            }
            let (mut lo, mut hi) = (grid[last], grid[last + 1]);
            let floor = R::max_of(lit(BISECTION_TOL), R::epsilon() * lit(4.0) * hi.abs().max(lo.abs()));
            while hi - lo > floor {
                let mid = (lo + hi) / two;
                if mid <= lo || mid >= hi {
                    break;
                }
                if active_set(model, mid)[s] {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            (lo + hi) / two
        })
        .collect();
    IndexReport { indexable: true, indices, witness: None }
}

pub fn whittle_report<R: Real>(model: &ArmModel<R>, points: usize) -> IndexReport<R> {
    indexability_scan(model, &default_grid(model, points))
}

/// Pull greedily by descending index.
pub fn whittle_action<R: Real>(report: &IndexReport<R>, counts: &[u64], budget: u64) -> Result<Vec<u64>> {
    if !report.indexable {
        return Err(Error::NotIndexable);
    }
    priority_greedy_action(&report.indices, counts, budget)
}
