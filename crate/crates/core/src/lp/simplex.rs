//! Dense revised simplex for `max cᵀx  s.t.  Ax = b, x ≥ 0`.
//!
//! The basis inverse is kept explicitly and updated by elementary row
//! operations after every pivot. A two-phase method with artificial columns
//! is used unless the caller supplies a primal feasible starting basis.
//! Entering columns are chosen by largest reduced cost, falling back to
//! Bland's lowest-index rule after a run of degenerate pivots, or by Bland's
//! rule throughout. Reduced costs may be divided by a per-column pricing
//! scale. The ratio test accepts any row whose basic value stays within the
//! pivot tolerance of zero and prefers the largest pivot among them. The final
//! basis is refactored and checked; a failed check retries from phase one,
//! then with Bland's rule. Every choice is deterministic.


use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Equality-form LP with sparse columns.
#[derive(Clone, Debug)]
pub struct LinearProgram<S> {
    pub n_rows: usize,
    pub columns: Vec<Vec<(usize, S)>>,
    pub objective: Vec<S>,
    pub rhs: Vec<S>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PivotRule {
    /// Lowest-index improving column, lowest-index leaving row on ties.
    Bland,
    /// Largest reduced cost; switches to Bland after `DEGENERATE_STREAK`
    /// consecutive degenerate pivots until the objective moves again.
    DantzigThenBland,
}

const DEGENERATE_STREAK: usize = 50;
const BLAND_PIVOT_SHARE: f64 = 1e-3;

#[derive(Clone, Debug)]
pub struct SimplexOptions {
    pub pivot_tol: f64,
    pub objective_tol: f64,
    pub rule: PivotRule,
    /// Defaults to `50·(rows + cols)`.
    pub max_iterations: Option<usize>,
    /// Recompute the inverse from scratch every this many pivots (floating
    /// point only).
    pub refactor_every: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            pivot_tol: 1e-9,
            objective_tol: 1e-9,
            rule: PivotRule::DantzigThenBland,
            max_iterations: None,
            refactor_every: 200,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SimplexResult<S> {
    pub x: Vec<S>,
    pub objective: S,
    /// Row prices `y = c_Bᵀ B⁻¹` of the original rows.
    pub duals: Vec<S>,
    pub basis: Vec<usize>,
    pub iterations: usize,
    /// Some nonbasic column has zero reduced cost at the optimum.
    pub alternative_optima: bool,
    pub used_phase_one: bool,
}

struct Solver<'a, S> {
    lp: &'a LinearProgram<S>,
    m: usize,
    n: usize,
    sign: Vec<bool>,
    rhs: Vec<S>,
    basis: Vec<usize>,
    position: Vec<Option<usize>>,
    binv: Vec<S>,
    xb: Vec<S>,
    tol: S,
    opts: &'a SimplexOptions,
    iterations: usize,
    cap: usize,
    since_refactor: usize,
    /// Pricing divisor per column, artificials included.
    scale: Vec<S>,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl<'a, S: Scalar> Solver<'a, S> {
    fn new(lp: &'a LinearProgram<S>, opts: &'a SimplexOptions, price_scale: Option<&[S]>) -> Self {
        let m = lp.n_rows;
        let n = lp.columns.len();
        let sign: Vec<bool> = lp.rhs.iter().map(|b| b < &S::zero()).collect();
        let rhs = lp
            .rhs
            .iter()
            .zip(&sign)
            .map(|(b, &neg)| if neg { -b.clone() } else { b.clone() })
            .collect();
        let cap = opts.max_iterations.unwrap_or(50 * (m + n));
        let mut scale = vec![S::one(); n + m];
        if let Some(ps) = price_scale {
            scale[..n].clone_from_slice(ps);
        }
        Self {
            lp,
            m,
            n,
            sign,
            rhs,
            basis: Vec::new(),
            position: vec![None; n + m],
            binv: Vec::new(),
            xb: Vec::new(),
            tol: S::tolerance(opts.pivot_tol),
            opts,
            iterations: 0,
            cap,
            since_refactor: 0,
            scale,
        }
    }

    /// Sparse column `j` of the sign-adjusted matrix `[A | I]`.
    fn column(&self, j: usize) -> Vec<(usize, S)> {
        if j < self.n {
            self.lp.columns[j]
                .iter()
                .map(|(r, v)| (*r, if self.sign[*r] { -v.clone() } else { v.clone() }))
                .collect()
        } else {
            vec![(j - self.n, S::one())]
        }
    }

    fn set_basis(&mut self, basis: Vec<usize>) {
        self.position = vec![None; self.n + self.m];
        for (k, &j) in basis.iter().enumerate() {
            self.position[j] = Some(k);
        }
        self.basis = basis;
    }

    /// Gauss-Jordan inversion of the current basis. `false` if singular.
    fn refactor(&mut self) -> bool {
        let m = self.m;
        let mut left = vec![S::zero(); m * m];
        for (k, &j) in self.basis.iter().enumerate() {
            for (r, v) in self.column(j) {
                left[r * m + k] = v;
            }
        }
        let mut right = vec![S::zero(); m * m];
        for i in 0..m {
            right[i * m + i] = S::one();
        }
        let mut used = vec![false; m];
        let mut pivot_row = vec![0usize; m];
        let small = S::tolerance(1e-13);
        for k in 0..m {
            let mut best = S::zero();
            for r in 0..m {
                if !used[r] {
                    let a = left[r * m + k].abs();
                    if a > best {
                        best = a;
                    }
                }
            }
            if best <= small || best.is_zero() {
                return false;
            }
            // lowest row within a factor two of the largest keeps fill low
            let threshold = if S::EXACT { S::zero() } else { best.clone() / (S::one() + S::one()) };
            let r = (0..m)
                .find(|&r| {
                    !used[r] && {
                        let a = left[r * m + k].abs();
                        !a.is_zero() && a >= threshold
                    }
                })
                .expect("pivot exists");
            used[r] = true;
            pivot_row[k] = r;
            let inv = S::one() / left[r * m + k].clone();
            let lnz: Vec<usize> = (0..m).filter(|&c| !left[r * m + c].is_zero()).collect();
            let rnz: Vec<usize> = (0..m).filter(|&c| !right[r * m + c].is_zero()).collect();
            for &c in &lnz {
                left[r * m + c] = left[r * m + c].clone() * inv.clone();
            }
            for &c in &rnz {
                right[r * m + c] = right[r * m + c].clone() * inv.clone();
            }
            for i in 0..m {
                if i == r {
                    continue;
                }
                let f = left[i * m + k].clone();
                if f.is_zero() {
                    continue;
                }
                for &c in &lnz {
                    left[i * m + c] = left[i * m + c].clone() - f.clone() * left[r * m + c].clone();
                }
                for &c in &rnz {
                    right[i * m + c] = right[i * m + c].clone() - f.clone() * right[r * m + c].clone();
                }
                left[i * m + k] = S::zero();
            }
        }
        let mut binv = vec![S::zero(); m * m];
        for k in 0..m {
            let r = pivot_row[k];
            binv[k * m..(k + 1) * m].clone_from_slice(&right[r * m..(r + 1) * m]);
        }
        self.binv = binv;
        self.xb = self.apply_inverse(&self.rhs);
        if !S::EXACT {
            for _ in 0..2 {
                let (_, r) = self.residual();
                let dx = self.apply_inverse(&r);
                for (x, d) in self.xb.iter_mut().zip(dx) {
                    *x = x.clone() + d;
                }
            }
        }
        self.since_refactor = 0;
        true
    }

    fn apply_inverse(&self, v: &[S]) -> Vec<S> {
        let m = self.m;
        (0..m)
            .map(|k| {
                self.binv[k * m..(k + 1) * m]
                    .iter()
                    .zip(v)
                    .filter(|(a, b)| !a.is_zero() && !b.is_zero())
                    .fold(S::zero(), |acc, (a, b)| acc + a.clone() * b.clone())
            })
            .collect()
    }

    /// Largest `|b − B x_B|` and the residual vector.
    fn residual(&self) -> (S, Vec<S>) {
        let mut r = self.rhs.clone();
        for (k, &j) in self.basis.iter().enumerate() {
            if self.xb[k].is_zero() {
                continue;
            }
            for (row, a) in self.column(j) {
                r[row] = r[row].clone() - a * self.xb[k].clone();
            }
        }
        let worst = r.iter().fold(S::zero(), |acc, v| S::max_of(acc, v.abs()));
        (worst, r)
    }

    fn start_artificial(&mut self) {
        let m = self.m;
        self.set_basis((self.n..self.n + m).collect());
        let mut binv = vec![S::zero(); m * m];
        for i in 0..m {
            binv[i * m + i] = S::one();
        }
        self.binv = binv;
        self.xb = self.rhs.clone();
    }

    fn prices(&self, costs: &[S]) -> Vec<S> {
        let m = self.m;
        let mut y = vec![S::zero(); m];
        for (k, &j) in self.basis.iter().enumerate() {
            let c = &costs[j];
            if c.is_zero() {
                continue;
            }
            let row = &self.binv[k * m..(k + 1) * m];
            for (yi, b) in y.iter_mut().zip(row) {
                if !b.is_zero() {
                    *yi = yi.clone() + c.clone() * b.clone();
                }
            }
        }
        y
    }

    fn reduced_cost(&self, costs: &[S], y: &[S], j: usize) -> S {
        self.column(j)
            .into_iter()
            .fold(costs[j].clone(), |acc, (r, v)| acc - y[r].clone() * v)
    }

    fn ftran(&self, j: usize) -> Vec<S> {
        let m = self.m;
        let col = self.column(j);
        (0..m)
            .map(|k| {
                col.iter()
                    .fold(S::zero(), |acc, (r, v)| acc + self.binv[k * m + r].clone() * v.clone())
            })
            .collect()
    }

    fn pivot(&mut self, p: usize, q: usize, u: &[S], theta: S) {
        let m = self.m;
        for k in 0..m {
            if k != p && !u[k].is_zero() {
                self.xb[k] = self.xb[k].clone() - theta.clone() * u[k].clone();
            }
        }
        self.xb[p] = theta;
        let inv = S::one() / u[p].clone();
        let nz: Vec<usize> = (0..m).filter(|&c| !self.binv[p * m + c].is_zero()).collect();
        for &c in &nz {
            self.binv[p * m + c] = self.binv[p * m + c].clone() * inv.clone();
        }
        let prow: Vec<S> = nz.iter().map(|&c| self.binv[p * m + c].clone()).collect();
        for k in 0..m {
            if k == p || u[k].is_zero() {
                continue;
            }
            let f = u[k].clone();
            let row = &mut self.binv[k * m..(k + 1) * m];
            for (&c, v) in nz.iter().zip(&prow) {
                row[c] = row[c].clone() - f.clone() * v.clone();
            }
        }
        let leaving = self.basis[p];
        self.position[leaving] = None;
        self.position[q] = Some(p);
        self.basis[p] = q;
        self.iterations += 1;
        self.since_refactor += 1;
        if !S::EXACT && self.since_refactor >= self.opts.refactor_every {
            let ok = self.refactor();
            debug_assert!(ok, "basis became singular");
        }
    }

    fn run(&mut self, costs: &[S], allow_artificial: bool) -> Result<Outcome> {
        let mut bland = self.opts.rule == PivotRule::Bland;
        let mut streak = 0usize;
        loop {
            if self.iterations >= self.cap {
                return Err(Error::CyclingAborted(self.iterations));
            }
            let y = self.prices(costs);
            let limit = if allow_artificial { self.n + self.m } else { self.n };
            let mut entering: Option<(usize, S)> = None;
            for j in 0..limit {
                if self.position[j].is_some() {
                    continue;
                }
                let d = self.reduced_cost(costs, &y, j) / self.scale[j].clone();
                if d > self.tol {
                    match &entering {
                        None => entering = Some((j, d)),
                        Some((_, best)) if !bland && d > *best => entering = Some((j, d)),
                        _ => {}
                    }
                    if bland {
                        break;
                    }
                }
            }
            let Some((q, _)) = entering else {
                return Ok(Outcome::Optimal);
            };
            let u = self.ftran(q);
            let Some((p, theta)) = self.ratio_test(&u, bland) else {
                // confirm a ray on a fresh factorization
                if !S::EXACT && self.since_refactor > 0 && self.refactor() {
                    continue;
                }
                return Ok(Outcome::Unbounded);
            };
            if theta <= self.tol {
                streak += 1;
                if self.opts.rule == PivotRule::DantzigThenBland && streak >= DEGENERATE_STREAK {
                    bland = true;
                }
            } else {
                streak = 0;
                bland = self.opts.rule == PivotRule::Bland;
            }
            self.pivot(p, q, &u, theta);
        }
    }

    /// Leaving row for direction `u`: among rows whose basic value would stay
    /// above `−tol` at the step taken, the largest pivot, or under Bland's
    /// rule the lowest basic index among pivots within `BLAND_PIVOT_SHARE` of
    /// the largest.
    fn ratio_test(&self, u: &[S], bland: bool) -> Option<(usize, S)> {
        let value = |k: usize| S::max_of(self.xb[k].clone(), S::zero());
        let rows: Vec<usize> = (0..self.m).filter(|&k| u[k] > self.tol).collect();
        let bound = rows
            .iter()
            .map(|&k| (value(k) + self.tol.clone()) / u[k].clone())
            .reduce(|a, b| S::min_of(a, b))?;
        let ties: Vec<usize> = rows.into_iter().filter(|&k| value(k) / u[k].clone() <= bound).collect();
        let largest = ties.iter().map(|&k| u[k].clone()).reduce(S::max_of).expect("the minimizing row qualifies");
        let floor = if S::EXACT { S::zero() } else { largest * S::tolerance(BLAND_PIVOT_SHARE) };
        let mut best: Option<usize> = None;
        for &k in &ties {
            if bland && u[k] < floor {
                continue;
            }
            best = match best {
                None => Some(k),
                Some(b) if bland => Some(if self.basis[k] < self.basis[b] { k } else { b }),
                Some(b) => Some(if u[k] > u[b] || (u[k] == u[b] && self.basis[k] < self.basis[b]) { k } else { b }),
            };
        }
        let p = best.expect("the minimizing row qualifies");
        Some((p, value(p) / u[p].clone()))
    }

    /// Largest negative basic value and largest row residual `|Ax − b|` of
    /// the current basic solution.
    fn primal_error(&self) -> (S, S) {
        let neg = self.xb.iter().fold(S::zero(), |acc, v| S::max_of(acc, -v.clone()));
        (neg, self.residual().0)
    }

    /// Pivot zero-valued artificials out of the basis where possible.
    fn drive_out_artificials(&mut self) {
        let m = self.m;
        for k in 0..m {
            if self.basis[k] < self.n {
                continue;
            }
            let row: Vec<S> = self.binv[k * m..(k + 1) * m].to_vec();
            let candidate = (0..self.n).find(|&j| {
                self.position[j].is_none() && {
                    let v = self
                        .column(j)
                        .into_iter()
                        .fold(S::zero(), |acc, (r, a)| acc + row[r].clone() * a);
                    v.abs() > self.tol
                }
            });
            if let Some(j) = candidate {
                let u = self.ftran(j);
                let theta = self.xb[k].clone() / u[k].clone();
                self.pivot(k, j, &u, theta);
            }
        }
    }
}

/// Solve `lp`, optionally from a caller-supplied basis (one column per row).
/// An unusable starting basis falls back to phase one.
pub fn solve<S: Scalar>(
    lp: &LinearProgram<S>,
    start: Option<&[usize]>,
    opts: &SimplexOptions,
) -> Result<SimplexResult<S>> {
    solve_scaled(lp, start, opts, None)
}

/// [`solve`] with reduced costs divided by `price_scale[j]` (positive) when
/// choosing and accepting entering columns.
pub fn solve_scaled<S: Scalar>(
    lp: &LinearProgram<S>,
    start: Option<&[usize]>,
    opts: &SimplexOptions,
    price_scale: Option<&[S]>,
) -> Result<SimplexResult<S>> {
    if let Some(ps) = price_scale {
        if ps.len() != lp.columns.len() || ps.iter().any(|v| v <= &S::zero()) {
            return Err(Error::Dimension("pricing scale needs one positive entry per column".into()));
        }
    }
    let bland = SimplexOptions { rule: PivotRule::Bland, ..opts.clone() };
    let mut attempts: Vec<(Option<&[usize]>, &SimplexOptions)> = vec![(start, opts)];
    if start.is_some() {
        attempts.push((None, opts));
    }
    if opts.rule != PivotRule::Bland {
        attempts.push((None, &bland));
    }
    // a floating-point ray may be an artefact of a poor basis; believe it
    // only when every attempt finds one
    let mut failures = Vec::new();
    for (s, o) in attempts {
        match attempt(lp, s, o, price_scale) {
            Err(Error::NumericalFailure(msg)) => failures.push(msg),
            Err(Error::Unbounded) if !S::EXACT => {}
            other => return other,
        }
    }
    if failures.is_empty() {
        return Err(Error::Unbounded);
    }
    Err(Error::NumericalFailure(failures.join("; ")))
}

fn attempt<S: Scalar>(
    lp: &LinearProgram<S>,
    start: Option<&[usize]>,
    opts: &SimplexOptions,
    price_scale: Option<&[S]>,
) -> Result<SimplexResult<S>> {
    let mut solver = Solver::new(lp, opts, price_scale);
    let (m, n) = (solver.m, solver.n);
    let feas_tol = S::tolerance(opts.objective_tol);

    let mut warm = false;
    if let Some(basis) = start {
        if basis.len() == m && basis.iter().all(|&j| j < n) {
            solver.set_basis(basis.to_vec());
            warm = solver.refactor() && solver.xb.iter().all(|v| v >= &(S::zero() - feas_tol.clone()));
        }
    }
    let used_phase_one = !warm;
    if !warm {
        solver.start_artificial();
        let mut costs = vec![S::zero(); n + m];
        for c in costs.iter_mut().skip(n) {
            *c = -S::one();
        }
        match solver.run(&costs, true)? {
            Outcome::Optimal => {}
            Outcome::Unbounded => return Err(Error::Infeasible),
        }
        let infeasibility = solver
            .basis
            .iter()
            .zip(&solver.xb)
            .filter(|(j, _)| **j >= n)
            .fold(S::zero(), |acc, (_, v)| acc + v.clone());
        let scale = solver.rhs.iter().fold(S::one(), |acc, b| S::max_of(acc, b.abs()));
        if infeasibility > feas_tol * scale {
            return Err(Error::Infeasible);
        }
        solver.drive_out_artificials();
    }

    let mut costs = lp.objective.clone();
    costs.extend(std::iter::repeat_n(S::zero(), m));
    let scale = solver.rhs.iter().fold(S::one(), |acc, b| S::max_of(acc, b.abs()));
    let accuracy = S::tolerance(opts.objective_tol) * scale;
    // rerun from each clean factorization until no column enters
    for round in 0.. {
        let before = solver.iterations;
        match solver.run(&costs, false)? {
            Outcome::Optimal => {}
            Outcome::Unbounded => return Err(Error::Unbounded),
        }
        if S::EXACT {
            break;
        }
        if !solver.refactor() {
            return Err(Error::NumericalFailure("final basis is singular".into()));
        }
        let (neg, res) = solver.primal_error();
        if neg > accuracy || res > accuracy {
            return Err(Error::NumericalFailure(format!(
                "basic solution off by {:e} (negative part) and {:e} (residual)",
                neg.to_f64_lossy(),
                res.to_f64_lossy()
            )));
        }
        if solver.iterations == before || round >= 4 {
            break;
        }
    }

    let mut x = vec![S::zero(); n];
    for (k, &j) in solver.basis.iter().enumerate() {
        if j < n {
            x[j] = solver.xb[k].clone();
        }
    }
    let objective = x
        .iter()
        .zip(&lp.objective)
        .filter(|(v, _)| !v.is_zero())
        .fold(S::zero(), |acc, (v, c)| acc + v.clone() * c.clone());
    let y = solver.prices(&costs);
    let alternative_optima = (0..n).any(|j| {
        solver.position[j].is_none() && solver.reduced_cost(&costs, &y, j).abs() <= solver.tol
    });
    let duals = y
        .into_iter()
        .zip(&solver.sign)
        .map(|(v, &neg)| if neg { -v } else { v })
        .collect();
    Ok(SimplexResult {
        x,
        objective,
        duals,
        basis: solver.basis.clone(),
        iterations: solver.iterations,
        alternative_optima,
        used_phase_one,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    fn lp_f64(columns: Vec<Vec<(usize, f64)>>, objective: Vec<f64>, rhs: Vec<f64>) -> LinearProgram<f64> {
        LinearProgram { n_rows: rhs.len(), columns, objective, rhs }
    }

    /// max 3x + 2y, x + y + s1 = 4, x + 3y + s2 = 6
    fn textbook() -> LinearProgram<f64> {
        lp_f64(
            vec![
                vec![(0, 1.0), (1, 1.0)],
                vec![(0, 1.0), (1, 3.0)],
                vec![(0, 1.0)],
                vec![(1, 1.0)],
            ],
            vec![3.0, 2.0, 0.0, 0.0],
            vec![4.0, 6.0],
        )
    }

    #[test]
    fn solves_textbook_problem_with_both_rules() {
        for rule in [PivotRule::Bland, PivotRule::DantzigThenBland] {
            let opts = SimplexOptions { rule, ..Default::default() };
            let res = solve(&textbook(), None, &opts).unwrap();
            assert!((res.objective - 12.0).abs() < 1e-12);
            assert!((res.x[0] - 4.0).abs() < 1e-12);
            // y1 = 3 prices the first row, the second is slack
            assert!((res.duals[0] - 3.0).abs() < 1e-12);
            assert!(res.duals[1].abs() < 1e-12);
        }
    }

    #[test]
    fn warm_start_skips_phase_one() {
        let res = solve(&textbook(), Some(&[2, 3]), &SimplexOptions::default()).unwrap();
        assert!(!res.used_phase_one);
        assert!((res.objective - 12.0).abs() < 1e-12);
        // infeasible or singular hints fall back
        let res = solve(&textbook(), Some(&[2, 2]), &SimplexOptions::default()).unwrap();
        assert!(res.used_phase_one);
        assert!((res.objective - 12.0).abs() < 1e-12);
    }

    #[test]
    fn negative_rhs_rows_are_handled() {
        // max -x, -x = -2
        let lp = lp_f64(vec![vec![(0, -1.0)]], vec![-1.0], vec![-2.0]);
        let res = solve(&lp, None, &SimplexOptions::default()).unwrap();
        assert!((res.x[0] - 2.0).abs() < 1e-12);
        assert!((res.duals[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reports_infeasible_and_unbounded() {
        // x = 1 and x = 2
        let lp = lp_f64(vec![vec![(0, 1.0), (1, 1.0)]], vec![0.0], vec![1.0, 2.0]);
        assert!(matches!(solve(&lp, None, &SimplexOptions::default()), Err(Error::Infeasible)));
        // max x, x - y = 0
        let lp = lp_f64(vec![vec![(0, 1.0)], vec![(0, -1.0)]], vec![1.0, 0.0], vec![0.0]);
        assert!(matches!(solve(&lp, None, &SimplexOptions::default()), Err(Error::Unbounded)));
    }

    #[test]
    fn iteration_cap_aborts() {
        let opts = SimplexOptions { max_iterations: Some(1), ..Default::default() };
        assert!(matches!(solve(&textbook(), None, &opts), Err(Error::CyclingAborted(1))));
    }

    #[test]
    fn redundant_rows_keep_artificials_at_zero() {
        // x + y = 1 twice
        let lp = lp_f64(
            vec![vec![(0, 1.0), (1, 1.0)], vec![(0, 1.0), (1, 1.0)]],
            vec![1.0, 2.0],
            vec![1.0, 1.0],
        );
        let res = solve(&lp, None, &SimplexOptions::default()).unwrap();
        assert!((res.objective - 2.0).abs() < 1e-12);
    }

    #[test]
    fn exact_arithmetic_matches_float() {
        let q = |n: i64| BigRational::from_integer(n.into());
        let lp = LinearProgram {
            n_rows: 2,
            columns: vec![
                vec![(0, q(1)), (1, q(1))],
                vec![(0, q(1)), (1, q(3))],
                vec![(0, q(1))],
                vec![(1, q(1))],
            ],
            objective: vec![q(3), q(2), q(0), q(0)],
            rhs: vec![q(4), q(6)],
        };
        let res = solve(&lp, None, &SimplexOptions { rule: PivotRule::Bland, ..Default::default() }).unwrap();
        assert_eq!(res.objective, q(12));
    }

    /// Beale's cycling example: Bland's rule must terminate.
    #[test]
    fn bland_terminates_on_beale() {
        let f = |v: f64| v;
        // max 0.75x4 - 20x5 + 0.5x6 - 6x7 with slacks x1..x3
        let lp = lp_f64(
            vec![
                vec![(0, 1.0)],
                vec![(1, 1.0)],
                vec![(2, 1.0)],
                vec![(0, f(0.25)), (1, 0.5)],
                vec![(0, -8.0), (1, -12.0)],
                vec![(0, -1.0), (1, -0.5), (2, 1.0)],
                vec![(0, 9.0), (1, 3.0)],
            ],
            vec![0.0, 0.0, 0.0, 0.75, -20.0, 0.5, -6.0],
            vec![0.0, 0.0, 1.0],
        );
        for rule in [PivotRule::Bland, PivotRule::DantzigThenBland] {
            let res = solve(&lp, Some(&[0, 1, 2]), &SimplexOptions { rule, ..Default::default() }).unwrap();
            assert!((res.objective - 1.25).abs() < 1e-12, "{rule:?}: {}", res.objective);
        }
    }
}
