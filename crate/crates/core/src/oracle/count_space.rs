use std::collections::HashMap;

use crate::error::{Error, Result};

/// All ways to place `N` exchangeable arms in `|S|` states, in
/// lexicographic order, with a packed key per vector.
#[derive(Clone, Debug)]
pub struct CountSpace {
    arms: u64,
    n_states: usize,
    states: Vec<Vec<u64>>,
    index: HashMap<u64, usize>,
}

/// Exact `C(n, k)` when it fits in a `u128`, saturating otherwise.
pub fn binomial_coefficient(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n.saturating_sub(k));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

pub(crate) fn compositions(total: u64, parts: usize) -> Vec<Vec<u64>> {
    fn go(rem: u64, parts: usize, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if parts == 1 {
            cur.push(rem);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for v in (0..=rem).rev() {
            cur.push(v);
            go(rem - v, parts - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if parts > 0 {
        go(total, parts, &mut Vec::with_capacity(parts), &mut out);
    }
    out
}

impl CountSpace {
    pub fn size_of(arms: u64, n_states: usize) -> u128 {
        binomial_coefficient(arms + n_states as u64 - 1, n_states as u64 - 1)
    }

    /// Enumerate, refusing spaces larger than `limit`.
    pub fn new(arms: u64, n_states: usize, limit: u128) -> Result<Self> {
        let size = Self::size_of(arms, n_states);
        if size > limit {
            return Err(Error::SizeGuard { size, limit });
        }
        let radix = arms + 1;
        if (radix as f64).powi(n_states as i32) >= u64::MAX as f64 {
            return Err(Error::SizeGuard { size: u128::MAX, limit });
        }
        let states = compositions(arms, n_states);
        let mut space = Self { arms, n_states, states, index: HashMap::new() };
        space.index = space.states.iter().enumerate().map(|(i, c)| (space.key(c), i)).collect();
        Ok(space)
    }

    pub fn arms(&self) -> u64 {
        self.arms
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[Vec<u64>] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &[u64] {
        &self.states[i]
    }

    /// Mixed-radix key; sums of keys are keys of sums.
    pub fn key(&self, counts: &[u64]) -> u64 {
        counts.iter().rev().fold(0u64, |acc, &c| acc * (self.arms + 1) + c)
    }

    pub fn index_of(&self, counts: &[u64]) -> Option<usize> {
        self.index.get(&self.key(counts)).copied()
    }

    pub fn index_of_key(&self, key: u64) -> Option<usize> {
        self.index.get(&key).copied()
    }
}

/// Pull vectors `0 ≤ u ≤ counts` with `Σu = budget`.
pub fn pull_vectors(counts: &[u64], budget: u64) -> Vec<Vec<u64>> {
    fn go(counts: &[u64], s: usize, rem: u64, room: u64, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if s == counts.len() {
            if rem == 0 {
                out.push(cur.clone());
            }
            return;
        }
        let room = room - counts[s];
        let lo = rem.saturating_sub(room);
        for u in lo..=counts[s].min(rem) {
            cur.push(u);
            go(counts, s + 1, rem - u, room, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    let total: u64 = counts.iter().sum();
    if budget <= total {
        go(counts, 0, budget, total, &mut Vec::new(), &mut out);
    }
    out
}
