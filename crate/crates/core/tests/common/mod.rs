//! Oracles shared by the integration tests. Nothing here calls the library
//! code it is used to check.

#![allow(dead_code)]

use limitval::{CanonicalStrategy, Game, MonomialIndex, StationaryStrategy};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_mixed(rng: &mut ChaCha8Rng, counts: &[usize]) -> StationaryStrategy {
    let rows = counts
        .iter()
        .map(|&k| {
            let w: Vec<f64> = (0..k).map(|_| 1.0 - rng.random::<f64>()).collect();
            let t: f64 = w.iter().sum();
            w.into_iter().map(|v| v / t).collect()
        })
        .collect();
    StationaryStrategy::new(rows).unwrap()
}

pub fn random_game(rng: &mut ChaCha8Rng, max_states: usize, max_actions: usize) -> Game {
    let n = rng.random_range(1..=max_states);
    let a1 = rng.random_range(1..=max_actions);
    let a2 = rng.random_range(1..=max_actions);
    Game::random(n, a1, a2, rng.random()).unwrap()
}

/// Canonical strategy with exponents in quarters, kept as integers so the
/// exponent sums can be classified exactly.
pub struct QuarterStrategy {
    pub counts: Vec<usize>,
    pub quarters: Vec<i64>,
    pub c: Vec<f64>,
}

impl QuarterStrategy {
    /// `|Ω|` in `1..=max_states`, at most `max_pairs` pairs and three actions
    /// per state; exponents in `{0, 1/4, …, |Ω|}` with one zero per state.
    pub fn random(rng: &mut ChaCha8Rng, max_states: usize, max_pairs: usize) -> Self {
        let n = rng.random_range(1..=max_states);
        let mut counts = vec![1usize; n];
        let extra = rng.random_range(0..=max_pairs.saturating_sub(n));
        for _ in 0..extra {
            let s = rng.random_range(0..n);
            if counts[s] < 3 {
                counts[s] += 1;
            }
        }
        let mut quarters = vec![];
        let mut c = vec![];
        for &k in &counts {
            let mut q: Vec<i64> = (0..k).map(|_| rng.random_range(0..=4 * n as i64)).collect();
            q[rng.random_range(0..k)] = 0;
            let mut cc: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..2.0)).collect();
            let mass: f64 = cc.iter().zip(&q).filter(|(_, &e)| e == 0).map(|(v, _)| v).sum();
            for (v, &e) in cc.iter_mut().zip(&q) {
                if e == 0 {
                    *v /= mass;
                }
            }
            quarters.extend(q);
            c.extend(cc);
        }
        Self { counts, quarters, c }
    }

    pub fn num_states(&self) -> usize {
        self.counts.len()
    }

    pub fn num_pairs(&self) -> usize {
        self.quarters.len()
    }

    pub fn to_canonical(&self) -> CanonicalStrategy {
        let mut c = vec![];
        let mut e = vec![];
        let mut k = 0;
        for &n in &self.counts {
            c.push(self.c[k..k + n].to_vec());
            e.push(self.quarters[k..k + n].iter().map(|&q| q as f64 / 4.0).collect());
            k += n;
        }
        CanonicalStrategy::from_rows(c, e).unwrap()
    }

    /// Exact limit of `λ^a ∏ x^A`: sign of the quarter sum, else `∏ c^A`.
    pub fn limit(&self, idx: &MonomialIndex) -> OracleClass {
        let s: i64 = 4 * idx.power as i64
            + idx
                .pattern
                .iter()
                .zip(&self.quarters)
                .map(|(&a, &q)| a as i64 * q)
                .sum::<i64>();
        match s.signum() {
            1 => OracleClass::Zero,
            -1 => OracleClass::Infinite,
            _ => OracleClass::Finite(
                idx.pattern
                    .iter()
                    .zip(&self.c)
                    .map(|(&a, c)| c.powi(a as i32))
                    .product(),
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleClass {
    Zero,
    Finite(f64),
    Infinite,
}

/// `3^P (2|Ω|+1)` indices in any order.
pub fn all_indices(num_pairs: usize, num_states: usize) -> Vec<MonomialIndex> {
    let total = 3usize.pow(num_pairs as u32);
    let n = num_states as i32;
    let mut out = Vec::with_capacity(total * (2 * num_states + 1));
    for code in 0..total {
        let mut rest = code;
        let pattern: Vec<i8> = (0..num_pairs)
            .map(|_| {
                let d = (rest % 3) as i8 - 1;
                rest /= 3;
                d
            })
            .collect();
        for a in -n..=n {
            out.push(MonomialIndex::new(pattern.clone(), a));
        }
    }
    out
}

/// Dense `λ (I − (1−λ)Q)^{-1} g` by the truncated series with `m` terms.
pub fn series_payoff(q: &[Vec<f64>], g: &[f64], lambda: f64, m: usize) -> Vec<f64> {
    let n = g.len();
    let mut acc = vec![0.0; n];
    let mut term = g.to_vec();
    let mut weight = lambda;
    for _ in 0..m {
        for s in 0..n {
            acc[s] += weight * term[s];
        }
        term = (0..n).map(|s| (0..n).map(|t| q[s][t] * term[t]).sum()).collect();
        weight *= 1.0 - lambda;
    }
    acc
}

/// Expected stage payoff and transition matrix of a stationary pair.
pub fn chain(game: &Game, x: &StationaryStrategy, y: &StationaryStrategy) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = game.num_states();
    let mut q = vec![vec![0.0; n]; n];
    let mut g = vec![0.0; n];
    for s in 0..n {
        for (i, xi) in x.row(s).iter().enumerate() {
            for (j, yj) in y.row(s).iter().enumerate() {
                g[s] += xi * yj * game.payoff(s, i, j);
                for (t, p) in game.transition(s, i, j).iter().enumerate() {
                    q[s][t] += xi * yj * p;
                }
            }
        }
    }
    (q, g)
}

/// Discounted payoff of a pair by value iteration on the induced chain,
/// accurate to `tol`.
pub fn chain_value(q: &[Vec<f64>], g: &[f64], lambda: f64, tol: f64) -> Vec<f64> {
    let n = g.len();
    let mut v = vec![0.0; n];
    loop {
        let next: Vec<f64> = (0..n)
            .map(|s| lambda * g[s] + (1.0 - lambda) * (0..n).map(|t| q[s][t] * v[t]).sum::<f64>())
            .collect();
        let gap = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if gap <= tol * lambda / (1.0 - lambda).max(1e-300) {
            return v;
        }
    }
}

/// Gaussian elimination with partial pivoting on a dense copy.
pub fn solve_dense(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(r, &v)| r.iter().copied().chain([v]).collect()).collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap();
        m.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for k in col..=n {
                m[r][k] -= f * m[col][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| m[r][k] * x[k]).sum();
        x[r] = (m[r][n] - s) / m[r][r];
    }
    x
}

/// Exact discounted payoff `λ (I − (1−λ)Q)^{-1} g` of a chain.
pub fn chain_payoff(q: &[Vec<f64>], g: &[f64], lambda: f64) -> Vec<f64> {
    let n = g.len();
    let a: Vec<Vec<f64>> = (0..n)
        .map(|s| (0..n).map(|t| if s == t { 1.0 } else { 0.0 } - (1.0 - lambda) * q[s][t]).collect())
        .collect();
    let b: Vec<f64> = g.iter().map(|v| lambda * v).collect();
    solve_dense(&a, &b)
}

pub fn pair_payoff(game: &Game, x: &StationaryStrategy, y: &StationaryStrategy, lambda: f64) -> Vec<f64> {
    let (q, g) = chain(game, x, y);
    chain_payoff(&q, &g, lambda)
}

/// All pure stationary strategies for the given per-state action counts.
pub fn pure_strategies(counts: &[usize]) -> Vec<StationaryStrategy> {
    let mut out = vec![vec![]];
    for &k in counts {
        let mut next = vec![];
        for prefix in &out {
            for a in 0..k {
                let mut p: Vec<usize> = prefix.clone();
                p.push(a);
                next.push(p);
            }
        }
        out = next;
    }
    out.into_iter()
        .map(|p| {
            StationaryStrategy::new(
                p.iter()
                    .zip(counts)
                    .map(|(&a, &k)| (0..k).map(|i| if i == a { 1.0 } else { 0.0 }).collect())
                    .collect(),
            )
            .unwrap()
        })
        .collect()
}

/// `min_y γ_λ(x, y)` by enumerating player 2's pure stationary replies.
pub fn enumerated_guarantee(game: &Game, x: &StationaryStrategy, lambda: f64) -> Vec<f64> {
    let mut best = vec![f64::INFINITY; game.num_states()];
    for y in pure_strategies(&game.p2_action_counts()) {
        for (b, v) in best.iter_mut().zip(pair_payoff(game, x, &y, lambda)) {
            *b = b.min(v);
        }
    }
    best
}
