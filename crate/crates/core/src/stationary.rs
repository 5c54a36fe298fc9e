//! Exact evaluation of stationary strategy pairs: induced chains, occupation
//! times, player 2's best reply, and a Monte Carlo estimator for checks.

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{Game, Player, PurePolicy, StationaryStrategy, StrategyError};
use crate::numerics::{LinalgError, ResolventFactorization};
use crate::shapley::{apply_shapley, valid_discount, SolveError};

/// Slack allowed in `w ≤ Φ(λ, w)` for a guarantee vector `w`.
pub const GUARANTEE_TOLERANCE: f64 = 1e-8;
/// Truncation bias allowed for simulated discounted sums.
pub const MAX_TRUNCATION_BIAS: f64 = 1e-9;

const IMPROVEMENT_EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid strategy: {0}")]
    Strategy(#[from] StrategyError),
    #[error("discount factor {0} outside (0, 1]")]
    InvalidDiscount(f64),
    #[error("linear solve: {0}")]
    Linalg(#[from] LinalgError),
    #[error("policy iteration did not stabilize within {0} improvement steps")]
    PolicyCycle(usize),
    #[error("start state {state} out of range (game has {count} states)")]
    State { state: usize, count: usize },
    #[error("horizon {horizon} leaves truncation bias {bias:e}, above {max:e}")]
    Horizon { horizon: usize, bias: f64, max: f64 },
    #[error("number of episodes must be positive")]
    Episodes,
    #[error("Shapley operator: {0}")]
    Shapley(#[source] Box<SolveError>),
}

fn check_discount(lambda: f64) -> Result<(), EvalError> {
    if valid_discount(lambda) {
        Ok(())
    } else {
        Err(EvalError::InvalidDiscount(lambda))
    }
}

/// Markov chain and expected stage payoffs induced by a stationary pair.
#[derive(Debug, Clone, PartialEq)]
pub struct InducedChain {
    /// Row-stochastic `Q(x, y)`.
    pub transition: DMatrix<f64>,
    pub payoff: DVector<f64>,
}

pub fn induce_chain(
    game: &Game,
    x: &StationaryStrategy,
    y: &StationaryStrategy,
) -> Result<InducedChain, EvalError> {
    x.check_shape(game, Player::One)?;
    y.check_shape(game, Player::Two)?;
    let n = game.num_states();
    let mut q = DMatrix::zeros(n, n);
    let mut g = DVector::zeros(n);
    for s in 0..n {
        for (i, &xi) in x.row(s).iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (j, &yj) in y.row(s).iter().enumerate() {
                let w = xi * yj;
                if w == 0.0 {
                    continue;
                }
                g[s] += w * game.payoff(s, i, j);
                for (t, &p) in game.transition(s, i, j).iter().enumerate() {
                    q[(s, t)] += w * p;
                }
            }
        }
    }
    Ok(InducedChain { transition: q, payoff: g })
}

/// `λ (I − (1−λ) Q)⁻¹`: row `ω` is the expected discounted time spent in
/// each state from `ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupationMatrix {
    pub lambda: f64,
    pub matrix: DMatrix<f64>,
}

impl OccupationMatrix {
    pub fn row(&self, state: usize) -> Vec<f64> {
        self.matrix.row(state).iter().copied().collect()
    }

    /// `t · g` for a stage payoff vector.
    pub fn payoff(&self, stage: &DVector<f64>) -> DVector<f64> {
        &self.matrix * stage
    }
}

pub fn chain_occupation(chain: &InducedChain, lambda: f64) -> Result<OccupationMatrix, EvalError> {
    check_discount(lambda)?;
    let n = chain.transition.nrows();
    // row s of the inverse solves xᵀ M = e_sᵀ
    let lu = ResolventFactorization::new(&chain.transition, lambda)?;
    let mut matrix = DMatrix::zeros(n, n);
    for s in 0..n {
        let mut e = DVector::zeros(n);
        e[s] = lambda;
        let col = lu.solve_transpose(&e)?;
        matrix.set_row(s, &col.transpose());
    }
    Ok(OccupationMatrix { lambda, matrix })
}

pub fn occupation(
    game: &Game,
    x: &StationaryStrategy,
    y: &StationaryStrategy,
    lambda: f64,
) -> Result<OccupationMatrix, EvalError> {
    check_discount(lambda)?;
    chain_occupation(&induce_chain(game, x, y)?, lambda)
}

/// `γ_λ = λ (I − (1−λ) Q)⁻¹ g` by a single linear solve.
pub fn evaluate_chain(chain: &InducedChain, lambda: f64) -> Result<Vec<f64>, EvalError> {
    check_discount(lambda)?;
    let rhs = &chain.payoff * lambda;
    let v = ResolventFactorization::new(&chain.transition, lambda)?.solve(&rhs)?;
    Ok(v.iter().copied().collect())
}

/// Discounted payoff vector of the pair `(x, y)`.
pub fn evaluate(
    game: &Game,
    x: &StationaryStrategy,
    y: &StationaryStrategy,
    lambda: f64,
) -> Result<Vec<f64>, EvalError> {
    check_discount(lambda)?;
    evaluate_chain(&induce_chain(game, x, y)?, lambda)
}

/// Discounted payoff through the occupation matrix, `t_λ · g`.
pub fn discounted_payoff(
    game: &Game,
    x: &StationaryStrategy,
    y: &StationaryStrategy,
    lambda: f64,
) -> Result<Vec<f64>, EvalError> {
    let chain = induce_chain(game, x, y)?;
    let t = chain_occupation(&chain, lambda)?;
    Ok(t.payoff(&chain.payoff).iter().copied().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestReply {
    pub policy: PurePolicy,
    /// `w^x = min_y γ_λ(x, y)`.
    pub values: Vec<f64>,
    pub improvement_steps: usize,
}

/// Player 2's pure stationary best reply to `x` by policy iteration on the
/// induced MDP. Ties go to the lowest action index.
pub fn best_reply_p2(game: &Game, x: &StationaryStrategy, lambda: f64) -> Result<BestReply, EvalError> {
    check_discount(lambda)?;
    x.check_shape(game, Player::One)?;
    let n = game.num_states();
    // expectations over player 1's mixture, per state and column
    let mut stage: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut next: Vec<Vec<Vec<f64>>> = Vec::with_capacity(n);
    for s in 0..n {
        let cols = game.num_p2_actions(s);
        let mut gs = vec![0.0; cols];
        let mut qs = vec![vec![0.0; n]; cols];
        for (i, &xi) in x.row(s).iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for j in 0..cols {
                gs[j] += xi * game.payoff(s, i, j);
                for (t, &p) in game.transition(s, i, j).iter().enumerate() {
                    qs[j][t] += xi * p;
                }
            }
        }
        stage.push(gs);
        next.push(qs);
    }

    let lowest = |s: usize, score: &dyn Fn(usize) -> f64| -> (usize, f64) {
        let mut best = (0, score(0));
        for j in 1..stage[s].len() {
            let v = score(j);
            if v < best.1 {
                best = (j, v);
            }
        }
        best
    };
    let mut policy: Vec<usize> = (0..n).map(|s| lowest(s, &|j| stage[s][j]).0).collect();

    let cap = game
        .pure_policy_count(Player::Two)
        .saturating_add(1)
        .min(100_000) as usize;
    for step in 0..cap {
        let mut q = DMatrix::zeros(n, n);
        let mut g = DVector::zeros(n);
        for s in 0..n {
            g[s] = stage[s][policy[s]];
            for t in 0..n {
                q[(s, t)] = next[s][policy[s]][t];
            }
        }
        let values = evaluate_chain(&InducedChain { transition: q, payoff: g }, lambda)?;
        let mut changed = false;
        for s in 0..n {
            let score = |j: usize| {
                let cont: f64 = next[s][j].iter().zip(&values).map(|(p, v)| p * v).sum();
                lambda * stage[s][j] + (1.0 - lambda) * cont
            };
            let current = score(policy[s]);
            let (j, best) = lowest(s, &score);
            if best < current - IMPROVEMENT_EPS && j != policy[s] {
                policy[s] = j;
                changed = true;
            }
        }
        if !changed {
            return Ok(BestReply {
                policy: PurePolicy::from_vec_unchecked(policy),
                values,
                improvement_steps: step,
            });
        }
    }
    Err(EvalError::PolicyCycle(cap))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuaranteeCheck {
    pub guarantee: Vec<f64>,
    /// `min_ω (Φ(λ, w)(ω) − w(ω))`.
    pub worst_margin: f64,
    pub holds: bool,
}

/// Verifies `w^x ≤ Φ(λ, w^x)` up to [`GUARANTEE_TOLERANCE`].
pub fn guarantee_inequality_check(
    game: &Game,
    x: &StationaryStrategy,
    lambda: f64,
) -> Result<GuaranteeCheck, EvalError> {
    let w = best_reply_p2(game, x, lambda)?.values;
    let phi = apply_shapley(game, lambda, &w).map_err(|e| EvalError::Shapley(Box::new(e)))?;
    let worst_margin = phi
        .iter()
        .zip(&w)
        .map(|(p, v)| p - v)
        .fold(f64::INFINITY, f64::min);
    Ok(GuaranteeCheck {
        guarantee: w,
        worst_margin,
        holds: worst_margin >= -GUARANTEE_TOLERANCE,
    })
}

/// Smallest horizon `H` with `(1−λ)^H ≤ 1e-9`.
pub fn default_horizon(lambda: f64) -> usize {
    if lambda >= 1.0 {
        1
    } else {
        (MAX_TRUNCATION_BIAS.ln() / (1.0 - lambda).ln()).ceil().max(1.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub episodes: usize,
    pub horizon: usize,
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    p.iter()
        .map(|v| {
            acc += v;
            acc
        })
        .collect()
}

fn sample(cdf: &[f64], u: f64) -> usize {
    let k = cdf.partition_point(|&c| c <= u);
    // guards rows whose cumulative sum rounds below one
    k.min(cdf.len() - 1)
}

/// Truncated discounted payoff averaged over independent episodes. Episode
/// `k` draws from a ChaCha8 stream `k` under `seed`, so results do not depend
/// on the thread count.
#[allow(clippy::too_many_arguments)]
pub fn simulate_discounted(
    game: &Game,
    x: &StationaryStrategy,
    y: &StationaryStrategy,
    lambda: f64,
    start: usize,
    horizon: usize,
    episodes: usize,
    seed: u64,
) -> Result<MonteCarloEstimate, EvalError> {
    check_discount(lambda)?;
    x.check_shape(game, Player::One)?;
    y.check_shape(game, Player::Two)?;
    let n = game.num_states();
    if start >= n {
        return Err(EvalError::State { state: start, count: n });
    }
    if episodes == 0 {
        return Err(EvalError::Episodes);
    }
    let bias = (1.0 - lambda).powf(horizon as f64);
    if bias > MAX_TRUNCATION_BIAS {
        return Err(EvalError::Horizon {
            horizon,
            bias,
            max: MAX_TRUNCATION_BIAS,
        });
    }
    let xcdf: Vec<Vec<f64>> = x.rows().iter().map(|r| cumulative(r)).collect();
    let ycdf: Vec<Vec<f64>> = y.rows().iter().map(|r| cumulative(r)).collect();
    let qcdf: Vec<Vec<Vec<Vec<f64>>>> = (0..n)
        .map(|s| {
            (0..game.num_p1_actions(s))
                .map(|i| {
                    (0..game.num_p2_actions(s))
                        .map(|j| cumulative(game.transition(s, i, j)))
                        .collect()
                })
                .collect()
        })
        .collect();

    let payoffs: Vec<f64> = (0..episodes)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let mut state = start;
            let mut weight = lambda;
            let mut total = 0.0;
            for _ in 0..horizon {
                let i = sample(&xcdf[state], rng.random::<f64>());
                let j = sample(&ycdf[state], rng.random::<f64>());
                total += weight * game.payoff(state, i, j);
                weight *= 1.0 - lambda;
                state = sample(&qcdf[state][i][j], rng.random::<f64>());
            }
            total
        })
        .collect();
    let count = episodes as f64;
    let mean = payoffs.iter().sum::<f64>() / count;
    let std_error = if episodes > 1 {
        let var = payoffs.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (count - 1.0);
        (var / count).sqrt()
    } else {
        0.0
    };
    Ok(MonteCarloEstimate {
        mean,
        std_error,
        episodes,
        horizon,
    })
}
