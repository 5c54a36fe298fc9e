//! The Shapley operator `Φ(λ, f)` and the discounted value `v_λ`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{Game, StationaryStrategy};
use crate::matrix_game::{solve_matrix_game, MatrixGame, MatrixGameError};
use crate::stationary::{best_reply_p2, EvalError};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("discount factor {0} outside (0, 1]")]
    InvalidDiscount(f64),
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("value vector has {got} entries, game has {expected} states")]
    Dimension { expected: usize, got: usize },
    #[error("{method:?} did not converge within {iterations} iterations at lambda = {lambda} (residual {residual:e})")]
    NotConverged {
        method: SolveMethod,
        lambda: f64,
        iterations: usize,
        residual: f64,
    },
    #[error("matrix game: {0}")]
    MatrixGame(#[from] MatrixGameError),
    #[error("policy evaluation: {0}")]
    Evaluation(#[from] EvalError),
}

pub(crate) fn valid_discount(lambda: f64) -> bool {
    lambda > 0.0 && lambda <= 1.0
}

/// How `discounted_value` computes the fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    /// `v_{k+1} = Φ(λ, v_k)` from `v_0 = 0`.
    ValueIteration,
    /// Player-1 strategy iteration: greedy strategy against the current
    /// values, then its exact guarantee against player 2's MDP best reply.
    #[default]
    StrategyIteration,
}

/// Optimal `(value, x, y)` of every state's auxiliary matrix game.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapleyStep {
    pub values: Vec<f64>,
    pub x: StationaryStrategy,
    pub y: StationaryStrategy,
}

/// Entries `λ g(ω,i,j) + (1−λ) Σ q(ω'|ω,i,j) f(ω')` of the game at `state`.
pub fn auxiliary_matrix(game: &Game, lambda: f64, f: &[f64], state: usize) -> MatrixGame {
    let rows = (0..game.num_p1_actions(state))
        .map(|i| {
            (0..game.num_p2_actions(state))
                .map(|j| {
                    let cont: f64 = game
                        .transition(state, i, j)
                        .iter()
                        .zip(f)
                        .map(|(q, v)| q * v)
                        .sum();
                    lambda * game.payoff(state, i, j) + (1.0 - lambda) * cont
                })
                .collect()
        })
        .collect();
    MatrixGame::new(rows).expect("auxiliary matrix is nonempty and finite")
}

fn check_inputs(game: &Game, lambda: f64, f: &[f64]) -> Result<(), SolveError> {
    if !valid_discount(lambda) {
        return Err(SolveError::InvalidDiscount(lambda));
    }
    if f.len() != game.num_states() {
        return Err(SolveError::Dimension {
            expected: game.num_states(),
            got: f.len(),
        });
    }
    Ok(())
}

pub fn shapley_step(game: &Game, lambda: f64, f: &[f64]) -> Result<ShapleyStep, SolveError> {
    check_inputs(game, lambda, f)?;
    let mut values = Vec::with_capacity(game.num_states());
    let mut xs = Vec::with_capacity(game.num_states());
    let mut ys = Vec::with_capacity(game.num_states());
    for s in 0..game.num_states() {
        let sol = solve_matrix_game(&auxiliary_matrix(game, lambda, f, s))?;
        values.push(sol.value);
        xs.push(sol.row_strategy);
        ys.push(sol.col_strategy);
    }
    Ok(ShapleyStep {
        values,
        x: StationaryStrategy::from_weights(xs),
        y: StationaryStrategy::from_weights(ys),
    })
}

/// `Φ(λ, f)`.
pub fn apply_shapley(game: &Game, lambda: f64, f: &[f64]) -> Result<Vec<f64>, SolveError> {
    check_inputs(game, lambda, f)?;
    (0..game.num_states())
        .map(|s| Ok(solve_matrix_game(&auxiliary_matrix(game, lambda, f, s))?.value))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscountedSolution {
    pub lambda: f64,
    pub values: Vec<f64>,
    pub x_opt: StationaryStrategy,
    pub y_opt: StationaryStrategy,
    /// `‖Φ(λ, v) − v‖∞` at the returned values.
    pub residual: f64,
    pub iterations: usize,
    pub method: SolveMethod,
}

#[derive(Debug, Clone, Default)]
pub struct SolverOptions {
    pub method: SolveMethod,
    /// Value-iteration start (defaults to zero).
    pub initial_values: Option<Vec<f64>>,
    /// Strategy-iteration start: its guarantee replaces the zero start.
    pub initial_strategy: Option<StationaryStrategy>,
    pub max_iterations: Option<usize>,
}

/// `v_λ` with optimal stationary strategies, to fixed-point distance `tol`.
pub fn discounted_value(game: &Game, lambda: f64, tol: f64) -> Result<DiscountedSolution, SolveError> {
    discounted_value_with(game, lambda, tol, &SolverOptions::default())
}

pub fn discounted_value_with(
    game: &Game,
    lambda: f64,
    tol: f64,
    options: &SolverOptions,
) -> Result<DiscountedSolution, SolveError> {
    if !valid_discount(lambda) {
        return Err(SolveError::InvalidDiscount(lambda));
    }
    if !(tol > 0.0) {
        return Err(SolveError::InvalidTolerance(tol));
    }
    match options.method {
        SolveMethod::ValueIteration => value_iteration(game, lambda, tol, options),
        SolveMethod::StrategyIteration => strategy_iteration(game, lambda, tol, options),
    }
}

/// `⌈log(tol·λ) / log(1−λ)⌉` plus a fixed margin.
pub fn value_iteration_cap(lambda: f64, tol: f64) -> usize {
    const MARGIN: usize = 100;
    if lambda >= 1.0 {
        return 1 + MARGIN;
    }
    let k = ((tol * lambda).ln() / (1.0 - lambda).ln()).ceil();
    if k.is_finite() && k > 0.0 {
        (k as usize).saturating_add(MARGIN)
    } else {
        MARGIN
    }
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn finish(
    game: &Game,
    lambda: f64,
    values: Vec<f64>,
    iterations: usize,
    method: SolveMethod,
) -> Result<DiscountedSolution, SolveError> {
    let step = shapley_step(game, lambda, &values)?;
    let residual = sup_distance(&step.values, &values);
    Ok(DiscountedSolution {
        lambda,
        values,
        x_opt: step.x,
        y_opt: step.y,
        residual,
        iterations,
        method,
    })
}

fn value_iteration(
    game: &Game,
    lambda: f64,
    tol: f64,
    options: &SolverOptions,
) -> Result<DiscountedSolution, SolveError> {
    let n = game.num_states();
    let mut v = match &options.initial_values {
        Some(v0) => {
            check_inputs(game, lambda, v0)?;
            v0.clone()
        }
        None => vec![0.0; n],
    };
    let cap = options
        .max_iterations
        .unwrap_or_else(|| value_iteration_cap(lambda, tol));
    // iterate gap ≤ tol·λ/(1−λ) bounds the distance to v_λ by tol
    let stop = if lambda >= 1.0 {
        f64::INFINITY
    } else {
        tol * lambda / (1.0 - lambda)
    };
    let mut gap = f64::INFINITY;
    for k in 1..=cap {
        let next = apply_shapley(game, lambda, &v)?;
        gap = sup_distance(&next, &v);
        v = next;
        if gap <= stop {
            return finish(game, lambda, v, k, SolveMethod::ValueIteration);
        }
    }
    Err(SolveError::NotConverged {
        method: SolveMethod::ValueIteration,
        lambda,
        iterations: cap,
        residual: gap,
    })
}

fn strategy_iteration(
    game: &Game,
    lambda: f64,
    tol: f64,
    options: &SolverOptions,
) -> Result<DiscountedSolution, SolveError> {
    let n = game.num_states();
    let mut v = match &options.initial_strategy {
        Some(x) => best_reply_p2(game, x, lambda)?.values,
        None => vec![0.0; n],
    };
    let cap = options
        .max_iterations
        .unwrap_or_else(|| value_iteration_cap(lambda, tol).min(10_000));
    let mut residual = f64::INFINITY;
    for k in 0..cap {
        let step = shapley_step(game, lambda, &v)?;
        residual = sup_distance(&step.values, &v);
        // ‖Φ(v) − v‖ ≤ tol·λ bounds the distance to v_λ by tol
        if residual <= tol * lambda {
            return Ok(DiscountedSolution {
                lambda,
                values: v,
                x_opt: step.x,
                y_opt: step.y,
                residual,
                iterations: k,
                method: SolveMethod::StrategyIteration,
            });
        }
        let w = best_reply_p2(game, &step.x, lambda)?.values;
        let progress = w
            .iter()
            .zip(&v)
            .map(|(a, b)| a - b)
            .fold(f64::NEG_INFINITY, f64::max);
        if progress <= 8.0 * f64::EPSILON {
            // guarantees stopped improving: rounding floor reached
            if residual <= tol {
                return Ok(DiscountedSolution {
                    lambda,
                    values: v,
                    x_opt: step.x,
                    y_opt: step.y,
                    residual,
                    iterations: k,
                    method: SolveMethod::StrategyIteration,
                });
            }
            break;
        }
        // guarantees increase monotonically; keep the componentwise max
        v = w.iter().zip(&v).map(|(a, b)| a.max(*b)).collect();
    }
    Err(SolveError::NotConverged {
        method: SolveMethod::StrategyIteration,
        lambda,
        iterations: cap,
        residual,
    })
}
