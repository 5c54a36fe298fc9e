//! One-shot zero-sum matrix games (`val` of the Shapley operator).

use thiserror::Error;

use crate::numerics::{lp_solve, LinearProgram, LpError, LpOutcome, Relation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatrixGameError {
    #[error("matrix game must be nonempty")]
    Empty,
    #[error("row {row} has {got} entries, expected {expected}")]
    Ragged {
        row: usize,
        expected: usize,
        got: usize,
    },
    #[error("entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("linear program failed: {0}")]
    Lp(#[from] LpError),
    #[error("linear program for the {0} player did not reach an optimum")]
    NotOptimal(&'static str),
}

/// Payoff matrix; the row player maximizes.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGame {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl MatrixGame {
    pub fn new(matrix: Vec<Vec<f64>>) -> Result<Self, MatrixGameError> {
        let rows = matrix.len();
        let cols = matrix.first().map_or(0, |r| r.len());
        if rows == 0 || cols == 0 {
            return Err(MatrixGameError::Empty);
        }
        let mut entries = Vec::with_capacity(rows * cols);
        for (r, row) in matrix.iter().enumerate() {
            if row.len() != cols {
                return Err(MatrixGameError::Ragged {
                    row: r,
                    expected: cols,
                    got: row.len(),
                });
            }
            for (c, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(MatrixGameError::NonFinite { row: r, col: c });
                }
                entries.push(v);
            }
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.cols + col]
    }

    /// Worst payoff of a row mixture against pure columns.
    pub fn row_floor(&self, x: &[f64]) -> f64 {
        (0..self.cols)
            .map(|c| (0..self.rows).map(|r| x[r] * self.get(r, c)).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    }

    /// Best payoff of a pure row against a column mixture.
    pub fn col_ceiling(&self, y: &[f64]) -> f64 {
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| y[c] * self.get(r, c)).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGameSolution {
    pub value: f64,
    pub row_strategy: Vec<f64>,
    pub col_strategy: Vec<f64>,
    /// Difference between the values of the two LP formulations.
    pub duality_gap: f64,
}

/// Value and optimal mixed strategies by the pair of dual LPs on the
/// positively shifted matrix.
pub fn solve_matrix_game(game: &MatrixGame) -> Result<MatrixGameSolution, MatrixGameError> {
    let (m, n) = (game.rows, game.cols);
    if m == 1 {
        let (col, value) = argbest(n, |c| game.get(0, c), |a, b| a < b);
        return Ok(MatrixGameSolution {
            value,
            row_strategy: vec![1.0],
            col_strategy: unit(n, col),
            duality_gap: 0.0,
        });
    }
    if n == 1 {
        let (row, value) = argbest(m, |r| game.get(r, 0), |a, b| a > b);
        return Ok(MatrixGameSolution {
            value,
            row_strategy: unit(m, row),
            col_strategy: vec![1.0],
            duality_gap: 0.0,
        });
    }

    let min = game.entries.iter().cloned().fold(f64::INFINITY, f64::min);
    let shift = 1.0 - min;
    let shifted = |r: usize, c: usize| game.get(r, c) + shift;

    // row player: min Σu s.t. Σ_i u_i M'_ij ≥ 1, u ≥ 0
    let mut row_lp = LinearProgram::maximize(vec![-1.0; m]).with_lower_bounds(0.0);
    for c in 0..n {
        row_lp.add((0..m).map(|r| shifted(r, c)).collect(), Relation::Ge, 1.0);
    }
    let u = match lp_solve(&row_lp)? {
        LpOutcome::Optimal(s) => s.x,
        _ => return Err(MatrixGameError::NotOptimal("row")),
    };
    // column player: max Σw s.t. Σ_j M'_ij w_j ≤ 1, w ≥ 0
    let mut col_lp = LinearProgram::maximize(vec![1.0; n]).with_lower_bounds(0.0);
    for r in 0..m {
        col_lp.add((0..n).map(|c| shifted(r, c)).collect(), Relation::Le, 1.0);
    }
    let w = match lp_solve(&col_lp)? {
        LpOutcome::Optimal(s) => s.x,
        _ => return Err(MatrixGameError::NotOptimal("column")),
    };

    let (row_strategy, su) = normalize(u);
    let (col_strategy, sw) = normalize(w);
    let value_row = 1.0 / su - shift;
    let value_col = 1.0 / sw - shift;
    Ok(MatrixGameSolution {
        value: value_row,
        row_strategy,
        col_strategy,
        duality_gap: (value_row - value_col).abs(),
    })
}

fn argbest(k: usize, f: impl Fn(usize) -> f64, better: impl Fn(f64, f64) -> bool) -> (usize, f64) {
    let mut best = (0, f(0));
    for a in 1..k {
        let v = f(a);
        if better(v, best.1) {
            best = (a, v);
        }
    }
    best
}

fn unit(k: usize, at: usize) -> Vec<f64> {
    let mut v = vec![0.0; k];
    v[at] = 1.0;
    v
}

fn normalize(v: Vec<f64>) -> (Vec<f64>, f64) {
    let v: Vec<f64> = v.into_iter().map(|p| p.max(0.0)).collect();
    let total: f64 = v.iter().sum();
    (v.iter().map(|p| p / total).collect(), total)
}
