//! Dense linear solves and least squares.

use nalgebra::{DMatrix, DVector, LU};
use thiserror::Error;

/// Matrices with a 1-norm condition estimate above this are rejected.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: matrix has {rows} rows, right-hand side has {rhs}")]
    DimensionMismatch { rows: usize, rhs: usize },
    #[error("matrix is singular or ill-conditioned (condition estimate {condition:e})")]
    IllConditioned { condition: f64 },
}

/// An LU factorization with its 1-norm condition number.
#[derive(Debug, Clone)]
pub struct Factorization {
    matrix: DMatrix<f64>,
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    condition: f64,
}

impl Factorization {
    pub fn new(matrix: &DMatrix<f64>) -> Result<Self, LinalgError> {
        let (rows, cols) = matrix.shape();
        if rows != cols {
            return Err(LinalgError::NotSquare { rows, cols });
        }
        let lu = matrix.clone().lu();
        let inverse = lu.try_inverse().ok_or(LinalgError::IllConditioned {
            condition: f64::INFINITY,
        })?;
        let condition = one_norm(matrix) * one_norm(&inverse);
        if !condition.is_finite() || condition > MAX_CONDITION {
            return Err(LinalgError::IllConditioned { condition });
        }
        Ok(Self {
            matrix: matrix.clone(),
            lu,
            condition,
        })
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// Solves `A x = b` with one step of iterative refinement.
    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>, LinalgError> {
        if rhs.len() != self.matrix.nrows() {
            return Err(LinalgError::DimensionMismatch {
                rows: self.matrix.nrows(),
                rhs: rhs.len(),
            });
        }
        let mut x = self.lu.solve(rhs).expect("factorization is nonsingular");
        let residual = rhs - &self.matrix * &x;
        if let Some(dx) = self.lu.solve(&residual) {
            x += dx;
        }
        Ok(x)
    }
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// LU factors of the resolvent `λI + (1−λ)(I − Q)` of a row-stochastic `Q`.
///
/// The resolvent is an M-matrix whose rows sum to `λ`. Elimination tracks the
/// row sums of the active block (`r_i ← r_i + |l_ik| r_k`) and rebuilds each
/// pivot from them, so no step subtracts and the factors keep full relative
/// accuracy however small `λ` is. No pivoting is needed.
#[derive(Debug, Clone)]
pub struct ResolventFactorization {
    // strictly lower part holds the multipliers, the rest holds U
    lu: DMatrix<f64>,
}

impl ResolventFactorization {
    pub fn new(q: &DMatrix<f64>, lambda: f64) -> Result<Self, LinalgError> {
        let (rows, cols) = q.shape();
        if rows != cols {
            return Err(LinalgError::NotSquare { rows, cols });
        }
        let n = rows;
        let mut lu = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    lu[(i, j)] = -(1.0 - lambda) * q[(i, j)].max(0.0);
                }
            }
        }
        let mut sums = vec![lambda; n];
        let pivot = |lu: &DMatrix<f64>, sums: &[f64], k: usize| -> f64 {
            sums[k] - (k + 1..n).map(|j| lu[(k, j)]).sum::<f64>()
        };
        for k in 0..n {
            let ukk = pivot(&lu, &sums, k);
            if !(ukk > 0.0 && ukk.is_finite()) {
                return Err(LinalgError::IllConditioned { condition: f64::INFINITY });
            }
            lu[(k, k)] = ukk;
            for i in k + 1..n {
                let l = lu[(i, k)] / ukk;
                lu[(i, k)] = l;
                if l == 0.0 {
                    continue;
                }
                for j in k + 1..n {
                    if j != i {
                        lu[(i, j)] -= l * lu[(k, j)];
                    }
                }
                sums[i] -= l * sums[k];
            }
        }
        Ok(Self { lu })
    }

    fn check(&self, rhs: &DVector<f64>) -> Result<(), LinalgError> {
        if rhs.len() != self.lu.nrows() {
            return Err(LinalgError::DimensionMismatch {
                rows: self.lu.nrows(),
                rhs: rhs.len(),
            });
        }
        Ok(())
    }

    /// Solves `M x = b`.
    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>, LinalgError> {
        self.check(rhs)?;
        let n = rhs.len();
        let mut x = rhs.clone();
        for i in 0..n {
            let s: f64 = (0..i).map(|k| self.lu[(i, k)] * x[k]).sum();
            x[i] -= s;
        }
        for k in (0..n).rev() {
            let s: f64 = (k + 1..n).map(|j| self.lu[(k, j)] * x[j]).sum();
            x[k] = (x[k] - s) / self.lu[(k, k)];
        }
        Ok(x)
    }

    /// Solves `Mᵀ x = b`, i.e. the row vector `xᵀ` with `xᵀ M = bᵀ`.
    pub fn solve_transpose(&self, rhs: &DVector<f64>) -> Result<DVector<f64>, LinalgError> {
        self.check(rhs)?;
        let n = rhs.len();
        let mut x = rhs.clone();
        for k in 0..n {
            let s: f64 = (0..k).map(|j| self.lu[(j, k)] * x[j]).sum();
            x[k] = (x[k] - s) / self.lu[(k, k)];
        }
        for k in (0..n).rev() {
            let s: f64 = (k + 1..n).map(|j| self.lu[(j, k)] * x[j]).sum();
            x[k] -= s;
        }
        Ok(x)
    }
}

/// Solves the square system `A x = b`.
pub fn solve_linear(matrix: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>, LinalgError> {
    Factorization::new(matrix)?.solve(rhs)
}

/// Minimum-norm minimizer of `‖A x − b‖₂`.
pub fn least_squares(matrix: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>, LinalgError> {
    let (rows, cols) = matrix.shape();
    if rhs.len() != rows {
        return Err(LinalgError::DimensionMismatch { rows, rhs: rhs.len() });
    }
    if cols == 0 {
        return Ok(DVector::zeros(0));
    }
    if rows == 0 {
        return Ok(DVector::zeros(cols));
    }
    // the Gram matrix is small and, for integer matrices, exact
    let gram = gram_matrix(matrix);
    let svd = gram.clone().svd(true, true);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if sigma_max == 0.0 {
        return Ok(DVector::zeros(cols));
    }
    let eps = gram_cutoff(sigma_max, cols);
    let solve = |r: &DVector<f64>| svd.solve(&(matrix.transpose() * r), eps).expect("both singular-vector sets were computed");
    let mut x = solve(rhs);
    for _ in 0..2 {
        let residual = rhs - matrix * &x;
        x += solve(&residual);
    }
    Ok(x)
}

fn gram_matrix(matrix: &DMatrix<f64>) -> DMatrix<f64> {
    matrix.transpose() * matrix
}

fn gram_cutoff(sigma_max: f64, cols: usize) -> f64 {
    // singular values of the Gram matrix are squares, so the cutoff is squared too
    sigma_max * (cols as f64) * f64::EPSILON * 1e3
}

/// Orthonormal basis (as columns) of the row space of `matrix`.
pub fn row_space_basis(matrix: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, cols) = matrix.shape();
    if rows == 0 || cols == 0 {
        return DMatrix::zeros(cols, 0);
    }
    let svd = gram_matrix(matrix).svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = gram_cutoff(sigma_max, cols);
    let keep: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > eps && s > 0.0)
        .map(|(k, _)| k)
        .collect();
    let mut basis = DMatrix::zeros(cols, keep.len());
    for (c, &k) in keep.iter().enumerate() {
        for j in 0..cols {
            basis[(j, c)] = v_t[(k, j)];
        }
    }
    basis
}
