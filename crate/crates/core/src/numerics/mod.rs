//! Dense linear algebra and small linear programs.

mod linalg;
mod lp;

pub use linalg::{least_squares, row_space_basis, solve_linear, Factorization, LinalgError, ResolventFactorization, MAX_CONDITION};
pub use lp::{
    lp_solve, lp_solve_lazy, lp_solve_with, CertificateError, Constraint, FarkasCertificate,
    LinearProgram, LpError, LpOutcome, LpSolution, Relation, SimplexOptions,
};
