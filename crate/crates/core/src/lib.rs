//! Discounted values, their small-discount limits, and asymptotically
//! optimal stationary strategies for finite zero-sum stochastic games.
//!
//! Typical pipeline: [`sweep`] a game over a vanishing discount grid,
//! [`estimate_limit`] of the values, [`fit_asymptotic_strategy`] to the
//! optimal-strategy family, then [`check_asymptotic_optimality`].

pub mod canonical;
pub mod game;
pub mod limit_value;
pub mod matrix_game;
pub mod monomials;
pub mod numerics;
pub mod shapley;
pub mod stationary;

pub use canonical::{
    fit, fit_coefficients, fit_exponents, rationalize, CanonicalError, CanonicalStrategy, CoefficientFit,
    ExponentCertificate, ExponentOutcome, FitReport,
};
pub use game::{Game, GameError, GameFile, PayoffTransform, Player, PurePolicy, StationaryStrategy, StrategyError};
pub use limit_value::{
    behavioral_certificate, check_asymptotic_optimality, default_grid, dyadic_grid, estimate_limit,
    fit_asymptotic_strategy, fit_asymptotic_strategy_with, geometric_grid, pure_canonical, standard_sequences, sweep, sweep_with, AsymptoticFit,
    BehavioralCertificate, LimitError, LimitReport, OptimalityCertificate, SweepOptions, SweepTable,
};
pub use matrix_game::{solve_matrix_game, MatrixGame, MatrixGameError, MatrixGameSolution};
pub use monomials::{
    check_properties, enumerate_m, enumerate_restricted, estimate_l, eval_monomial, FitConfig, LimitClass,
    LimitVector, MonomialError, MonomialIndex, PairLayout, Violation,
};
pub use shapley::{
    apply_shapley, discounted_value, discounted_value_with, shapley_step, DiscountedSolution, SolveError, SolveMethod,
    SolverOptions,
};
pub use stationary::{
    best_reply_p2, default_horizon, discounted_payoff, evaluate, guarantee_inequality_check, induce_chain, occupation,
    simulate_discounted, BestReply, EvalError, GuaranteeCheck, InducedChain, MonteCarloEstimate, OccupationMatrix,
};
