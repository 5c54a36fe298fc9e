//! Discount sweeps, the small-discount limit of the value, asymptotically
//! optimal canonical strategies fitted from optimal-strategy families, and
//! certificates of their quality.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::{fit_with, CanonicalError, CanonicalStrategy, FitReport, RESIDUAL_CAP};
use crate::game::{Game, Player, PurePolicy, StationaryStrategy};
use crate::monomials::{
    enumerate_auto, estimate_l, FitConfig, LimitVector, MonomialError, PairLayout, DEFAULT_ENUMERATION_CAP,
};
use crate::shapley::{discounted_value_with, DiscountedSolution, SolveError, SolveMethod, SolverOptions};
use crate::stationary::{best_reply_p2, evaluate, EvalError};

/// Minimum number of sweep rows for [`estimate_limit`].
pub const MIN_SWEEP_ROWS: usize = 6;
pub const DEFAULT_OSCILLATION_THRESHOLD: f64 = 1e-4;
/// Pure-policy count above which the behavioral certificate refuses to run.
pub const MAX_BEHAVIORAL_POLICIES: u128 = 4096;

#[derive(Debug, Error)]
pub enum LimitError {
    #[error("discount grid is empty")]
    EmptyGrid,
    #[error("grid entry {index} = {value} is outside (0, 1]")]
    GridRange { index: usize, value: f64 },
    #[error("grid is not strictly decreasing at entry {0}")]
    GridOrder(usize),
    #[error("geometric grid needs start in (0, 1], ratio in (0, 1) and count >= 1")]
    GridSpec,
    #[error("solver failed at lambda = {lambda}: {source}")]
    Solve {
        lambda: f64,
        #[source]
        source: SolveError,
    },
    #[error("evaluation failed at lambda = {lambda}: {source}")]
    Eval {
        lambda: f64,
        #[source]
        source: EvalError,
    },
    #[error("sweep has {got} rows, at least {min} required")]
    TooFewRows { got: usize, min: usize },
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("v_star has {got} entries, game has {expected} states")]
    Dimension { expected: usize, got: usize },
    #[error("{count} limits stay undetermined after {rounds} rounds, e.g. {examples}")]
    Undetermined {
        count: usize,
        rounds: usize,
        examples: String,
    },
    #[error("player 2 has {0} pure policies, above the behavioral-certificate limit")]
    TooManyPolicies(u128),
    #[error("thread pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Monomial(#[from] MonomialError),
    #[error(transparent)]
    Canonical(#[from] CanonicalError),
}

fn check_grid(grid: &[f64]) -> Result<(), LimitError> {
    if grid.is_empty() {
        return Err(LimitError::EmptyGrid);
    }
    for (k, &v) in grid.iter().enumerate() {
        if !(v > 0.0 && v <= 1.0) {
            return Err(LimitError::GridRange { index: k, value: v });
        }
        if k > 0 && v >= grid[k - 1] {
            return Err(LimitError::GridOrder(k));
        }
    }
    Ok(())
}

/// `λ_k = 2^{−k}` for `k = first..=last`.
pub fn dyadic_grid(first: i32, last: i32) -> Vec<f64> {
    (first..=last).map(|k| 2f64.powi(-k)).collect()
}

/// `2^{−1}, …, 2^{−24}`.
pub fn default_grid() -> Vec<f64> {
    dyadic_grid(1, 24)
}

/// `start · ratio^k` for `k = 0..count`.
pub fn geometric_grid(start: f64, ratio: f64, count: usize) -> Result<Vec<f64>, LimitError> {
    if !(start > 0.0 && start <= 1.0 && ratio > 0.0 && ratio < 1.0 && count >= 1) {
        return Err(LimitError::GridSpec);
    }
    Ok((0..count).map(|k| start * ratio.powi(k as i32)).collect())
}

fn run_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, LimitError> {
    match jobs {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| LimitError::ThreadPool(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    pub tol: f64,
    pub method: SolveMethod,
    /// Bound on concurrent solves; `None` uses the global pool.
    pub jobs: Option<usize>,
    /// Start each solve from the previous row's strategy (sequential).
    pub warm_start: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            method: SolveMethod::default(),
            jobs: None,
            warm_start: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub state_names: Vec<String>,
    pub tol: f64,
    /// One solution per grid point, `λ` strictly decreasing.
    pub rows: Vec<DiscountedSolution>,
}

impl SweepTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Sub-table of the given rows (kept in order).
    pub fn select(&self, rows: &[usize]) -> SweepTable {
        SweepTable {
            state_names: self.state_names.clone(),
            tol: self.tol,
            rows: rows.iter().map(|&k| self.rows[k].clone()).collect(),
        }
    }

    /// `lambda,residual,v_<state>...`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda,residual");
        for name in &self.state_names {
            let _ = write!(out, ",v_{}", csv_name(name));
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{:.16e},{:.16e}", row.lambda, row.residual);
            for v in &row.values {
                let _ = write!(out, ",{v:.16e}");
            }
            out.push('\n');
        }
        out
    }

    /// Samples `(λ_n, x_n)` of player 1's optimal strategies.
    pub fn strategy_samples(&self) -> Vec<(f64, StationaryStrategy)> {
        self.rows.iter().map(|r| (r.lambda, r.x_opt.clone())).collect()
    }
}

fn csv_name(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' })
        .collect()
}

/// Solves every grid point independently.
pub fn sweep(game: &Game, grid: &[f64], tol: f64) -> Result<SweepTable, LimitError> {
    sweep_with(
        game,
        grid,
        &SweepOptions {
            tol,
            ..Default::default()
        },
    )
}

pub fn sweep_with(game: &Game, grid: &[f64], options: &SweepOptions) -> Result<SweepTable, LimitError> {
    check_grid(grid)?;
    if !(options.tol > 0.0) {
        return Err(LimitError::NonPositive {
            name: "tolerance",
            value: options.tol,
        });
    }
    let solve = |lambda: f64, initial: Option<StationaryStrategy>| {
        let opts = SolverOptions {
            method: options.method,
            initial_strategy: initial,
            ..Default::default()
        };
        discounted_value_with(game, lambda, options.tol, &opts).map_err(|source| LimitError::Solve { lambda, source })
    };
    let rows = if options.warm_start {
        let mut rows: Vec<DiscountedSolution> = Vec::with_capacity(grid.len());
        for &lambda in grid {
            let initial = rows.last().map(|r| r.x_opt.clone());
            rows.push(solve(lambda, initial)?);
        }
        rows
    } else {
        run_pool(options.jobs, || {
            grid.par_iter()
                .map(|&lambda| solve(lambda, None))
                .collect::<Result<Vec<_>, _>>()
        })??
    };
    log::info!("sweep: {} grid points solved", rows.len());
    Ok(SweepTable {
        state_names: game.state_names().to_vec(),
        tol: options.tol,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    pub v_star: Vec<f64>,
    pub tail_oscillation: f64,
    pub converged: bool,
    pub threshold: f64,
    /// Rows forming the trailing third.
    pub tail_rows: usize,
    pub smallest_lambda: f64,
    pub advice: Option<String>,
}

/// Value at the smallest discount, with the largest per-state spread over
/// the trailing third of the rows as the convergence diagnostic.
pub fn estimate_limit(table: &SweepTable, osc_threshold: f64) -> Result<LimitReport, LimitError> {
    if table.len() < MIN_SWEEP_ROWS {
        return Err(LimitError::TooFewRows {
            got: table.len(),
            min: MIN_SWEEP_ROWS,
        });
    }
    if !(osc_threshold > 0.0) {
        return Err(LimitError::NonPositive {
            name: "oscillation threshold",
            value: osc_threshold,
        });
    }
    let n = table.len();
    let tail_rows = (n / 3).max(2);
    let tail = &table.rows[n - tail_rows..];
    let states = table.rows[0].values.len();
    let tail_oscillation = (0..states)
        .map(|s| {
            let (lo, hi) = tail.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                (lo.min(r.values[s]), hi.max(r.values[s]))
            });
            hi - lo
        })
        .fold(0.0, f64::max);
    let last = table.rows.last().unwrap();
    let converged = tail_oscillation <= osc_threshold;
    let advice = (!converged).then(|| {
        format!(
            "tail oscillation {tail_oscillation:.3e} exceeds {osc_threshold:.1e}; \
             extend the grid below lambda = {:.3e}",
            last.lambda
        )
    });
    Ok(LimitReport {
        v_star: last.values.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        tail_oscillation,
        converged,
        threshold: osc_threshold,
        tail_rows,
        smallest_lambda: last.lambda,
        advice,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticFit {
    pub fit: FitReport,
    pub limits: LimitVector,
    /// Sweep rows the limit vector was estimated from.
    pub rows_used: Vec<usize>,
    /// 0 for the full sweep, 1 and 2 for the even and odd subsequences.
    pub round: usize,
}

impl AsymptoticFit {
    pub fn strategy(&self) -> &CanonicalStrategy {
        &self.fit.strategy
    }
}

/// Estimates the limit vector of player 1's optimal strategies along the
/// sweep and fits a canonical strategy to it. Undetermined limits trigger a
/// retry on the even rows, then on the odd rows.
pub fn fit_asymptotic_strategy(
    game: &Game,
    table: &SweepTable,
    config: &FitConfig,
) -> Result<AsymptoticFit, LimitError> {
    fit_asymptotic_strategy_with(game, table, config, RESIDUAL_CAP)
}

/// [`fit_asymptotic_strategy`] with an explicit cap on the coefficient
/// least-squares residual.
pub fn fit_asymptotic_strategy_with(
    game: &Game,
    table: &SweepTable,
    config: &FitConfig,
    residual_cap: f64,
) -> Result<AsymptoticFit, LimitError> {
    config.validate()?;
    if !(residual_cap > 0.0) {
        return Err(LimitError::NonPositive {
            name: "residual_cap",
            value: residual_cap,
        });
    }
    let layout = PairLayout::for_game(game);
    let indices = enumerate_auto(&layout, DEFAULT_ENUMERATION_CAP)?;
    let n = table.len();
    let rounds: [Vec<usize>; 3] = [
        (0..n).collect(),
        (0..n).step_by(2).collect(),
        (1..n).step_by(2).collect(),
    ];
    let mut last_undetermined = (0, String::new());
    for (round, rows) in rounds.iter().enumerate() {
        let samples = table.select(rows).strategy_samples();
        let limits = match estimate_l(&samples, &layout, &indices, config) {
            Ok(l) => l,
            // subsequences may fall below the sample floor
            Err(e @ MonomialError::TooFewSamples { .. }) | Err(e @ MonomialError::Span { .. }) if round > 0 => {
                log::info!("round {round}: {e}");
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let undetermined: Vec<_> = limits.undetermined().collect();
        if undetermined.is_empty() {
            let fit = fit_with(&limits, &layout, residual_cap)?;
            return Ok(AsymptoticFit {
                fit,
                limits,
                rows_used: rows.clone(),
                round,
            });
        }
        let examples = undetermined
            .iter()
            .take(3)
            .map(|e| e.index.to_string())
            .collect::<Vec<_>>()
            .join(", ");
        log::info!("round {round}: {} undetermined limits", undetermined.len());
        last_undetermined = (undetermined.len(), examples);
    }
    Err(LimitError::Undetermined {
        count: last_undetermined.0,
        rounds: rounds.len(),
        examples: last_undetermined.1,
    })
}

/// Player 1 plays `policy` with coefficient one; every other action gets
/// coefficient one and exponent `exponent`.
pub fn pure_canonical(game: &Game, policy: &PurePolicy, exponent: f64) -> Result<CanonicalStrategy, LimitError> {
    let layout = PairLayout::for_game(game);
    let mut c = vec![1.0; layout.num_pairs()];
    let mut e = vec![exponent; layout.num_pairs()];
    for s in 0..layout.num_states() {
        let k = layout.pair(s, policy.action(s));
        c[k] = 1.0;
        e[k] = 0.0;
    }
    Ok(CanonicalStrategy::new(layout, c, e)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub lambda: f64,
    /// `w = min_y γ_λ(x_λ, y)`.
    pub guarantee: Vec<f64>,
    /// `w − v_star` per state.
    pub margins: Vec<f64>,
    pub worst_margin: f64,
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalityCertificate {
    pub epsilon: f64,
    pub v_star: Vec<f64>,
    pub state_names: Vec<String>,
    pub rows: Vec<CheckRow>,
    /// Largest grid `λ` from which every smaller grid point passes.
    pub lambda0: Option<f64>,
    pub worst_margin: f64,
}

impl OptimalityCertificate {
    pub fn passed(&self) -> bool {
        self.lambda0.is_some()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificates serialize")
    }

    /// `lambda,w_<state>...,margin_<state>...,passes`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda");
        for name in &self.state_names {
            let _ = write!(out, ",w_{}", csv_name(name));
        }
        for name in &self.state_names {
            let _ = write!(out, ",margin_{}", csv_name(name));
        }
        out.push_str(",passes\n");
        for row in &self.rows {
            let _ = write!(out, "{:.16e}", row.lambda);
            for v in row.guarantee.iter().chain(&row.margins) {
                let _ = write!(out, ",{v:.16e}");
            }
            let _ = writeln!(out, ",{}", row.passes);
        }
        out
    }
}

/// Checks `min_y γ_λ(ω, x_λ, y) ≥ v_star(ω) − ε` on every grid point.
pub fn check_asymptotic_optimality(
    game: &Game,
    xc: &CanonicalStrategy,
    v_star: &[f64],
    epsilon: f64,
    grid: &[f64],
    jobs: Option<usize>,
) -> Result<OptimalityCertificate, LimitError> {
    if !(epsilon > 0.0) {
        return Err(LimitError::NonPositive {
            name: "epsilon",
            value: epsilon,
        });
    }
    check_grid(grid)?;
    if v_star.len() != game.num_states() {
        return Err(LimitError::Dimension {
            expected: game.num_states(),
            got: v_star.len(),
        });
    }
    if xc.layout().counts() != game.p1_action_counts().as_slice() {
        return Err(CanonicalError::Shape("canonical strategy does not match the game".into()).into());
    }
    let rows = run_pool(jobs, || {
        grid.par_iter()
            .map(|&lambda| {
                let x = xc.instantiate(lambda);
                let br = best_reply_p2(game, &x, lambda).map_err(|source| LimitError::Eval { lambda, source })?;
                let margins: Vec<f64> = br.values.iter().zip(v_star).map(|(w, v)| w - v).collect();
                let worst_margin = margins.iter().cloned().fold(f64::INFINITY, f64::min);
                Ok(CheckRow {
                    lambda,
                    guarantee: br.values,
                    margins,
                    worst_margin,
                    passes: worst_margin >= -epsilon,
                })
            })
            .collect::<Result<Vec<_>, LimitError>>()
    })??;
    let passing_suffix = rows.iter().rev().take_while(|r| r.passes).count();
    let lambda0 = (passing_suffix > 0).then(|| rows[rows.len() - passing_suffix].lambda);
    let worst_margin = rows.iter().map(|r| r.worst_margin).fold(f64::INFINITY, f64::min);
    Ok(OptimalityCertificate {
        epsilon,
        v_star: v_star.to_vec(),
        state_names: game.state_names().to_vec(),
        rows,
        lambda0,
        worst_margin,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyLimits {
    pub policy: PurePolicy,
    /// Payoff at the smallest `λ` of each sequence, per state.
    pub limits: Vec<Vec<f64>>,
    /// Largest spread across sequences over states.
    pub spread: f64,
    /// `min_ω (limit(ω) − v_star(ω))` over the sequences.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehavioralCertificate {
    pub tolerance: f64,
    pub policies: Vec<PolicyLimits>,
    pub max_spread: f64,
    pub worst_margin: f64,
    /// Every pure reply's payoff limit is the same along all sequences.
    pub sequences_agree: bool,
    /// Every pure reply's payoff limit is at least `v_star − tolerance`.
    pub dominates_limit: bool,
}

/// The three standard vanishing sequences: dyadic, ×1/3 geometric, and
/// sorted random log-uniform draws, all reaching below `1e-7`.
pub fn standard_sequences(seed: u64) -> Vec<Vec<f64>> {
    use rand::{RngExt, SeedableRng};
    let dyadic = dyadic_grid(6, 24);
    let triadic: Vec<f64> = (4..=15).map(|k| 3f64.powi(-k)).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut random: Vec<f64> = (0..15)
        .map(|_| 10f64.powf(-rng.random_range(2.0..7.5)))
        .collect();
    random.push(1e-8);
    random.sort_by(|a, b| b.total_cmp(a));
    random.dedup();
    vec![dyadic, triadic, random]
}

/// Payoffs `γ_λ(ω, x_λ, j)` of every pure stationary reply `j` along each
/// sequence; the limits should not depend on the sequence.
pub fn behavioral_certificate(
    game: &Game,
    xc: &CanonicalStrategy,
    v_star: &[f64],
    sequences: &[Vec<f64>],
    tolerance: f64,
) -> Result<BehavioralCertificate, LimitError> {
    if !(tolerance > 0.0) {
        return Err(LimitError::NonPositive {
            name: "tolerance",
            value: tolerance,
        });
    }
    for seq in sequences {
        check_grid(seq)?;
    }
    let count = game.pure_policy_count(Player::Two);
    if count > MAX_BEHAVIORAL_POLICIES {
        return Err(LimitError::TooManyPolicies(count));
    }
    let counts = game.p2_action_counts();
    let policies = PurePolicy::enumerate(&counts);
    let limits: Vec<PolicyLimits> = policies
        .par_iter()
        .map(|policy| {
            let y = StationaryStrategy::pure(policy, &counts);
            let limits = sequences
                .iter()
                .map(|seq| {
                    let lambda = *seq.last().unwrap();
                    evaluate(game, &xc.instantiate(lambda), &y, lambda)
                        .map_err(|source| LimitError::Eval { lambda, source })
                })
                .collect::<Result<Vec<_>, _>>()?;
            let spread = (0..game.num_states())
                .map(|s| {
                    let (lo, hi) = limits
                        .iter()
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v[s]), hi.max(v[s])));
                    hi - lo
                })
                .fold(0.0, f64::max);
            let margin = limits
                .iter()
                .flat_map(|v| v.iter().zip(v_star).map(|(a, b)| a - b))
                .fold(f64::INFINITY, f64::min);
            Ok(PolicyLimits {
                policy: policy.clone(),
                limits,
                spread,
                margin,
            })
        })
        .collect::<Result<Vec<_>, LimitError>>()?;
    let max_spread = limits.iter().map(|p| p.spread).fold(0.0, f64::max);
    let worst_margin = limits.iter().map(|p| p.margin).fold(f64::INFINITY, f64::min);
    Ok(BehavioralCertificate {
        tolerance,
        sequences_agree: max_spread <= tolerance,
        dominates_limit: worst_margin >= -tolerance,
        policies: limits,
        max_spread,
        worst_margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix_game::{solve_matrix_game, MatrixGame};

    fn single_state_game() -> (Game, f64, Vec<f64>) {
        let m = vec![vec![0.8, 0.2], vec![0.3, 0.6]];
        let sol = solve_matrix_game(&MatrixGame::new(m.clone()).unwrap()).unwrap();
        let t = vec![vec![vec![1.0]; 2]; 2];
        (Game::new(vec![m], vec![t]).unwrap(), sol.value, sol.row_strategy)
    }

    #[test]
    fn grids() {
        let g = default_grid();
        assert_eq!(g.len(), 24);
        assert_eq!(g[0], 0.5);
        assert_eq!(geometric_grid(0.5, 0.5, 3).unwrap(), vec![0.5, 0.25, 0.125]);
        assert!(geometric_grid(0.5, 1.0, 3).is_err());
        assert!(matches!(check_grid(&[0.5, 0.5]), Err(LimitError::GridOrder(1))));
        assert!(matches!(check_grid(&[1.5]), Err(LimitError::GridRange { .. })));
    }

    #[test]
    fn single_state_sweep_and_fit() {
        let (g, value, x) = single_state_game();
        let table = sweep(&g, &default_grid(), 1e-10).unwrap();
        assert!(table.rows.iter().all(|r| (r.values[0] - value).abs() < 1e-9));
        let report = estimate_limit(&table, DEFAULT_OSCILLATION_THRESHOLD).unwrap();
        assert!(report.converged);
        let fit = fit_asymptotic_strategy(&g, &table, &FitConfig::default()).unwrap();
        let xc = fit.strategy();
        assert_eq!(xc.exponents(), &[0.0, 0.0]);
        for (a, b) in xc.coefficients().iter().zip(&x) {
            assert!((a - b).abs() < 1e-6);
        }
        let cert =
            check_asymptotic_optimality(&g, xc, &report.v_star, 1e-6, &dyadic_grid(1, 10), Some(2)).unwrap();
        assert_eq!(cert.lambda0, Some(0.5));
    }

    #[test]
    fn too_few_rows() {
        let (g, _, _) = single_state_game();
        let table = sweep(&g, &[0.5, 0.25], 1e-10).unwrap();
        assert!(matches!(
            estimate_limit(&table, 1e-4),
            Err(LimitError::TooFewRows { got: 2, min: 6 })
        ));
    }

    #[test]
    fn constant_table_has_zero_oscillation() {
        let g = Game::new(vec![vec![vec![1.0]]], vec![vec![vec![vec![1.0]]]]).unwrap();
        let table = sweep(&g, &default_grid(), 1e-9).unwrap();
        let r = estimate_limit(&table, 1e-4).unwrap();
        assert_eq!(r.tail_oscillation, 0.0);
        assert_eq!(r.v_star, vec![1.0]);
        let csv = table.to_csv();
        assert!(csv.starts_with("lambda,residual,v_"));
        assert_eq!(csv.lines().count(), 25);
    }

    #[test]
    fn sweep_is_order_deterministic() {
        let g = Game::random(3, 2, 2, 4).unwrap();
        let grid = dyadic_grid(1, 8);
        let a = sweep_with(&g, &grid, &SweepOptions { jobs: Some(1), ..Default::default() }).unwrap();
        let b = sweep_with(&g, &grid, &SweepOptions { jobs: Some(4), ..Default::default() }).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        let warm = sweep_with(&g, &grid, &SweepOptions { warm_start: true, ..Default::default() }).unwrap();
        for (x, y) in a.rows.iter().zip(&warm.rows) {
            for (u, v) in x.values.iter().zip(&y.values) {
                assert!((u - v).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn dominant_action_gives_pure_profile() {
        // action 0 dominates in both states
        let payoff = vec![
            vec![vec![0.9, 0.7], vec![0.2, 0.1]],
            vec![vec![0.6, 0.8], vec![0.0, 0.3]],
        ];
        let t = vec![
            vec![vec![vec![0.5, 0.5], vec![0.1, 0.9]], vec![vec![0.5, 0.5], vec![0.1, 0.9]]],
            vec![vec![vec![0.3, 0.7], vec![1.0, 0.0]], vec![vec![0.3, 0.7], vec![1.0, 0.0]]],
        ];
        let g = Game::new(payoff, t).unwrap();
        let table = sweep(&g, &default_grid(), 1e-10).unwrap();
        let fit = fit_asymptotic_strategy(&g, &table, &FitConfig::default()).unwrap();
        let xc = fit.strategy();
        for s in 0..2 {
            assert_eq!(xc.e(s, 0), 0.0);
            assert!((xc.c(s, 0) - 1.0).abs() < 1e-12);
            assert!(xc.e(s, 1) > 0.0);
        }
    }

    #[test]
    fn pure_top_is_not_asymptotically_optimal() {
        let g = Game::big_match();
        let top = pure_canonical(&g, &PurePolicy::new(vec![0, 0, 0], &[2, 1, 1]).unwrap(), 20.0).unwrap();
        let cert = check_asymptotic_optimality(&g, &top, &[0.5, 1.0, 0.0], 0.05, &dyadic_grid(1, 20), None).unwrap();
        assert_eq!(cert.lambda0, None);
        assert!(cert.worst_margin <= -0.4);
        assert!(cert.to_csv().lines().next().unwrap().starts_with("lambda,w_"));
    }

    #[test]
    fn bad_inputs() {
        let g = Game::big_match();
        let xc = pure_canonical(&g, &PurePolicy::new(vec![0, 0, 0], &[2, 1, 1]).unwrap(), 1.0).unwrap();
        assert!(matches!(
            check_asymptotic_optimality(&g, &xc, &[0.5, 1.0, 0.0], 0.0, &[0.5], None),
            Err(LimitError::NonPositive { .. })
        ));
        assert!(matches!(
            check_asymptotic_optimality(&g, &xc, &[0.5], 0.1, &[0.5], None),
            Err(LimitError::Dimension { .. })
        ));
        assert!(matches!(sweep(&g, &[0.5, 0.7], 1e-9), Err(LimitError::GridOrder(1))));
    }
}
