mod config;

use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use config::RunConfig;
use limitval::{
    behavioral_certificate, best_reply_p2, check_asymptotic_optimality, discounted_value_with, estimate_limit,
    evaluate, fit_asymptotic_strategy_with, guarantee_inequality_check, standard_sequences, sweep_with,
    CanonicalError, CanonicalStrategy, Game, GameError, LimitError, PayoffTransform, Player, SolveError, SolverOptions,
    StationaryStrategy,
};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "limitval", version, about = "Discounted values and vanishing-discount limits of zero-sum stochastic games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration; unset fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Bound on concurrent evaluations.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Clone)]
struct GameArgs {
    #[arg(long)]
    game: PathBuf,
    /// Affinely map payoffs into [0,1] on load; outputs stay in the rescaled units.
    #[arg(long)]
    rescale_payoffs: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Discounted value and optimal stationary strategies at one λ.
    Solve {
        #[command(flatten)]
        game: GameArgs,
        #[arg(long)]
        lambda: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Values over the configured λ grid as CSV, plus a limit report.
    Sweep {
        #[command(flatten)]
        game: GameArgs,
        /// Limit report JSON.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Discounted payoff of a strategy pair.
    Eval {
        #[command(flatten)]
        game: GameArgs,
        #[arg(long)]
        lambda: f64,
        /// Player 1 strategy: stationary rows or a canonical strategy.
        #[arg(long)]
        x: PathBuf,
        /// Player 2 stationary rows.
        #[arg(long)]
        y: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Player 2's best pure stationary reply to a player 1 strategy.
    BestReply {
        #[command(flatten)]
        game: GameArgs,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        x: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Fits a canonical strategy to the optimal strategies along the sweep.
    Fit {
        #[command(flatten)]
        game: GameArgs,
        /// Fit diagnostics JSON.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Asymptotic optimality certificate of a canonical strategy.
    Check {
        #[command(flatten)]
        game: GameArgs,
        #[arg(long)]
        canonical: PathBuf,
        #[arg(long)]
        epsilon: Option<f64>,
        /// Limit values as a comma-separated list; estimated from a sweep when absent.
        #[arg(long, value_delimiter = ',')]
        v_star: Option<Vec<f64>>,
        /// Per-row CSV of the certificate.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Also compute the behavioral certificate and write it here.
        #[arg(long)]
        behavioral: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Emits a seeded random game file.
    Random {
        #[arg(long)]
        states: usize,
        #[arg(long)]
        p1_actions: usize,
        #[arg(long)]
        p2_actions: usize,
        #[command(flatten)]
        common: Common,
    },
}

enum CliError {
    Validation(String),
    Solver(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Solver(_) => 2,
        }
    }
}

fn invalid(e: impl Display) -> CliError {
    CliError::Validation(e.to_string())
}

fn failed(e: impl Display) -> CliError {
    CliError::Solver(e.to_string())
}

fn from_limit(e: LimitError) -> CliError {
    match e {
        LimitError::EmptyGrid
        | LimitError::GridRange { .. }
        | LimitError::GridOrder(..)
        | LimitError::GridSpec
        | LimitError::NonPositive { .. }
        | LimitError::Dimension { .. }
        | LimitError::TooFewRows { .. }
        | LimitError::TooManyPolicies(..) => invalid(e),
        LimitError::Canonical(CanonicalError::Shape(_)) => invalid(e),
        other => failed(other),
    }
}

fn from_solve(e: SolveError) -> CliError {
    match e {
        SolveError::InvalidDiscount(_) | SolveError::InvalidTolerance(_) | SolveError::Dimension { .. } => invalid(e),
        other => failed(other),
    }
}

type CliResult<T> = Result<T, CliError>;

fn load_config(common: &Common) -> CliResult<RunConfig> {
    let mut config = match &common.config {
        Some(path) => RunConfig::load(path).map_err(invalid)?,
        None => RunConfig::default(),
    };
    if common.jobs.is_some() {
        config.jobs = common.jobs;
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if common.out.is_some() {
        config.output.out = common.out.clone();
    }
    config.validate().map_err(invalid)?;
    Ok(config)
}

fn load_game(args: &GameArgs) -> CliResult<(Game, PayoffTransform)> {
    let text = std::fs::read_to_string(&args.game).map_err(|e| invalid(format!("{}: {e}", args.game.display())))?;
    Game::from_json_with(&text, args.rescale_payoffs).map_err(|e: GameError| invalid(format!("{}: {e}", args.game.display())))
}

fn check_lambda(lambda: f64) -> CliResult<()> {
    if lambda > 0.0 && lambda <= 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("lambda must lie in (0, 1] (got {lambda})")))
    }
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn load_stationary(path: &Path, game: &Game, player: Player) -> CliResult<StationaryStrategy> {
    let rows: Vec<Vec<f64>> =
        serde_json::from_str(&read(path)?).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let s = StationaryStrategy::new(rows).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    s.check_shape(game, player).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    Ok(s)
}

fn load_canonical(path: &Path, game: &Game) -> CliResult<CanonicalStrategy> {
    let xc = CanonicalStrategy::from_json(&read(path)?).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    if xc.layout().counts() != game.p1_action_counts().as_slice() {
        return Err(invalid(format!(
            "{}: action counts {:?} do not match the game's {:?}",
            path.display(),
            xc.layout().counts(),
            game.p1_action_counts()
        )));
    }
    Ok(xc)
}

/// Stationary rows, or a canonical strategy instantiated at `lambda`.
fn load_player1(path: &Path, game: &Game, lambda: f64) -> CliResult<StationaryStrategy> {
    let text = read(path)?;
    if serde_json::from_str::<Vec<Vec<f64>>>(&text).is_ok() {
        load_stationary(path, game, Player::One)
    } else {
        Ok(load_canonical(path, game)?.instantiate(lambda))
    }
}

/// Writes through a sibling temporary file so a failed run leaves no partial output.
fn write_atomic(path: &Path, contents: &str) -> CliResult<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| invalid(format!("{}: not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = std::fs::File::create(&tmp)
        .and_then(|mut f| f.write_all(contents.as_bytes()).and_then(|_| f.sync_all()))
        .and_then(|_| std::fs::rename(&tmp, path));
    if let Err(e) = result {
        let _ = std::fs::remove_file(&tmp);
        return Err(invalid(format!("{}: {e}", path.display())));
    }
    Ok(())
}

fn emit(path: Option<&Path>, contents: &str) -> CliResult<()> {
    match path {
        Some(p) => write_atomic(p, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn to_json(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("outputs serialize");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct WithTransform<'a, T: Serialize> {
    #[serde(flatten)]
    body: &'a T,
    payoff_transform: PayoffTransform,
}

#[derive(Serialize)]
struct EvalOutput {
    lambda: f64,
    values: Vec<f64>,
}

#[derive(Serialize)]
struct BestReplyOutput<'a> {
    lambda: f64,
    #[serde(flatten)]
    reply: &'a limitval::BestReply,
    /// `min_ω (Φ(λ, w)(ω) − w(ω))`; nonnegative up to rounding.
    guarantee_margin: f64,
}

#[derive(Serialize)]
struct FitDiagnostics<'a> {
    round: usize,
    rows_used: Vec<f64>,
    slack: f64,
    denominator: Option<u32>,
    residual: f64,
    normalized_residual: f64,
    pinned: &'a [bool],
    limits: usize,
    limit: &'a limitval::LimitReport,
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Solve { game, lambda, common } => {
            let config = load_config(&common)?;
            check_lambda(lambda)?;
            let (game, transform) = load_game(&game)?;
            let options = SolverOptions {
                method: config.method,
                ..Default::default()
            };
            let sol = discounted_value_with(&game, lambda, config.tolerance, &options).map_err(from_solve)?;
            emit(
                config.output.out.as_deref(),
                &to_json(&WithTransform {
                    body: &sol,
                    payoff_transform: transform,
                }),
            )
        }
        Command::Sweep { game, report, common } => {
            let config = load_config(&common)?;
            let (game, transform) = load_game(&game)?;
            let grid = config.grid.points().map_err(invalid)?;
            let table = sweep_with(&game, &grid, &config.sweep_options()).map_err(from_limit)?;
            let limit = estimate_limit(&table, config.oscillation_threshold).map_err(from_limit)?;
            if let Some(advice) = &limit.advice {
                log::warn!("{advice}");
            }
            let report_path = report.or(config.output.report.clone());
            let report_json = to_json(&WithTransform {
                body: &limit,
                payoff_transform: transform,
            });
            emit(config.output.out.as_deref(), &table.to_csv())?;
            match report_path {
                Some(p) => write_atomic(&p, &report_json),
                None => {
                    eprint!("{report_json}");
                    Ok(())
                }
            }
        }
        Command::Eval {
            game,
            lambda,
            x,
            y,
            common,
        } => {
            let config = load_config(&common)?;
            check_lambda(lambda)?;
            let (game, transform) = load_game(&game)?;
            let x = load_player1(&x, &game, lambda)?;
            let y = load_stationary(&y, &game, Player::Two)?;
            let values = evaluate(&game, &x, &y, lambda).map_err(failed)?;
            emit(
                config.output.out.as_deref(),
                &to_json(&WithTransform {
                    body: &EvalOutput { lambda, values },
                    payoff_transform: transform,
                }),
            )
        }
        Command::BestReply { game, lambda, x, common } => {
            let config = load_config(&common)?;
            check_lambda(lambda)?;
            let (game, transform) = load_game(&game)?;
            let x = load_player1(&x, &game, lambda)?;
            let reply = best_reply_p2(&game, &x, lambda).map_err(failed)?;
            let check = guarantee_inequality_check(&game, &x, lambda).map_err(failed)?;
            emit(
                config.output.out.as_deref(),
                &to_json(&WithTransform {
                    body: &BestReplyOutput {
                        lambda,
                        reply: &reply,
                        guarantee_margin: check.worst_margin,
                    },
                    payoff_transform: transform,
                }),
            )
        }
        Command::Fit { game, report, common } => {
            let config = load_config(&common)?;
            let (game, transform) = load_game(&game)?;
            let grid = config.grid.points().map_err(invalid)?;
            let table = sweep_with(&game, &grid, &config.sweep_options()).map_err(from_limit)?;
            let limit = estimate_limit(&table, config.oscillation_threshold).map_err(from_limit)?;
            let fitted = fit_asymptotic_strategy_with(&game, &table, &config.fit.estimator(), config.fit.residual_cap)
                .map_err(from_limit)?;
            let diagnostics = FitDiagnostics {
                round: fitted.round,
                rows_used: fitted.rows_used.iter().map(|&k| table.rows[k].lambda).collect(),
                slack: fitted.fit.slack,
                denominator: fitted.fit.denominator,
                residual: fitted.fit.coefficients.residual,
                normalized_residual: fitted.fit.coefficients.normalized_residual,
                pinned: &fitted.fit.coefficients.pinned,
                limits: fitted.limits.len(),
                limit: &limit,
            };
            let mut canonical = fitted.strategy().to_json();
            canonical.push('\n');
            emit(config.output.out.as_deref(), &canonical)?;
            let report_json = to_json(&WithTransform {
                body: &diagnostics,
                payoff_transform: transform,
            });
            match report.or(config.output.report.clone()) {
                Some(p) => write_atomic(&p, &report_json),
                None => {
                    log::info!("fit diagnostics: {report_json}");
                    Ok(())
                }
            }
        }
        Command::Check {
            game,
            canonical,
            epsilon,
            v_star,
            csv,
            behavioral,
            common,
        } => {
            let mut config = load_config(&common)?;
            if let Some(eps) = epsilon {
                config.epsilon = eps;
                config.validate().map_err(invalid)?;
            }
            let (game, transform) = load_game(&game)?;
            let xc = load_canonical(&canonical, &game)?;
            let v_star = match v_star {
                Some(v) => {
                    if v.len() != game.num_states() {
                        return Err(invalid(format!(
                            "v_star has {} entries, game has {} states",
                            v.len(),
                            game.num_states()
                        )));
                    }
                    v
                }
                None => {
                    let grid = config.grid.points().map_err(invalid)?;
                    let table = sweep_with(&game, &grid, &config.sweep_options()).map_err(from_limit)?;
                    let limit = estimate_limit(&table, config.oscillation_threshold).map_err(from_limit)?;
                    if let Some(advice) = &limit.advice {
                        log::warn!("{advice}");
                    }
                    limit.v_star
                }
            };
            let points = config.check_points().map_err(invalid)?;
            let cert = check_asymptotic_optimality(&game, &xc, &v_star, config.epsilon, &points, config.jobs)
                .map_err(from_limit)?;
            let behavioral_json = match &behavioral {
                Some(_) => Some(to_json(
                    &behavioral_certificate(
                        &game,
                        &xc,
                        &v_star,
                        &standard_sequences(config.seed),
                        config.behavioral_tolerance,
                    )
                    .map_err(from_limit)?,
                )),
                None => None,
            };
            emit(
                config.output.out.as_deref(),
                &to_json(&WithTransform {
                    body: &cert,
                    payoff_transform: transform,
                }),
            )?;
            if let Some(p) = csv {
                write_atomic(&p, &cert.to_csv())?;
            }
            if let (Some(p), Some(text)) = (behavioral, behavioral_json) {
                write_atomic(&p, &text)?;
            }
            Ok(())
        }
        Command::Random {
            states,
            p1_actions,
            p2_actions,
            common,
        } => {
            let config = load_config(&common)?;
            let game = Game::random(states, p1_actions, p2_actions, config.seed).map_err(invalid)?;
            let mut text = game.to_json();
            text.push('\n');
            emit(config.output.out.as_deref(), &text)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LIMITVAL_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (CliError::Validation(msg) | CliError::Solver(msg)) = &e;
            eprintln!("error: {msg}");
            ExitCode::from(e.code())
        }
    }
}
