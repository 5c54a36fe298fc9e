//! Finite two-person zero-sum stochastic games, stationary strategies and
//! the JSON game file format.
//!
//! A [`Game`] is immutable once built: every constructor validates the
//! payoff range, the transition rows and the tensor shapes.

use std::fmt;
use std::path::Path;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance for probability rows (transitions and strategies).
pub const PROBABILITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum GameError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at `{field}` (line {line}, column {column}): {message}")]
    Parse {
        field: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid game: {0}")]
    Shape(String),
    #[error("payoff[{state}][{p1_action}][{p2_action}] = {value} lies outside [0, 1]")]
    PayoffOutOfRange {
        state: usize,
        p1_action: usize,
        p2_action: usize,
        value: f64,
    },
    #[error("transition[{state}][{p1_action}][{p2_action}] has entry {value} at target {target}; probabilities must be nonnegative")]
    NegativeProbability {
        state: usize,
        p1_action: usize,
        p2_action: usize,
        target: usize,
        value: f64,
    },
    #[error("transition[{state}][{p1_action}][{p2_action}] sums to {sum}, expected 1 within {PROBABILITY_TOLERANCE:e}")]
    TransitionRow {
        state: usize,
        p1_action: usize,
        p2_action: usize,
        sum: f64,
    },
    #[error("non-finite number at {0}")]
    NonFinite(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum StrategyError {
    #[error("strategy has {got} states, game has {expected}")]
    StateCount { expected: usize, got: usize },
    #[error("state {state}: strategy has {got} actions, game has {expected}")]
    ActionCount {
        state: usize,
        expected: usize,
        got: usize,
    },
    #[error("state {state}: entry {value} at action {action} is not a probability")]
    BadEntry {
        state: usize,
        action: usize,
        value: f64,
    },
    #[error("state {state}: row sums to {sum}")]
    RowSum { state: usize, sum: f64 },
    #[error("state {state}: pure action {action} out of range (0..{count})")]
    PureAction {
        state: usize,
        action: usize,
        count: usize,
    },
}

/// Which player's action sets a strategy refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Player {
    One,
    Two,
}

/// On-disk layout of a game. Names are optional display metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p1_actions: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p2_actions: Option<Vec<Vec<String>>>,
    pub payoff: Vec<Vec<Vec<f64>>>,
    pub transition: Vec<Vec<Vec<Vec<f64>>>>,
}

/// Affine payoff map `g' = scale * g + offset` applied on ingest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayoffTransform {
    pub scale: f64,
    pub offset: f64,
}

impl PayoffTransform {
    pub const IDENTITY: PayoffTransform = PayoffTransform {
        scale: 1.0,
        offset: 0.0,
    };

    pub fn apply(&self, g: f64) -> f64 {
        self.scale * g + self.offset
    }

    /// Maps a value expressed in rescaled units back to the original units.
    pub fn invert(&self, g: f64) -> f64 {
        (g - self.offset) / self.scale
    }
}

/// A finite zero-sum stochastic game `(Ω, I, J, q, g)` with per-state action sets.
#[derive(Debug, Clone, PartialEq)]
pub struct Game {
    states: Vec<String>,
    p1_actions: Vec<Vec<String>>,
    p2_actions: Vec<Vec<String>>,
    payoff: Vec<Vec<Vec<f64>>>,
    transition: Vec<Vec<Vec<Vec<f64>>>>,
}

impl Game {
    /// Builds a game from raw tensors with generated display names.
    pub fn new(
        payoff: Vec<Vec<Vec<f64>>>,
        transition: Vec<Vec<Vec<Vec<f64>>>>,
    ) -> Result<Self, GameError> {
        Self::from_file(GameFile {
            states: None,
            p1_actions: None,
            p2_actions: None,
            payoff,
            transition,
        })
    }

    pub fn from_file(file: GameFile) -> Result<Self, GameError> {
        let (game, _) = Self::from_file_with(file, false)?;
        Ok(game)
    }

    /// Validates a parsed file. With `rescale`, payoffs are first mapped
    /// affinely onto `[0, 1]` and the transform is returned.
    pub fn from_file_with(
        file: GameFile,
        rescale: bool,
    ) -> Result<(Self, PayoffTransform), GameError> {
        let GameFile {
            states,
            p1_actions,
            p2_actions,
            mut payoff,
            transition,
        } = file;

        let n = payoff.len();
        if n == 0 {
            return Err(GameError::Shape("game has no states".into()));
        }
        if transition.len() != n {
            return Err(GameError::Shape(format!(
                "payoff has {n} states but transition has {}",
                transition.len()
            )));
        }
        let mut p1_counts = Vec::with_capacity(n);
        let mut p2_counts = Vec::with_capacity(n);
        for (s, rows) in payoff.iter().enumerate() {
            let rows_i = rows.len();
            if rows_i == 0 {
                return Err(GameError::Shape(format!("payoff[{s}] has no player-1 actions")));
            }
            let cols = rows[0].len();
            if cols == 0 {
                return Err(GameError::Shape(format!("payoff[{s}][0] has no player-2 actions")));
            }
            for (i, row) in rows.iter().enumerate() {
                if row.len() != cols {
                    return Err(GameError::Shape(format!(
                        "payoff[{s}][{i}] has {} entries, expected {cols}",
                        row.len()
                    )));
                }
            }
            if transition[s].len() != rows_i {
                return Err(GameError::Shape(format!(
                    "transition[{s}] has {} player-1 actions, payoff has {rows_i}",
                    transition[s].len()
                )));
            }
            for (i, trow) in transition[s].iter().enumerate() {
                if trow.len() != cols {
                    return Err(GameError::Shape(format!(
                        "transition[{s}][{i}] has {} player-2 actions, payoff has {cols}",
                        trow.len()
                    )));
                }
                for (j, dist) in trow.iter().enumerate() {
                    if dist.len() != n {
                        return Err(GameError::Shape(format!(
                            "transition[{s}][{i}][{j}] has {} entries, expected {n}",
                            dist.len()
                        )));
                    }
                }
            }
            p1_counts.push(rows_i);
            p2_counts.push(cols);
        }

        let states = match states {
            Some(names) if names.len() != n => {
                return Err(GameError::Shape(format!(
                    "states lists {} names for {n} states",
                    names.len()
                )))
            }
            Some(names) => names,
            None => (0..n).map(|s| format!("s{s}")).collect(),
        };
        let p1_actions = action_names(p1_actions, &p1_counts, "p1_actions")?;
        let p2_actions = action_names(p2_actions, &p2_counts, "p2_actions")?;

        for (s, rows) in payoff.iter().enumerate() {
            for (i, row) in rows.iter().enumerate() {
                for (j, &g) in row.iter().enumerate() {
                    if !g.is_finite() {
                        return Err(GameError::NonFinite(format!("payoff[{s}][{i}][{j}]")));
                    }
                }
            }
        }

        let transform = if rescale {
            let (lo, hi) = payoff
                .iter()
                .flatten()
                .flatten()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &g| {
                    (lo.min(g), hi.max(g))
                });
            let t = if lo >= 0.0 && hi <= 1.0 {
                PayoffTransform::IDENTITY
            } else if hi > lo {
                PayoffTransform {
                    scale: 1.0 / (hi - lo),
                    offset: -lo / (hi - lo),
                }
            } else {
                PayoffTransform {
                    scale: 1.0,
                    offset: -lo,
                }
            };
            for g in payoff.iter_mut().flatten().flatten() {
                // clamp absorbs the last-ulp overshoot of the affine map
                *g = t.apply(*g).clamp(0.0, 1.0);
            }
            t
        } else {
            PayoffTransform::IDENTITY
        };

        for (s, rows) in payoff.iter().enumerate() {
            for (i, row) in rows.iter().enumerate() {
                for (j, &g) in row.iter().enumerate() {
                    if !(0.0..=1.0).contains(&g) {
                        return Err(GameError::PayoffOutOfRange {
                            state: s,
                            p1_action: i,
                            p2_action: j,
                            value: g,
                        });
                    }
                }
            }
        }
        for (s, rows) in transition.iter().enumerate() {
            for (i, row) in rows.iter().enumerate() {
                for (j, dist) in row.iter().enumerate() {
                    let mut sum = 0.0;
                    for (t, &p) in dist.iter().enumerate() {
                        if !p.is_finite() {
                            return Err(GameError::NonFinite(format!(
                                "transition[{s}][{i}][{j}][{t}]"
                            )));
                        }
                        if p < 0.0 {
                            return Err(GameError::NegativeProbability {
                                state: s,
                                p1_action: i,
                                p2_action: j,
                                target: t,
                                value: p,
                            });
                        }
                        sum += p;
                    }
                    if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
                        return Err(GameError::TransitionRow {
                            state: s,
                            p1_action: i,
                            p2_action: j,
                            sum,
                        });
                    }
                }
            }
        }

        Ok((
            Game {
                states,
                p1_actions,
                p2_actions,
                payoff,
                transition,
            },
            transform,
        ))
    }

    /// Parses and validates a game from JSON text.
    pub fn from_json(text: &str) -> Result<Self, GameError> {
        Self::from_json_with(text, false).map(|(g, _)| g)
    }

    pub fn from_json_with(text: &str, rescale: bool) -> Result<(Self, PayoffTransform), GameError> {
        let file = parse_json::<GameFile>(text)?;
        Self::from_file_with(file, rescale)
    }

    /// Reads and validates a game file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, GameError> {
        let text = read_to_string(path.as_ref())?;
        Self::from_json(&text)
    }

    pub fn to_file(&self) -> GameFile {
        GameFile {
            states: Some(self.states.clone()),
            p1_actions: Some(self.p1_actions.clone()),
            p2_actions: Some(self.p2_actions.clone()),
            payoff: self.payoff.clone(),
            transition: self.transition.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("game serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_json() + "\n")
    }

    pub fn num_states(&self) -> usize {
        self.payoff.len()
    }

    pub fn num_p1_actions(&self, state: usize) -> usize {
        self.payoff[state].len()
    }

    pub fn num_p2_actions(&self, state: usize) -> usize {
        self.payoff[state][0].len()
    }

    pub fn num_actions(&self, player: Player, state: usize) -> usize {
        match player {
            Player::One => self.num_p1_actions(state),
            Player::Two => self.num_p2_actions(state),
        }
    }

    /// Per-state player-1 action counts.
    pub fn p1_action_counts(&self) -> Vec<usize> {
        (0..self.num_states()).map(|s| self.num_p1_actions(s)).collect()
    }

    pub fn p2_action_counts(&self) -> Vec<usize> {
        (0..self.num_states()).map(|s| self.num_p2_actions(s)).collect()
    }

    pub fn payoff(&self, state: usize, i: usize, j: usize) -> f64 {
        self.payoff[state][i][j]
    }

    /// Next-state distribution `q(·|ω,i,j)`.
    pub fn transition(&self, state: usize, i: usize, j: usize) -> &[f64] {
        &self.transition[state][i][j]
    }

    pub fn state_names(&self) -> &[String] {
        &self.states
    }

    pub fn p1_action_names(&self, state: usize) -> &[String] {
        &self.p1_actions[state]
    }

    pub fn p2_action_names(&self, state: usize) -> &[String] {
        &self.p2_actions[state]
    }

    /// Number of pure stationary policies of the given player.
    pub fn pure_policy_count(&self, player: Player) -> u128 {
        (0..self.num_states())
            .map(|s| self.num_actions(player, s) as u128)
            .product()
    }

    /// Seeded random instance: uniform payoffs, transition rows obtained by
    /// normalizing uniform draws.
    pub fn random(
        num_states: usize,
        actions_p1: usize,
        actions_p2: usize,
        seed: u64,
    ) -> Result<Self, GameError> {
        if num_states == 0 || actions_p1 == 0 || actions_p2 == 0 {
            return Err(GameError::Shape(format!(
                "random game sizes must be positive (got {num_states}, {actions_p1}, {actions_p2})"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut payoff = vec![vec![vec![0.0; actions_p2]; actions_p1]; num_states];
        let mut transition =
            vec![vec![vec![Vec::with_capacity(num_states); actions_p2]; actions_p1]; num_states];
        for s in 0..num_states {
            for i in 0..actions_p1 {
                for j in 0..actions_p2 {
                    payoff[s][i][j] = rng.random::<f64>();
                    // 1 - u lies in (0, 1], so the row total is strictly positive
                    let draws: Vec<f64> = (0..num_states).map(|_| 1.0 - rng.random::<f64>()).collect();
                    let total: f64 = draws.iter().sum();
                    transition[s][i][j] = draws.into_iter().map(|d| d / total).collect();
                }
            }
        }
        Self::new(payoff, transition)
    }

    /// The Big Match: state 0 is live, state 1 absorbs with payoff 1 and
    /// state 2 absorbs with payoff 0. In the live state Top continues
    /// (payoffs 0 vs Left, 1 vs Right) and Bottom absorbs (into 1 vs Left,
    /// into 0 vs Right).
    pub fn big_match() -> Self {
        let file = GameFile {
            states: Some(vec!["live".into(), "won".into(), "lost".into()]),
            p1_actions: Some(vec![
                vec!["Top".into(), "Bottom".into()],
                vec!["-".into()],
                vec!["-".into()],
            ]),
            p2_actions: Some(vec![
                vec!["Left".into(), "Right".into()],
                vec!["-".into()],
                vec!["-".into()],
            ]),
            payoff: vec![
                vec![vec![0.0, 1.0], vec![1.0, 0.0]],
                vec![vec![1.0]],
                vec![vec![0.0]],
            ],
            transition: vec![
                vec![
                    vec![vec![1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]],
                    vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
                ],
                vec![vec![vec![0.0, 1.0, 0.0]]],
                vec![vec![vec![0.0, 0.0, 1.0]]],
            ],
        };
        Self::from_file(file).expect("Big Match is well formed")
    }
}

impl fmt::Display for Game {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "game with {} states", self.num_states())
    }
}

fn action_names(
    names: Option<Vec<Vec<String>>>,
    counts: &[usize],
    field: &str,
) -> Result<Vec<Vec<String>>, GameError> {
    match names {
        None => Ok(counts
            .iter()
            .map(|&k| (0..k).map(|a| format!("a{a}")).collect())
            .collect()),
        Some(names) => {
            if names.len() != counts.len() {
                return Err(GameError::Shape(format!(
                    "{field} lists {} states, expected {}",
                    names.len(),
                    counts.len()
                )));
            }
            for (s, (row, &k)) in names.iter().zip(counts).enumerate() {
                if row.len() != k {
                    return Err(GameError::Shape(format!(
                        "{field}[{s}] lists {} names, expected {k}",
                        row.len()
                    )));
                }
            }
            Ok(names)
        }
    }
}

pub(crate) fn read_to_string(path: &Path) -> Result<String, GameError> {
    std::fs::read_to_string(path).map_err(|source| GameError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Deserializes JSON, reporting the field path of the first failure.
pub(crate) fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, GameError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|err| {
        let field = err.path().to_string();
        let inner = err.into_inner();
        GameError::Parse {
            field,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    })
}

/// Per-state probability vectors over one player's actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StationaryStrategy {
    rows: Vec<Vec<f64>>,
}

impl StationaryStrategy {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, StrategyError> {
        for (s, row) in rows.iter().enumerate() {
            let mut sum = 0.0;
            for (a, &p) in row.iter().enumerate() {
                if !p.is_finite() || p < 0.0 {
                    return Err(StrategyError::BadEntry {
                        state: s,
                        action: a,
                        value: p,
                    });
                }
                sum += p;
            }
            if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
                return Err(StrategyError::RowSum { state: s, sum });
            }
        }
        Ok(Self { rows })
    }

    /// Builds a strategy from nonnegative weights, normalizing each row.
    /// Rows must have a positive total.
    pub(crate) fn from_weights(rows: Vec<Vec<f64>>) -> Self {
        let rows = rows
            .into_iter()
            .map(|row| {
                let row: Vec<f64> = row.into_iter().map(|p| p.max(0.0)).collect();
                let total: f64 = row.iter().sum();
                debug_assert!(total > 0.0);
                row.into_iter().map(|p| p / total).collect()
            })
            .collect();
        Self { rows }
    }

    pub fn uniform(counts: &[usize]) -> Self {
        Self {
            rows: counts.iter().map(|&k| vec![1.0 / k as f64; k]).collect(),
        }
    }

    pub fn pure(policy: &PurePolicy, counts: &[usize]) -> Self {
        Self {
            rows: policy
                .actions()
                .iter()
                .zip(counts)
                .map(|(&a, &k)| {
                    let mut row = vec![0.0; k];
                    row[a] = 1.0;
                    row
                })
                .collect(),
        }
    }

    pub fn num_states(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.rows[state]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Checks the strategy against the given player's action sets.
    pub fn check_shape(&self, game: &Game, player: Player) -> Result<(), StrategyError> {
        if self.rows.len() != game.num_states() {
            return Err(StrategyError::StateCount {
                expected: game.num_states(),
                got: self.rows.len(),
            });
        }
        for (s, row) in self.rows.iter().enumerate() {
            let k = game.num_actions(player, s);
            if row.len() != k {
                return Err(StrategyError::ActionCount {
                    state: s,
                    expected: k,
                    got: row.len(),
                });
            }
        }
        Ok(())
    }
}

/// One action index per state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PurePolicy(Vec<usize>);

impl PurePolicy {
    pub fn new(actions: Vec<usize>, counts: &[usize]) -> Result<Self, StrategyError> {
        if actions.len() != counts.len() {
            return Err(StrategyError::StateCount {
                expected: counts.len(),
                got: actions.len(),
            });
        }
        for (s, (&a, &k)) in actions.iter().zip(counts).enumerate() {
            if a >= k {
                return Err(StrategyError::PureAction {
                    state: s,
                    action: a,
                    count: k,
                });
            }
        }
        Ok(Self(actions))
    }

    pub(crate) fn from_vec_unchecked(actions: Vec<usize>) -> Self {
        Self(actions)
    }

    pub fn actions(&self) -> &[usize] {
        &self.0
    }

    pub fn action(&self, state: usize) -> usize {
        self.0[state]
    }

    /// All pure policies for the given per-state counts, in lexicographic order.
    pub fn enumerate(counts: &[usize]) -> Vec<PurePolicy> {
        let mut out = vec![];
        let mut cur = vec![0usize; counts.len()];
        loop {
            out.push(PurePolicy(cur.clone()));
            let mut pos = counts.len();
            loop {
                if pos == 0 {
                    return out;
                }
                pos -= 1;
                cur[pos] += 1;
                if cur[pos] < counts[pos] {
                    break;
                }
                cur[pos] = 0;
            }
        }
    }
}
