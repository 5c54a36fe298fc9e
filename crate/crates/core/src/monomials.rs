//! Monomial indices `(A, a)`, their values `λ^a ∏ x(ω,i)^{A(ω,i)}` along a
//! strategy family, estimated limit vectors, and the consistency checks
//! every exact limit vector satisfies.

use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{Game, StationaryStrategy};

/// Default bound on the size of a full enumeration.
pub const DEFAULT_ENUMERATION_CAP: u64 = 2_000_000;
/// Default `‖A‖₁` bound of the restricted enumeration.
pub const DEFAULT_RESTRICTED_NORM: usize = 4;
/// Relative tolerance on finite values in [`check_properties`].
pub const PROPERTY_TOLERANCE: f64 = 1e-3;
/// Up to this many entries every pair of indices is checked for
/// multiplicativity; above it only products with a generator are.
pub const FULL_PRODUCT_CHECK_LIMIT: usize = 2000;

#[derive(Debug, Error, PartialEq)]
pub enum MonomialError {
    #[error(
        "full index set has {count} elements, above the cap {cap}; \
         use the restricted enumeration (|A|_1 <= k)"
    )]
    CapExceeded { count: u128, cap: u64 },
    #[error("layout needs at least one state and one action per state")]
    EmptyLayout,
    #[error("{got} samples supplied, at least {min} required")]
    TooFewSamples { got: usize, min: usize },
    #[error("discount factors must be in (0, 1] and strictly decreasing (sample {0})")]
    NotDecreasing(usize),
    #[error("discount factors span {decades:.2} decades, at least {min} required")]
    Span { decades: f64, min: f64 },
    #[error("index {index} has {got} pattern entries, layout has {expected} pairs")]
    IndexLength {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("index {0} has a pattern entry outside -1..=1")]
    IndexEntry(usize),
    #[error("sample {sample}: strategy does not match the layout")]
    SampleShape { sample: usize },
    #[error("duplicate index {0}")]
    Duplicate(String),
    #[error("finite limit must be positive and finite, got {0}")]
    FiniteValue(f64),
    #[error("invalid fit configuration: {0}")]
    Config(String),
    #[error("limit vector JSON: {0}")]
    Json(String),
}

/// Flat numbering of the player-1 (state, action) pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairLayout {
    counts: Vec<usize>,
    offsets: Vec<usize>,
}

impl PairLayout {
    pub fn new(counts: Vec<usize>) -> Result<Self, MonomialError> {
        if counts.is_empty() || counts.contains(&0) {
            return Err(MonomialError::EmptyLayout);
        }
        let mut offsets = Vec::with_capacity(counts.len());
        let mut acc = 0;
        for &k in &counts {
            offsets.push(acc);
            acc += k;
        }
        Ok(Self { counts, offsets })
    }

    pub fn for_game(game: &Game) -> Self {
        Self::new(game.p1_action_counts()).expect("games have nonempty action sets")
    }

    pub fn num_states(&self) -> usize {
        self.counts.len()
    }

    pub fn num_pairs(&self) -> usize {
        self.offsets.last().unwrap() + self.counts.last().unwrap()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn pair(&self, state: usize, action: usize) -> usize {
        debug_assert!(action < self.counts[state]);
        self.offsets[state] + action
    }

    pub fn state_action(&self, pair: usize) -> (usize, usize) {
        let s = self.offsets.partition_point(|&o| o <= pair) - 1;
        (s, pair - self.offsets[s])
    }

    /// Pair range of one state.
    pub fn state_pairs(&self, state: usize) -> std::ops::Range<usize> {
        self.offsets[state]..self.offsets[state] + self.counts[state]
    }

    /// `3^P (2|Ω|+1)`.
    pub fn full_size(&self) -> u128 {
        let base = 3u128.checked_pow(self.num_pairs() as u32).unwrap_or(u128::MAX);
        base.saturating_mul(2 * self.num_states() as u128 + 1)
    }

    pub fn matches(&self, x: &StationaryStrategy) -> bool {
        x.num_states() == self.counts.len()
            && self.counts.iter().enumerate().all(|(s, &k)| x.row(s).len() == k)
    }
}

/// `(A, a)`: a pattern over (state, action) pairs and a power of `λ`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MonomialIndex {
    #[serde(rename = "A")]
    pub pattern: Vec<i8>,
    #[serde(rename = "a")]
    pub power: i32,
}

impl MonomialIndex {
    pub fn new(pattern: Vec<i8>, power: i32) -> Self {
        Self { pattern, power }
    }

    /// `(0, 0)`.
    pub fn unit(num_pairs: usize) -> Self {
        Self::new(vec![0; num_pairs], 0)
    }

    /// `(0, μ)`.
    pub fn pure_lambda(num_pairs: usize, power: i32) -> Self {
        Self::new(vec![0; num_pairs], power)
    }

    /// `+1` (or `−1`) on one pair, with power `a`.
    pub fn single(num_pairs: usize, pair: usize, sign: i8, power: i32) -> Self {
        let mut p = vec![0; num_pairs];
        p[pair] = sign;
        Self::new(p, power)
    }

    pub fn negate(&self) -> Self {
        Self::new(self.pattern.iter().map(|v| -v).collect(), -self.power)
    }

    pub fn l1_norm(&self) -> usize {
        self.pattern.iter().map(|v| v.unsigned_abs() as usize).sum()
    }

    pub fn is_pure_lambda(&self) -> bool {
        self.pattern.iter().all(|&v| v == 0)
    }

    /// `(A+B, a+b)` when every entry of `A+B` stays in `{−1,0,1}`.
    pub fn checked_add(&self, other: &Self) -> Option<Self> {
        if self.pattern.len() != other.pattern.len() {
            return None;
        }
        let mut pattern = Vec::with_capacity(self.pattern.len());
        for (a, b) in self.pattern.iter().zip(&other.pattern) {
            let s = a + b;
            if !(-1..=1).contains(&s) {
                return None;
            }
            pattern.push(s);
        }
        Some(Self::new(pattern, self.power + other.power))
    }

    /// `a + Σ A·e`.
    pub fn exponent_sum(&self, e: &[f64]) -> f64 {
        self.pattern
            .iter()
            .zip(e)
            .map(|(&a, &v)| a as f64 * v)
            .sum::<f64>()
            + self.power as f64
    }
}

impl fmt::Display for MonomialIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(A=[")?;
        for (k, v) in self.pattern.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "], a={})", self.power)
    }
}

fn push_patterns(
    pos: usize,
    budget: usize,
    cur: &mut Vec<i8>,
    powers: std::ops::RangeInclusive<i32>,
    out: &mut Vec<MonomialIndex>,
) {
    if pos == cur.len() {
        for a in powers {
            out.push(MonomialIndex::new(cur.clone(), a));
        }
        return;
    }
    for v in [-1i8, 0, 1] {
        if v != 0 && budget == 0 {
            continue;
        }
        cur[pos] = v;
        let left = if v == 0 { budget } else { budget - 1 };
        push_patterns(pos + 1, left, cur, powers.clone(), out);
    }
    cur[pos] = 0;
}

fn power_range(layout: &PairLayout) -> std::ops::RangeInclusive<i32> {
    let n = layout.num_states() as i32;
    -n..=n
}

fn binomial(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, j| acc * (n - j) as u128 / (j + 1) as u128)
}

/// Every index of `{−1,0,1}^P × {−|Ω|,…,|Ω|}`, in lexicographic order with
/// digits ordered `−1 < 0 < 1` and the power varying fastest.
pub fn enumerate_m(layout: &PairLayout, cap: u64) -> Result<Vec<MonomialIndex>, MonomialError> {
    let count = layout.full_size();
    if count > cap as u128 {
        return Err(MonomialError::CapExceeded { count, cap });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut cur = vec![0; layout.num_pairs()];
    push_patterns(0, layout.num_pairs(), &mut cur, power_range(layout), &mut out);
    Ok(out)
}

/// Indices with `‖A‖₁ ≤ max_norm`, in the order of [`enumerate_m`].
pub fn enumerate_restricted(
    layout: &PairLayout,
    max_norm: usize,
    cap: u64,
) -> Result<Vec<MonomialIndex>, MonomialError> {
    let p = layout.num_pairs();
    let patterns: u128 = (0..=max_norm.min(p))
        .map(|j| binomial(p, j).saturating_mul(1u128 << j))
        .fold(0u128, u128::saturating_add);
    let count = patterns.saturating_mul(2 * layout.num_states() as u128 + 1);
    if count > cap as u128 {
        return Err(MonomialError::CapExceeded { count, cap });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut cur = vec![0; p];
    push_patterns(0, max_norm, &mut cur, power_range(layout), &mut out);
    Ok(out)
}

/// Full enumeration when it fits under the cap, else the restricted one
/// with the default norm bound.
pub fn enumerate_auto(layout: &PairLayout, cap: u64) -> Result<Vec<MonomialIndex>, MonomialError> {
    match enumerate_m(layout, cap) {
        Err(MonomialError::CapExceeded { .. }) => {
            log::warn!(
                "full index set exceeds {cap}; restricting to |A|_1 <= {DEFAULT_RESTRICTED_NORM}"
            );
            enumerate_restricted(layout, DEFAULT_RESTRICTED_NORM, cap)
        }
        other => other,
    }
}

/// Natural logarithm of the monomial value; `±∞` for the values `+∞`/`0`.
/// Zero coordinates combine as `0^β` with `β` the net exponent they carry,
/// so `0⁰ = 0/0 = 1`.
pub fn log_monomial(lambda: f64, log_x: &[f64], idx: &MonomialIndex) -> f64 {
    log_monomial_at(lambda.ln(), log_x, idx)
}

fn log_monomial_at(log_lambda: f64, log_x: &[f64], idx: &MonomialIndex) -> f64 {
    let mut zero_power = 0i32;
    let mut total = idx.power as f64 * log_lambda;
    for (&a, &lx) in idx.pattern.iter().zip(log_x) {
        if a == 0 {
            continue;
        }
        if lx == f64::NEG_INFINITY {
            zero_power += a as i32;
        } else {
            total += a as f64 * lx;
        }
    }
    match zero_power.cmp(&0) {
        std::cmp::Ordering::Greater => f64::NEG_INFINITY,
        std::cmp::Ordering::Less => f64::INFINITY,
        std::cmp::Ordering::Equal => total,
    }
}

/// Flattened `ln x(ω,i)` in pair order.
pub fn log_strategy(x: &StationaryStrategy) -> Vec<f64> {
    x.rows().iter().flatten().map(|p| p.ln()).collect()
}

/// `λ^a ∏ x(ω,i)^{A(ω,i)}` in `[0, +∞]`.
pub fn eval_monomial(lambda: f64, x: &StationaryStrategy, idx: &MonomialIndex) -> f64 {
    assert!(lambda > 0.0 && lambda <= 1.0, "discount factor {lambda} outside (0, 1]");
    let log_x = log_strategy(x);
    assert_eq!(log_x.len(), idx.pattern.len(), "index does not match the strategy");
    log_monomial(lambda, &log_x, idx).exp()
}

/// Why an index could not be classified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    /// Least-squares slope of the log-value on `log λ` over the window.
    pub slope: f64,
    /// Two-standard-error band around `slope`.
    pub band: [f64; 2],
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LimitClass {
    Zero,
    Finite(f64),
    Infinite,
    Undetermined(Diagnostic),
}

impl LimitClass {
    pub fn is_undetermined(&self) -> bool {
        matches!(self, LimitClass::Undetermined(_))
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            LimitClass::Finite(v) => Some(*v),
            _ => None,
        }
    }

    /// Same class, and within `rel_tol` relative on finite values.
    pub fn agrees(&self, other: &LimitClass, rel_tol: f64) -> bool {
        match (self, other) {
            (LimitClass::Zero, LimitClass::Zero) | (LimitClass::Infinite, LimitClass::Infinite) => true,
            (LimitClass::Finite(a), LimitClass::Finite(b)) => relative_close(*a, *b, rel_tol),
            _ => false,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LimitClass::Zero => "Zero",
            LimitClass::Finite(_) => "Finite",
            LimitClass::Infinite => "Infinite",
            LimitClass::Undetermined(_) => "Undetermined",
        }
    }

    /// Class of a product; `None` for the indefinite `0·∞`.
    fn times(&self, other: &LimitClass) -> Option<LimitClass> {
        use LimitClass::*;
        match (self, other) {
            (Finite(a), Finite(b)) => Some(Finite(a * b)),
            (Zero, Finite(_)) | (Finite(_), Zero) | (Zero, Zero) => Some(Zero),
            (Infinite, Finite(_)) | (Finite(_), Infinite) | (Infinite, Infinite) => Some(Infinite),
            _ => None,
        }
    }
}

pub(crate) fn relative_close(a: f64, b: f64, rel_tol: f64) -> bool {
    (a - b).abs() <= rel_tol * a.abs().max(b.abs())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitEntry {
    pub index: MonomialIndex,
    pub class: LimitClass,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireEntry {
    #[serde(rename = "A")]
    pattern: Vec<i8>,
    a: i32,
    class: WireClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    slope: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    band: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
enum WireClass {
    Zero,
    Finite,
    Infinite,
    Undetermined,
}

/// Limits over an enumerated set of indices, in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LimitVector {
    entries: Vec<LimitEntry>,
    lookup: HashMap<MonomialIndex, usize>,
}

impl LimitVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries(entries: Vec<LimitEntry>) -> Result<Self, MonomialError> {
        let mut out = Self::new();
        for e in entries {
            out.insert(e.index, e.class)?;
        }
        Ok(out)
    }

    pub fn insert(&mut self, index: MonomialIndex, class: LimitClass) -> Result<(), MonomialError> {
        if let LimitClass::Finite(v) = class {
            if !(v > 0.0 && v.is_finite()) {
                return Err(MonomialError::FiniteValue(v));
            }
        }
        if let Some(first) = self.entries.first() {
            if first.index.pattern.len() != index.pattern.len() {
                return Err(MonomialError::IndexLength {
                    index: self.entries.len(),
                    expected: first.index.pattern.len(),
                    got: index.pattern.len(),
                });
            }
        }
        if index.pattern.iter().any(|v| !(-1..=1).contains(v)) {
            return Err(MonomialError::IndexEntry(self.entries.len()));
        }
        if self.lookup.contains_key(&index) {
            return Err(MonomialError::Duplicate(index.to_string()));
        }
        self.lookup.insert(index.clone(), self.entries.len());
        self.entries.push(LimitEntry { index, class });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_pairs(&self) -> Option<usize> {
        self.entries.first().map(|e| e.index.pattern.len())
    }

    pub fn get(&self, index: &MonomialIndex) -> Option<&LimitClass> {
        self.lookup.get(index).map(|&k| &self.entries[k].class)
    }

    pub fn entries(&self) -> &[LimitEntry] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = &LimitEntry> {
        self.entries.iter()
    }

    pub fn undetermined(&self) -> impl Iterator<Item = &LimitEntry> {
        self.entries.iter().filter(|e| e.class.is_undetermined())
    }

    /// Checks that every index fits `layout`.
    pub fn check_layout(&self, layout: &PairLayout) -> Result<(), MonomialError> {
        for (k, e) in self.entries.iter().enumerate() {
            if e.index.pattern.len() != layout.num_pairs() {
                return Err(MonomialError::IndexLength {
                    index: k,
                    expected: layout.num_pairs(),
                    got: e.index.pattern.len(),
                });
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let wire: Vec<WireEntry> = self
            .entries
            .iter()
            .map(|e| {
                let mut w = WireEntry {
                    pattern: e.index.pattern.clone(),
                    a: e.index.power,
                    class: WireClass::Zero,
                    value: None,
                    slope: None,
                    band: None,
                    reason: None,
                };
                match &e.class {
                    LimitClass::Zero => {}
                    LimitClass::Infinite => w.class = WireClass::Infinite,
                    LimitClass::Finite(v) => {
                        w.class = WireClass::Finite;
                        w.value = Some(*v);
                    }
                    LimitClass::Undetermined(d) => {
                        w.class = WireClass::Undetermined;
                        w.slope = Some(d.slope);
                        w.band = Some(d.band);
                        w.reason = Some(d.reason.clone());
                    }
                }
                w
            })
            .collect();
        serde_json::to_string_pretty(&wire).expect("limit vectors serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, MonomialError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let wire: Vec<WireEntry> =
            serde_path_to_error::deserialize(de).map_err(|e| MonomialError::Json(e.to_string()))?;
        let mut out = Self::new();
        for (k, w) in wire.into_iter().enumerate() {
            let class = match w.class {
                WireClass::Zero => LimitClass::Zero,
                WireClass::Infinite => LimitClass::Infinite,
                WireClass::Finite => LimitClass::Finite(
                    w.value
                        .ok_or_else(|| MonomialError::Json(format!("[{k}]: Finite entry without value")))?,
                ),
                WireClass::Undetermined => LimitClass::Undetermined(Diagnostic {
                    slope: w.slope.unwrap_or(f64::NAN),
                    band: w.band.unwrap_or([f64::NAN; 2]),
                    reason: w.reason.unwrap_or_default(),
                }),
            };
            out.insert(MonomialIndex::new(w.pattern, w.a), class)?;
        }
        Ok(out)
    }
}

/// Thresholds for [`estimate_l`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Slopes within `±slope_tol` of zero are classified Finite.
    pub slope_tol: f64,
    /// Minimum R² of the window regression for Zero and Infinite.
    pub r2_min: f64,
    pub min_points: usize,
    pub min_decades: f64,
    /// Fraction of the samples forming the trailing window.
    pub window_fraction: f64,
    /// Depth of the iterated Aitken extrapolation.
    pub extrapolation_depth: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            slope_tol: 0.15,
            r2_min: 0.9,
            min_points: 12,
            min_decades: 4.0,
            window_fraction: 0.5,
            extrapolation_depth: 3,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<(), MonomialError> {
        let bad = |m: &str| Err(MonomialError::Config(m.to_string()));
        if !(self.slope_tol > 0.0) {
            return bad("slope_tol must be positive");
        }
        if !(0.0..=1.0).contains(&self.r2_min) {
            return bad("r2_min must lie in [0, 1]");
        }
        if self.min_points < 4 {
            return bad("min_points must be at least 4");
        }
        if !(self.min_decades >= 0.0) {
            return bad("min_decades must be nonnegative");
        }
        if !(self.window_fraction > 0.0 && self.window_fraction <= 1.0) {
            return bad("window_fraction must lie in (0, 1]");
        }
        Ok(())
    }
}

/// Iterated Aitken Δ² extrapolation of a sequence's limit. Corrections
/// larger than the spread of the input are rejected in favor of the last
/// term.
pub fn extrapolate(seq: &[f64], depth: usize) -> f64 {
    let last = *seq.last().expect("nonempty sequence");
    let (lo, hi) = seq
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let mut s = seq.to_vec();
    for _ in 0..depth {
        if s.len() < 3 {
            break;
        }
        s = s
            .windows(3)
            .map(|w| {
                let (a, b, c) = (w[0], w[1], w[2]);
                let d2 = c - 2.0 * b + a;
                if d2.abs() < 1e-13 * (1.0 + c.abs()) {
                    c
                } else {
                    c - (c - b) * (c - b) / d2
                }
            })
            .collect();
    }
    let est = *s.last().unwrap();
    if est.is_finite() && (est - last).abs() <= (hi - lo) + 1e-12 * (1.0 + last.abs()) {
        est
    } else {
        last
    }
}

const WYNN_SPREAD_FACTOR: f64 = 10.0;

/// Wynn ε-algorithm: the deepest even column ending at the last term. Falls
/// back to [`extrapolate`] when the table breaks down or the estimate lands
/// more than ten spreads of the input away from the last term.
pub fn wynn_epsilon(seq: &[f64], fallback_depth: usize) -> f64 {
    let last = *seq.last().expect("nonempty sequence");
    let (lo, hi) = seq
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let mut prev: Vec<f64> = vec![0.0; seq.len() + 1];
    let mut cur = seq.to_vec();
    let mut best = None;
    let mut column = 0;
    while cur.len() >= 2 {
        let next: Vec<f64> = cur
            .windows(2)
            .zip(&prev[1..])
            .map(|(w, &p)| p + 1.0 / (w[1] - w[0]))
            .collect();
        prev = cur;
        cur = next;
        column += 1;
        let est = *cur.last().unwrap();
        if !est.is_finite() {
            break;
        }
        if column % 2 == 0 {
            best = Some(est);
        }
    }
    match best {
        // slowly converging tails can still have several spreads to travel
        Some(est) if (est - last).abs() <= WYNN_SPREAD_FACTOR * (hi - lo) + 1e-12 * (1.0 + last.abs()) => est,
        _ => extrapolate(seq, fallback_depth),
    }
}

fn regression(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let slope = sxy / sxx;
    let sse = (syy - slope * sxy).max(0.0);
    let r2 = if syy <= 1e-300 { 1.0 } else { 1.0 - sse / syy };
    let se = if x.len() > 2 {
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    (slope, r2, se)
}

/// Validated samples: `ln λ_n` and flattened `ln x_n`.
pub struct SampleSet {
    log_lambda: Vec<f64>,
    log_x: Vec<Vec<f64>>,
}

impl SampleSet {
    pub fn new(
        samples: &[(f64, StationaryStrategy)],
        layout: &PairLayout,
        config: &FitConfig,
    ) -> Result<Self, MonomialError> {
        config.validate()?;
        if samples.len() < config.min_points {
            return Err(MonomialError::TooFewSamples {
                got: samples.len(),
                min: config.min_points,
            });
        }
        for (k, (lambda, x)) in samples.iter().enumerate() {
            if !(*lambda > 0.0 && *lambda <= 1.0) || (k > 0 && *lambda >= samples[k - 1].0) {
                return Err(MonomialError::NotDecreasing(k));
            }
            if !layout.matches(x) {
                return Err(MonomialError::SampleShape { sample: k });
            }
        }
        let decades = (samples[0].0 / samples.last().unwrap().0).log10();
        if decades < config.min_decades {
            return Err(MonomialError::Span {
                decades,
                min: config.min_decades,
            });
        }
        Ok(Self {
            log_lambda: samples.iter().map(|(l, _)| l.ln()).collect(),
            log_x: samples.iter().map(|(_, x)| log_strategy(x)).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.log_lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_lambda.is_empty()
    }

    pub fn log_values(&self, idx: &MonomialIndex) -> Vec<f64> {
        self.log_lambda
            .iter()
            .zip(&self.log_x)
            .map(|(&ll, lx)| log_monomial_at(ll, lx, idx))
            .collect()
    }

    pub fn classify(&self, idx: &MonomialIndex, config: &FitConfig) -> LimitClass {
        let n = self.len();
        let h = ((n as f64 * config.window_fraction).floor() as usize).clamp(3, n - 1);
        let y = self.log_values(idx);
        // window of h values plus one for the h trailing local slopes
        let ys = &y[n - h - 1..];
        let xs = &self.log_lambda[n - h - 1..];
        let undetermined = |slope: f64, se: f64, reason: &str| {
            LimitClass::Undetermined(Diagnostic {
                slope,
                band: [slope - 2.0 * se, slope + 2.0 * se],
                reason: reason.to_string(),
            })
        };
        let pos = ys.iter().filter(|v| **v == f64::INFINITY).count();
        let neg = ys.iter().filter(|v| **v == f64::NEG_INFINITY).count();
        if pos + neg > 0 {
            return if neg == ys.len() {
                LimitClass::Zero
            } else if pos == ys.len() {
                LimitClass::Infinite
            } else {
                undetermined(f64::NAN, f64::NAN, "zero and infinite values mixed in the window")
            };
        }
        let local: Vec<f64> = ys
            .windows(2)
            .zip(xs.windows(2))
            .map(|(w, l)| (w[1] - w[0]) / (l[1] - l[0]))
            .collect();
        let limit_slope = extrapolate(&local, config.extrapolation_depth);
        let third = (n / 3).max(2).min(local.len());
        let (ols, r2, se) = regression(&xs[1..], &ys[1..]);
        if local[local.len() - third..]
            .iter()
            .any(|s| (s - limit_slope).abs() > config.slope_tol)
        {
            return undetermined(ols, se, "local slopes have not settled");
        }
        if limit_slope.abs() <= config.slope_tol {
            let value = wynn_epsilon(&ys[1..], config.extrapolation_depth).exp();
            if value > 0.0 && value.is_finite() {
                LimitClass::Finite(value)
            } else {
                undetermined(ols, se, "finite limit out of floating-point range")
            }
        } else if r2 < config.r2_min {
            undetermined(ols, se, "poor log-log fit")
        } else if limit_slope > 0.0 {
            LimitClass::Zero
        } else {
            LimitClass::Infinite
        }
    }
}

/// Estimates the limit of every index along `(λ_n, x_n)` with `λ_n`
/// strictly decreasing.
pub fn estimate_l(
    samples: &[(f64, StationaryStrategy)],
    layout: &PairLayout,
    indices: &[MonomialIndex],
    config: &FitConfig,
) -> Result<LimitVector, MonomialError> {
    let set = SampleSet::new(samples, layout, config)?;
    for (k, idx) in indices.iter().enumerate() {
        if idx.pattern.len() != layout.num_pairs() {
            return Err(MonomialError::IndexLength {
                index: k,
                expected: layout.num_pairs(),
                got: idx.pattern.len(),
            });
        }
    }
    let classes: Vec<LimitClass> = indices.par_iter().map(|idx| set.classify(idx, config)).collect();
    let mut out = LimitVector::new();
    for (idx, class) in indices.iter().zip(classes) {
        out.insert(idx.clone(), class)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Property {
    /// `L(0,0) = 1`.
    Unit,
    /// `L(A,a) = +∞ ⇔ L(−A,−a) = 0`, and finite mirrors are reciprocal.
    Antisymmetry,
    /// `L(0,μ)` is `0`, `1` or `+∞` according to the sign of `μ`.
    PureLambda,
    /// `L(A+B,a+b) = L(A,a) L(B,b)` whenever the product is determinate.
    Multiplicativity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub property: Property,
    pub indices: Vec<MonomialIndex>,
    /// Relative error for finite mismatches, `+∞` for class mismatches.
    pub magnitude: f64,
    pub message: String,
}

fn mismatch(expected: &LimitClass, got: &LimitClass) -> Option<f64> {
    match (expected, got) {
        (_, LimitClass::Undetermined(_)) | (LimitClass::Undetermined(_), _) => None,
        (LimitClass::Finite(a), LimitClass::Finite(b)) => {
            let rel = (a - b).abs() / a.abs().max(b.abs());
            (rel > PROPERTY_TOLERANCE).then_some(rel)
        }
        (a, b) if a.name() == b.name() => None,
        _ => Some(f64::INFINITY),
    }
}

fn is_generator(idx: &MonomialIndex) -> bool {
    idx.l1_norm() + idx.power.unsigned_abs() as usize == 1
}

fn push_product_violation(
    out: &mut Vec<Violation>,
    e: &LimitEntry,
    g: &LimitEntry,
    sum: MonomialIndex,
    sc: &LimitClass,
) {
    let Some(expected) = e.class.times(&g.class) else {
        return;
    };
    if let Some(m) = mismatch(&expected, sc) {
        out.push(Violation {
            property: Property::Multiplicativity,
            message: format!("L{} L{} = {:?} but L{} is {:?}", e.index, g.index, expected, sum, sc),
            indices: vec![e.index.clone(), g.index.clone(), sum],
            magnitude: m,
        });
    }
}

/// Base-3 codes of the patterns fit in a `u64` up to this many pairs.
const MAX_PACKED_PAIRS: usize = 40;

fn pattern_code(pattern: &[i8]) -> u64 {
    pattern.iter().rev().fold(0u64, |acc, &d| acc * 3 + (d + 1) as u64)
}

/// Products with the generators, looking sums up by packed code: adding a
/// generator changes one base-3 digit or the power.
fn generator_products(l: &LimitVector, p: usize) -> Vec<Vec<Violation>> {
    let codes: Vec<u64> = l.iter().map(|e| pattern_code(&e.index.pattern)).collect();
    let (lo, hi) = l
        .iter()
        .fold((i32::MAX, i32::MIN), |(lo, hi), e| (lo.min(e.index.power), hi.max(e.index.power)));
    let span = (hi as i64 - lo as i64 + 1) as u64;
    let max_code = codes.iter().copied().max().unwrap_or(0);
    let dense_size = (max_code + 1).checked_mul(span).filter(|&n| n <= 8 * l.len() as u64 + 1024);
    let lookup: Box<dyn Fn(u64, i32) -> Option<usize> + Sync> = match dense_size {
        Some(n) => {
            let mut table = vec![u32::MAX; n as usize];
            for (k, (e, &c)) in l.iter().zip(&codes).enumerate() {
                table[(c * span + (e.index.power - lo) as u64) as usize] = k as u32;
            }
            Box::new(move |c, a| {
                if a < lo || a > hi || c > max_code {
                    return None;
                }
                let k = table[(c * span + (a - lo) as u64) as usize];
                (k != u32::MAX).then_some(k as usize)
            })
        }
        None => {
            let map: HashMap<(u64, i32), usize> = l
                .iter()
                .zip(&codes)
                .enumerate()
                .map(|(k, (e, &c))| ((c, e.index.power), k))
                .collect();
            Box::new(move |c, a| map.get(&(c, a)).copied())
        }
    };
    let pow3: Vec<u64> = (0..p).map(|k| 3u64.pow(k as u32)).collect();
    // (pair, sign, power) of each generator present in l
    let generators: Vec<(Option<(usize, i8)>, i32, &LimitEntry)> = l
        .iter()
        .filter(|e| is_generator(&e.index))
        .map(|g| {
            let digit = g.index.pattern.iter().position(|&d| d != 0).map(|k| (k, g.index.pattern[k]));
            (digit, g.index.power, g)
        })
        .collect();
    l.entries()
        .par_iter()
        .zip(codes.par_iter())
        .map(|(e, &code)| {
            let mut local = vec![];
            for &(digit, power, g) in &generators {
                let sum_code = match digit {
                    None => code,
                    Some((k, sign)) => {
                        let d = e.index.pattern[k] + sign;
                        if !(-1..=1).contains(&d) {
                            continue;
                        }
                        if sign > 0 {
                            code + pow3[k]
                        } else {
                            code - pow3[k]
                        }
                    }
                };
                if let Some(k) = lookup(sum_code, e.index.power + power) {
                    let sum = &l.entries()[k];
                    push_product_violation(&mut local, e, g, sum.index.clone(), &sum.class);
                }
            }
            local
        })
        .collect()
}

/// Consistency checks satisfied by every exact limit vector. Undetermined
/// entries are skipped.
pub fn check_properties(l: &LimitVector) -> Vec<Violation> {
    let mut out = vec![];
    let Some(p) = l.num_pairs() else {
        return out;
    };
    let unit = MonomialIndex::unit(p);
    match l.get(&unit) {
        None => out.push(Violation {
            property: Property::Unit,
            indices: vec![unit.clone()],
            magnitude: f64::INFINITY,
            message: "L(0,0) is missing".into(),
        }),
        Some(c) => {
            if let Some(m) = mismatch(&LimitClass::Finite(1.0), c) {
                out.push(Violation {
                    property: Property::Unit,
                    indices: vec![unit.clone()],
                    magnitude: m,
                    message: format!("L(0,0) is {c:?}"),
                });
            }
        }
    }

    for e in l.iter() {
        if e.index.is_pure_lambda() && e.index.power != 0 {
            let expected = if e.index.power > 0 {
                LimitClass::Zero
            } else {
                LimitClass::Infinite
            };
            if let Some(m) = mismatch(&expected, &e.class) {
                out.push(Violation {
                    property: Property::PureLambda,
                    indices: vec![e.index.clone()],
                    magnitude: m,
                    message: format!("L{} is {:?}", e.index, e.class),
                });
            }
        }
        let mirror = e.index.negate();
        // each unordered pair once
        if mirror <= e.index {
            continue;
        }
        if let Some(mc) = l.get(&mirror) {
            let expected = match &e.class {
                LimitClass::Zero => LimitClass::Infinite,
                LimitClass::Infinite => LimitClass::Zero,
                LimitClass::Finite(v) => LimitClass::Finite(1.0 / v),
                LimitClass::Undetermined(_) => continue,
            };
            if let Some(m) = mismatch(&expected, mc) {
                out.push(Violation {
                    property: Property::Antisymmetry,
                    indices: vec![e.index.clone(), mirror.clone()],
                    magnitude: m,
                    message: format!("L{} is {:?} but L{} is {:?}", e.index, e.class, mirror, mc),
                });
            }
        }
    }

    let found: Vec<Vec<Violation>> = if l.len() > FULL_PRODUCT_CHECK_LIMIT && p <= MAX_PACKED_PAIRS {
        generator_products(l, p)
    } else {
        let generators: Vec<&LimitEntry> = if l.len() <= FULL_PRODUCT_CHECK_LIMIT {
            l.iter().collect()
        } else {
            l.iter().filter(|e| is_generator(&e.index)).collect()
        };
        l.entries()
            .par_iter()
            .map(|e| {
                let mut local = vec![];
                for g in &generators {
                    if g.index.l1_norm() == 0 && g.index.power == 0 {
                        continue;
                    }
                    if let Some(sum) = e.index.checked_add(&g.index) {
                        if let Some(sc) = l.get(&sum) {
                            push_product_violation(&mut local, e, g, sum.clone(), sc);
                        }
                    }
                }
                local
            })
            .collect()
    };
    out.extend(found.into_iter().flatten());
    out
}
