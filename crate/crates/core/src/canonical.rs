//! Canonical strategies `x_λ(ω,i) ∝ c(ω,i) λ^{e(ω,i)}`, their exact limit
//! vectors, and the reconstruction of `(c, e)` from a limit vector.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::StationaryStrategy;
use crate::monomials::{
    check_properties, relative_close, LimitClass, LimitVector, MonomialIndex, PairLayout, Violation,
};
use crate::numerics::{
    least_squares, lp_solve_lazy, row_space_basis, CertificateError, FarkasCertificate, LinalgError,
    LinearProgram, LpError, LpOutcome, Relation,
};

/// Zero-exponent coefficients of a state must sum to one within this.
pub const MASS_TOLERANCE: f64 = 1e-9;
/// `|a + Σ A·e|` at or below this counts as zero in [`CanonicalStrategy::limit_vector`].
pub const EXPONENT_SUM_TOLERANCE: f64 = 1e-12;
/// Minimum slack for the strict inequalities of the exponent system.
pub const STRICT_SLACK: f64 = 1e-9;
/// Slack demanded by the infeasibility program behind a certificate.
pub const CERTIFICATE_MARGIN: f64 = 1e-6;
/// Tolerance used to verify Farkas certificates.
pub const CERTIFICATE_TOLERANCE: f64 = 1e-9;
/// Default cap on the log-space residual of the coefficient system.
pub const RESIDUAL_CAP: f64 = 1e-4;
/// Relative tolerance of the fit postcondition on finite values.
pub const FIT_VALUE_TOLERANCE: f64 = 1e-4;
/// Largest denominator tried when rationalizing fitted exponents.
pub const MAX_RATIONAL_DENOMINATOR: u32 = 12;

const ROW_BATCH: usize = 64;

#[derive(Debug, Error)]
pub enum CanonicalError {
    #[error("state {state}, action {action}: coefficient {value} must be positive and finite")]
    Coefficient { state: usize, action: usize, value: f64 },
    #[error("state {state}, action {action}: exponent {value} must be nonnegative and finite")]
    Exponent { state: usize, action: usize, value: f64 },
    #[error("state {0} has no zero-exponent action")]
    NoZeroExponent(usize),
    #[error("state {state}: zero-exponent coefficients sum to {sum}, not 1")]
    ZeroMass { state: usize, sum: f64 },
    #[error("shape: {0}")]
    Shape(String),
    #[error("{count} undetermined limits, first {first}")]
    Undetermined { count: usize, first: String },
    #[error("{} property violations, first: {}", .0.len(), .0[0].message)]
    Properties(Vec<Violation>),
    #[error("exponents break the equality for {index}: a + A.e = {sum:e}")]
    ExponentEquality { index: String, sum: f64 },
    #[error("coefficient system is inconsistent: log residual {residual:e} above {cap:e}")]
    InconsistentCoefficients { residual: f64, cap: f64 },
    #[error("exponent system is infeasible (certificate gap {:e})", .0.gap)]
    Infeasible(Box<ExponentCertificate>),
    #[error("rounding to multiples of 1/{n} breaks the constraint for {index} (a + A.e = {sum:e})")]
    Rationalize { n: u32, index: String, sum: f64 },
    #[error("denominator must be positive")]
    Denominator,
    #[error("fit disagrees with the input at {index}: expected {expected}, got {got}")]
    Postcondition {
        index: String,
        expected: String,
        got: String,
    },
    #[error("linear program: {0}")]
    Lp(#[from] LpError),
    #[error("simplex returned a certificate that does not verify: {0}")]
    Certificate(CertificateError),
    #[error("linear algebra: {0}")]
    Linalg(#[from] LinalgError),
    #[error("canonical strategy JSON: {0}")]
    Json(String),
}

/// Per-pair coefficients and exponents, flat in [`PairLayout`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalStrategy {
    layout: PairLayout,
    c: Vec<f64>,
    e: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActionEntry {
    action: usize,
    c: f64,
    e: f64,
}

impl CanonicalStrategy {
    pub fn new(layout: PairLayout, c: Vec<f64>, e: Vec<f64>) -> Result<Self, CanonicalError> {
        let p = layout.num_pairs();
        if c.len() != p || e.len() != p {
            return Err(CanonicalError::Shape(format!(
                "layout has {p} pairs, got {} coefficients and {} exponents",
                c.len(),
                e.len()
            )));
        }
        for s in 0..layout.num_states() {
            let mut mass = 0.0;
            let mut any_zero = false;
            for (action, k) in layout.state_pairs(s).enumerate() {
                if !(c[k] > 0.0 && c[k].is_finite()) {
                    return Err(CanonicalError::Coefficient { state: s, action, value: c[k] });
                }
                if !(e[k] >= 0.0 && e[k].is_finite()) {
                    return Err(CanonicalError::Exponent { state: s, action, value: e[k] });
                }
                if e[k] == 0.0 {
                    any_zero = true;
                    mass += c[k];
                }
            }
            if !any_zero {
                return Err(CanonicalError::NoZeroExponent(s));
            }
            if (mass - 1.0).abs() > MASS_TOLERANCE {
                return Err(CanonicalError::ZeroMass { state: s, sum: mass });
            }
        }
        Ok(Self { layout, c, e })
    }

    /// Builds from per-state rows.
    pub fn from_rows(c: Vec<Vec<f64>>, e: Vec<Vec<f64>>) -> Result<Self, CanonicalError> {
        if c.len() != e.len() || c.iter().zip(&e).any(|(a, b)| a.len() != b.len()) {
            return Err(CanonicalError::Shape("coefficient and exponent rows differ in shape".into()));
        }
        let layout = PairLayout::new(c.iter().map(Vec::len).collect())
            .map_err(|err| CanonicalError::Shape(err.to_string()))?;
        Self::new(layout, c.concat(), e.concat())
    }

    pub fn layout(&self) -> &PairLayout {
        &self.layout
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.c
    }

    pub fn exponents(&self) -> &[f64] {
        &self.e
    }

    pub fn c(&self, state: usize, action: usize) -> f64 {
        self.c[self.layout.pair(state, action)]
    }

    pub fn e(&self, state: usize, action: usize) -> f64 {
        self.e[self.layout.pair(state, action)]
    }

    /// `x_λ(ω,i) = c λ^e / Σ_{i'} c λ^e`, computed in log space.
    pub fn instantiate(&self, lambda: f64) -> StationaryStrategy {
        assert!(lambda > 0.0 && lambda <= 1.0, "discount factor {lambda} outside (0, 1]");
        let ll = lambda.ln();
        let rows = (0..self.layout.num_states())
            .map(|s| {
                let logs: Vec<f64> = self
                    .layout
                    .state_pairs(s)
                    .map(|k| self.c[k].ln() + if self.e[k] == 0.0 { 0.0 } else { self.e[k] * ll })
                    .collect();
                let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                logs.iter().map(|v| (v - top).exp()).collect()
            })
            .collect();
        StationaryStrategy::from_weights(rows)
    }

    /// Exact limits along `λ → 0`: the sign of `a + Σ A·e` decides, and a
    /// zero sum gives `∏ c^A`.
    pub fn limit_vector(&self, indices: &[MonomialIndex]) -> Result<LimitVector, CanonicalError> {
        let log_c: Vec<f64> = self.c.iter().map(|v| v.ln()).collect();
        let mut out = LimitVector::new();
        for idx in indices {
            if idx.pattern.len() != self.c.len() {
                return Err(CanonicalError::Shape(format!(
                    "index {idx} does not match {} pairs",
                    self.c.len()
                )));
            }
            out.insert(idx.clone(), self.limit_class(idx, &log_c))
                .map_err(|err| CanonicalError::Shape(err.to_string()))?;
        }
        Ok(out)
    }

    fn limit_class(&self, idx: &MonomialIndex, log_c: &[f64]) -> LimitClass {
        let s = idx.exponent_sum(&self.e);
        if s > EXPONENT_SUM_TOLERANCE {
            LimitClass::Zero
        } else if s < -EXPONENT_SUM_TOLERANCE {
            LimitClass::Infinite
        } else {
            let log_v: f64 = idx
                .pattern
                .iter()
                .zip(log_c)
                .map(|(&a, &lc)| a as f64 * lc)
                .sum();
            LimitClass::Finite(log_v.exp())
        }
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<Vec<ActionEntry>> = (0..self.layout.num_states())
            .map(|s| {
                self.layout
                    .state_pairs(s)
                    .enumerate()
                    .map(|(action, k)| ActionEntry {
                        action,
                        c: self.c[k],
                        e: self.e[k],
                    })
                    .collect()
            })
            .collect();
        serde_json::to_string_pretty(&rows).expect("canonical strategies serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, CanonicalError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let rows: Vec<Vec<ActionEntry>> =
            serde_path_to_error::deserialize(de).map_err(|err| CanonicalError::Json(err.to_string()))?;
        let mut c = Vec::with_capacity(rows.len());
        let mut e = Vec::with_capacity(rows.len());
        for (s, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|a| a.action);
            if row.iter().enumerate().any(|(k, a)| a.action != k) {
                return Err(CanonicalError::Json(format!(
                    "state {s}: actions must be 0..{} without gaps or repeats",
                    row.len()
                )));
            }
            c.push(row.iter().map(|a| a.c).collect());
            e.push(row.iter().map(|a| a.e).collect());
        }
        Self::from_rows(c, e)
    }
}

impl fmt::Display for CanonicalStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in 0..self.layout.num_states() {
            write!(f, "state {s}:")?;
            for k in self.layout.state_pairs(s) {
                write!(f, " {:.6}*lambda^{}", self.c[k], self.e[k])?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowKind {
    /// `a + A·e > 0`.
    Strict,
    /// `a + A·e = 0`.
    Equality,
}

/// One constraint of the exponent system and the index it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentRow {
    pub pattern: Vec<i8>,
    pub power: i32,
    pub kind: RowKind,
    /// Input index (for a strict row implied by an Infinite limit, the
    /// mirror of this).
    pub source: MonomialIndex,
}

/// Linear constraints on `e` implied by the classes of a limit vector. Of
/// all strict rows sharing a pattern only the one with the smallest power
/// is kept, since it implies the others.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentSystem {
    pub num_pairs: usize,
    pub rows: Vec<ExponentRow>,
}

impl ExponentSystem {
    pub fn from_limits(l: &LimitVector) -> Result<Self, CanonicalError> {
        let num_pairs = l.num_pairs().unwrap_or(0);
        let undetermined: Vec<_> = l.undetermined().collect();
        if let Some(first) = undetermined.first() {
            return Err(CanonicalError::Undetermined {
                count: undetermined.len(),
                first: first.index.to_string(),
            });
        }
        let mut strict: BTreeMap<Vec<i8>, (i32, MonomialIndex)> = BTreeMap::new();
        let mut equal: Vec<ExponentRow> = vec![];
        let mut seen: HashMap<MonomialIndex, ()> = HashMap::new();
        for entry in l.iter() {
            let (pattern, power) = match &entry.class {
                LimitClass::Zero => (entry.index.pattern.clone(), entry.index.power),
                LimitClass::Infinite => {
                    let m = entry.index.negate();
                    (m.pattern, m.power)
                }
                LimitClass::Finite(_) => {
                    if seen.insert(entry.index.clone(), ()).is_none() {
                        equal.push(ExponentRow {
                            pattern: entry.index.pattern.clone(),
                            power: entry.index.power,
                            kind: RowKind::Equality,
                            source: entry.index.clone(),
                        });
                    }
                    continue;
                }
                LimitClass::Undetermined(_) => unreachable!(),
            };
            let slot = strict.entry(pattern).or_insert((power, entry.index.clone()));
            if power < slot.0 {
                *slot = (power, entry.index.clone());
            }
        }
        let mut rows: Vec<ExponentRow> = strict
            .into_iter()
            .map(|(pattern, (power, source))| ExponentRow {
                pattern,
                power,
                kind: RowKind::Strict,
                source,
            })
            .collect();
        rows.extend(equal);
        Ok(Self { num_pairs, rows })
    }

    /// Rows whose pattern has `‖A‖₁ ≤ 1`; these seed row generation.
    fn seed_rows(&self) -> Vec<usize> {
        self.rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.pattern.iter().map(|v| v.unsigned_abs() as usize).sum::<usize>() <= 1)
            .map(|(k, _)| k)
            .collect()
    }

    fn coeffs(&self, row: &ExponentRow) -> Vec<f64> {
        row.pattern.iter().map(|&v| v as f64).collect()
    }

    /// `max t` s.t. `A·e + a ≥ t` (strict rows), `A·e + a = 0`
    /// (equalities), `e ≥ 0`, `t ≤ 1`. Variable `t` is the last one.
    pub fn slack_program(&self) -> LinearProgram {
        let p = self.num_pairs;
        let mut objective = vec![0.0; p + 1];
        objective[p] = 1.0;
        let mut lp = LinearProgram::maximize(objective).with_lower_bounds(0.0);
        lp.set_lower_bound(p, None);
        for row in &self.rows {
            let mut coeffs = self.coeffs(row);
            match row.kind {
                RowKind::Strict => {
                    coeffs.push(-1.0);
                    lp.add(coeffs, Relation::Ge, -(row.power as f64));
                }
                RowKind::Equality => {
                    coeffs.push(0.0);
                    lp.add(coeffs, Relation::Eq, -(row.power as f64));
                }
            }
        }
        let mut cap = vec![0.0; p + 1];
        cap[p] = 1.0;
        lp.add(cap, Relation::Le, 1.0);
        lp
    }

    /// `A·e + a ≥ margin` (strict rows), `A·e + a = 0`, `e ≥ 0`.
    pub fn margin_program(&self, margin: f64) -> LinearProgram {
        let mut lp = LinearProgram::feasibility(self.num_pairs).with_lower_bounds(0.0);
        for row in &self.rows {
            let coeffs = self.coeffs(row);
            match row.kind {
                RowKind::Strict => lp.add(coeffs, Relation::Ge, margin - row.power as f64),
                RowKind::Equality => lp.add(coeffs, Relation::Eq, -(row.power as f64)),
            };
        }
        lp
    }

    /// Smallest strict slack and largest equality defect at `e`.
    pub fn evaluate(&self, e: &[f64]) -> (f64, f64) {
        let mut slack = f64::INFINITY;
        let mut defect: f64 = 0.0;
        for row in &self.rows {
            let s = row.power as f64
                + row.pattern.iter().zip(e).map(|(&a, &v)| a as f64 * v).sum::<f64>();
            match row.kind {
                RowKind::Strict => slack = slack.min(s),
                RowKind::Equality => defect = defect.max(s.abs()),
            }
        }
        (slack, defect)
    }

    /// First row violated at `e`, with its exponent sum.
    fn first_broken(&self, e: &[f64], min_slack: f64, max_defect: f64) -> Option<(&ExponentRow, f64)> {
        self.rows.iter().find_map(|row| {
            let s = row.power as f64
                + row.pattern.iter().zip(e).map(|(&a, &v)| a as f64 * v).sum::<f64>();
            let broken = match row.kind {
                RowKind::Strict => s <= min_slack,
                RowKind::Equality => s.abs() > max_defect,
            };
            broken.then_some((row, s))
        })
    }
}

/// Proof that no exponents satisfy the system with slack
/// [`CERTIFICATE_MARGIN`]: a Farkas certificate for
/// [`ExponentSystem::margin_program`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentCertificate {
    pub system: ExponentSystem,
    pub margin: f64,
    pub certificate: FarkasCertificate,
    pub gap: f64,
}

impl ExponentCertificate {
    pub fn verify(&self) -> Result<f64, CertificateError> {
        self.certificate
            .verify(&self.system.margin_program(self.margin), CERTIFICATE_TOLERANCE)
    }

    /// Nonzero multipliers with the rows they weight.
    pub fn support(&self) -> Vec<(&ExponentRow, f64)> {
        self.system
            .rows
            .iter()
            .zip(&self.certificate.multipliers)
            .filter(|(_, m)| **m != 0.0)
            .map(|(r, m)| (r, *m))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExponentOutcome {
    Solved { e: Vec<f64>, slack: f64 },
    Infeasible(Box<ExponentCertificate>),
}

fn reject_value_violations(l: &LimitVector) -> Result<(), CanonicalError> {
    // class-level contradictions are linear and surface as certificates
    let value: Vec<Violation> = check_properties(l)
        .into_iter()
        .filter(|v| v.magnitude.is_finite())
        .collect();
    if value.is_empty() {
        Ok(())
    } else {
        Err(CanonicalError::Properties(value))
    }
}

/// Exponents realizing the classes of `l`, or a certificate that none
/// exist.
pub fn fit_exponents(l: &LimitVector) -> Result<ExponentOutcome, CanonicalError> {
    reject_value_violations(l)?;
    let system = ExponentSystem::from_limits(l)?;
    solve_exponents(system)
}

fn snap(e: &mut [f64]) {
    for v in e.iter_mut() {
        if *v < EXPONENT_SUM_TOLERANCE {
            *v = 0.0;
        }
    }
}

fn solve_exponents(system: ExponentSystem) -> Result<ExponentOutcome, CanonicalError> {
    let p = system.num_pairs;
    let seeds = system.seed_rows();
    let lp = system.slack_program();
    let mut initial = seeds.clone();
    initial.push(lp.num_constraints() - 1);
    if let LpOutcome::Optimal(sol) = lp_solve_lazy(&lp, &initial, ROW_BATCH)? {
        let mut e = sol.x[..p].to_vec();
        snap(&mut e);
        let (slack, defect) = system.evaluate(&e);
        if slack > STRICT_SLACK && defect <= EXPONENT_SUM_TOLERANCE.max(1e-10) {
            return Ok(ExponentOutcome::Solved { e, slack });
        }
    }
    let lp = system.margin_program(CERTIFICATE_MARGIN);
    match lp_solve_lazy(&lp, &seeds, ROW_BATCH)? {
        LpOutcome::Infeasible(certificate) => {
            let gap = certificate
                .verify(&lp, CERTIFICATE_TOLERANCE)
                .map_err(CanonicalError::Certificate)?;
            Ok(ExponentOutcome::Infeasible(Box::new(ExponentCertificate {
                system,
                margin: CERTIFICATE_MARGIN,
                certificate,
                gap,
            })))
        }
        LpOutcome::Optimal(sol) => {
            let mut e = sol.x;
            snap(&mut e);
            let (slack, _) = system.evaluate(&e);
            Ok(ExponentOutcome::Solved { e, slack })
        }
        LpOutcome::Unbounded => unreachable!("feasibility programs have a zero objective"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientFit {
    pub c: Vec<f64>,
    /// Max log-space residual of the least-squares solution.
    pub residual: f64,
    /// Same residual after the per-state renormalization.
    pub normalized_residual: f64,
    /// Pairs whose coefficient is fixed by the finite limits.
    pub pinned: Vec<bool>,
}

/// `d = ln c` from `Σ A·d = ln L(A,a)` over the finite entries, by minimum
/// norm least squares, followed by per-state renormalization of the
/// zero-exponent coefficients.
pub fn fit_coefficients(
    l: &LimitVector,
    layout: &PairLayout,
    e: &[f64],
    residual_cap: f64,
) -> Result<CoefficientFit, CanonicalError> {
    let p = layout.num_pairs();
    if e.len() != p {
        return Err(CanonicalError::Shape(format!("{} exponents for {p} pairs", e.len())));
    }
    l.check_layout(layout).map_err(|err| CanonicalError::Shape(err.to_string()))?;
    let mut rows: Vec<(&MonomialIndex, f64)> = vec![];
    for entry in l.iter() {
        if let LimitClass::Finite(v) = entry.class {
            let s = entry.index.exponent_sum(e);
            if s.abs() > 1e-8 {
                return Err(CanonicalError::ExponentEquality {
                    index: entry.index.to_string(),
                    sum: s,
                });
            }
            if !entry.index.is_pure_lambda() {
                rows.push((&entry.index, v.ln()));
            }
        }
    }
    let a = DMatrix::from_fn(rows.len(), p, |r, k| rows[r].0.pattern[k] as f64);
    let b = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
    let d = least_squares(&a, &b)?;
    let max_residual = |d: &DVector<f64>| {
        if rows.is_empty() {
            0.0
        } else {
            (&a * d - &b).amax()
        }
    };
    let residual = max_residual(&d);
    if residual > residual_cap {
        return Err(CanonicalError::InconsistentCoefficients {
            residual,
            cap: residual_cap,
        });
    }
    let basis = row_space_basis(&a);
    let pinned: Vec<bool> = (0..p)
        .map(|k| {
            let coord = basis.row(k);
            coord.norm_squared() > 1.0 - 1e-9
        })
        .collect();

    let mut c: Vec<f64> = d.iter().map(|v| v.exp()).collect();
    for s in 0..layout.num_states() {
        let zero: Vec<usize> = layout.state_pairs(s).filter(|&k| e[k] == 0.0).collect();
        let fixed: f64 = zero.iter().filter(|&&k| pinned[k]).map(|&k| c[k]).sum();
        let free: Vec<usize> = zero.iter().copied().filter(|&k| !pinned[k]).collect();
        let rest = 1.0 - fixed;
        if !free.is_empty() && rest > 0.0 {
            for &k in &free {
                c[k] = rest / free.len() as f64;
            }
        } else {
            let total: f64 = zero.iter().map(|&k| c[k]).sum();
            for &k in &zero {
                c[k] /= total;
            }
        }
    }
    let d_final = DVector::from_iterator(p, c.iter().map(|v| v.ln()));
    Ok(CoefficientFit {
        normalized_residual: max_residual(&d_final),
        c,
        residual,
        pinned,
    })
}

/// Rounds `e` to the nearest multiples of `1/n` and keeps the result only
/// if it still satisfies the exponent system of `l` (strict rows with slack
/// above [`STRICT_SLACK`]).
pub fn rationalize(e: &[f64], n: u32, l: &LimitVector) -> Result<Vec<f64>, CanonicalError> {
    let system = ExponentSystem::from_limits(l)?;
    rationalize_against(e, n, &system)
}

fn rationalize_against(e: &[f64], n: u32, system: &ExponentSystem) -> Result<Vec<f64>, CanonicalError> {
    if n == 0 {
        return Err(CanonicalError::Denominator);
    }
    let nf = n as f64;
    let rounded: Vec<f64> = e.iter().map(|v| ((v * nf).round() / nf).max(0.0)).collect();
    match system.first_broken(&rounded, STRICT_SLACK, EXPONENT_SUM_TOLERANCE) {
        None => Ok(rounded),
        Some((row, sum)) => Err(CanonicalError::Rationalize {
            n,
            index: row.source.to_string(),
            sum,
        }),
    }
}

/// Denominator bound `|Ω| |I|^√(|Ω||I|)` sufficient for rational exponents
/// to exist, with `|I|` the largest action count.
pub fn suggested_denominator_cap(layout: &PairLayout) -> f64 {
    let states = layout.num_states() as f64;
    let actions = layout.counts().iter().copied().max().unwrap_or(1) as f64;
    states * actions.powf((states * actions).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub strategy: CanonicalStrategy,
    /// Smallest strict slack of the exponent system at the chosen `e`.
    pub slack: f64,
    /// Denominator of the exponents if rationalization succeeded.
    pub denominator: Option<u32>,
    pub coefficients: CoefficientFit,
}

/// Fits `(c, e) ∈ X` whose limit vector reproduces `l`: classes on every
/// index, finite values within [`FIT_VALUE_TOLERANCE`].
pub fn fit(l: &LimitVector, layout: &PairLayout) -> Result<FitReport, CanonicalError> {
    fit_with(l, layout, RESIDUAL_CAP)
}

pub fn fit_with(l: &LimitVector, layout: &PairLayout, residual_cap: f64) -> Result<FitReport, CanonicalError> {
    l.check_layout(layout).map_err(|err| CanonicalError::Shape(err.to_string()))?;
    reject_value_violations(l)?;
    let system = ExponentSystem::from_limits(l)?;
    let (raw, raw_slack) = match solve_exponents(system.clone())? {
        ExponentOutcome::Solved { e, slack } => (e, slack),
        ExponentOutcome::Infeasible(cert) => return Err(CanonicalError::Infeasible(cert)),
    };
    let (e, denominator) = (1..=MAX_RATIONAL_DENOMINATOR)
        .find_map(|n| rationalize_against(&raw, n, &system).ok().map(|e| (e, Some(n))))
        .unwrap_or((raw, None));
    let slack = if denominator.is_some() {
        system.evaluate(&e).0
    } else {
        raw_slack
    };
    let coefficients = fit_coefficients(l, layout, &e, residual_cap)?;
    let strategy = CanonicalStrategy::new(layout.clone(), coefficients.c.clone(), e)?;
    check_reproduces(&strategy, l)?;
    Ok(FitReport {
        strategy,
        slack,
        denominator,
        coefficients,
    })
}

fn describe(class: &LimitClass) -> String {
    match class {
        LimitClass::Finite(v) => format!("Finite({v:e})"),
        other => other.name().to_string(),
    }
}

/// Checks the fit postcondition of `xc` against `l`.
pub fn check_reproduces(xc: &CanonicalStrategy, l: &LimitVector) -> Result<(), CanonicalError> {
    let log_c: Vec<f64> = xc.c.iter().map(|v| v.ln()).collect();
    for entry in l.iter() {
        let got = xc.limit_class(&entry.index, &log_c);
        let ok = match (&entry.class, &got) {
            (LimitClass::Finite(a), LimitClass::Finite(b)) => relative_close(*a, *b, FIT_VALUE_TOLERANCE),
            (a, b) => a.name() == b.name(),
        };
        if !ok {
            return Err(CanonicalError::Postcondition {
                index: entry.index.to_string(),
                expected: describe(&entry.class),
                got: describe(&got),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monomials::{enumerate_m, DEFAULT_ENUMERATION_CAP};

    fn big_match_xc() -> CanonicalStrategy {
        CanonicalStrategy::from_rows(
            vec![vec![1.0, 1.0], vec![1.0], vec![1.0]],
            vec![vec![0.0, 1.0], vec![0.0], vec![0.0]],
        )
        .unwrap()
    }

    #[test]
    fn membership_checks() {
        assert!(matches!(
            CanonicalStrategy::from_rows(vec![vec![0.5, 0.5]], vec![vec![1.0, 1.0]]),
            Err(CanonicalError::NoZeroExponent(0))
        ));
        assert!(matches!(
            CanonicalStrategy::from_rows(vec![vec![0.5, 0.4]], vec![vec![0.0, 0.0]]),
            Err(CanonicalError::ZeroMass { .. })
        ));
        assert!(matches!(
            CanonicalStrategy::from_rows(vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]]),
            Err(CanonicalError::Coefficient { .. })
        ));
        assert!(matches!(
            CanonicalStrategy::from_rows(vec![vec![1.0, 1.0]], vec![vec![0.0, -1.0]]),
            Err(CanonicalError::Exponent { .. })
        ));
    }

    #[test]
    fn instantiation() {
        let flat = CanonicalStrategy::from_rows(vec![vec![0.3, 0.7]], vec![vec![0.0, 0.0]]).unwrap();
        for lambda in [1.0, 0.1, 1e-9] {
            let x = flat.instantiate(lambda);
            assert!((x.row(0)[0] - 0.3).abs() < 1e-15);
        }
        let xc = big_match_xc();
        for lambda in [1.0, 0.25, 1e-3] {
            let x = xc.instantiate(lambda);
            assert!((x.row(0)[1] - lambda / (1.0 + lambda)).abs() < 1e-15);
            assert!((x.row(0).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let lambda = 1e-8;
        let x = xc.instantiate(lambda);
        assert!((x.row(0)[1] / lambda - 1.0).abs() < 1e-4);
    }

    #[test]
    fn big_match_limits() {
        let xc = big_match_xc();
        let bottom = MonomialIndex::single(4, 1, 1, -1);
        let bottom0 = MonomialIndex::single(4, 1, 1, 0);
        let l = xc.limit_vector(&[MonomialIndex::unit(4), bottom.clone(), bottom0.clone()]).unwrap();
        assert_eq!(l.get(&MonomialIndex::unit(4)), Some(&LimitClass::Finite(1.0)));
        assert_eq!(l.get(&bottom), Some(&LimitClass::Finite(1.0)));
        assert_eq!(l.get(&bottom0), Some(&LimitClass::Zero));
    }

    #[test]
    fn analytic_limit_vector_passes_property_checks() {
        let xc = CanonicalStrategy::from_rows(
            vec![vec![0.4, 0.6, 2.0], vec![1.5, 1.0]],
            vec![vec![0.0, 0.0, 0.5], vec![1.25, 0.0]],
        )
        .unwrap();
        let idx = enumerate_m(xc.layout(), DEFAULT_ENUMERATION_CAP).unwrap();
        let l = xc.limit_vector(&idx).unwrap();
        assert!(check_properties(&l).is_empty());
    }

    #[test]
    fn exponent_round_trip_single_state() {
        let xc = CanonicalStrategy::from_rows(vec![vec![1.0, 3.0]], vec![vec![0.0, 1.0]]).unwrap();
        let idx = enumerate_m(xc.layout(), DEFAULT_ENUMERATION_CAP).unwrap();
        let l = xc.limit_vector(&idx).unwrap();
        match fit_exponents(&l).unwrap() {
            ExponentOutcome::Solved { e, slack } => {
                assert_eq!(e, vec![0.0, 1.0]);
                assert!(slack > STRICT_SLACK);
            }
            other => panic!("{other:?}"),
        }
        let report = fit(&l, xc.layout()).unwrap();
        assert_eq!(report.denominator, Some(1));
        assert!((report.strategy.c(0, 1) - 3.0).abs() < 1e-9);
    }

    #[test]
    fn unit_only_limit_vector() {
        let mut l = LimitVector::new();
        l.insert(MonomialIndex::unit(2), LimitClass::Finite(1.0)).unwrap();
        match fit_exponents(&l).unwrap() {
            ExponentOutcome::Solved { e, slack } => {
                assert_eq!(e, vec![0.0, 0.0]);
                assert!(slack.is_infinite() || slack >= 1.0);
            }
            other => panic!("{other:?}"),
        }
        let layout = PairLayout::new(vec![2]).unwrap();
        let cf = fit_coefficients(&l, &layout, &[0.0, 0.0], RESIDUAL_CAP).unwrap();
        assert_eq!(cf.c, vec![0.5, 0.5]);
        assert_eq!(cf.pinned, vec![false, false]);
    }

    #[test]
    fn single_finite_coordinate() {
        let layout = PairLayout::new(vec![2]).unwrap();
        let mut l = LimitVector::new();
        l.insert(MonomialIndex::unit(2), LimitClass::Finite(1.0)).unwrap();
        l.insert(MonomialIndex::single(2, 0, 1, 0), LimitClass::Finite(0.3)).unwrap();
        let cf = fit_coefficients(&l, &layout, &[0.0, 0.0], RESIDUAL_CAP).unwrap();
        assert!((cf.c[0] - 0.3).abs() < 1e-12);
        assert!((cf.c[1] - 0.7).abs() < 1e-12);
        assert_eq!(cf.pinned, vec![true, false]);
    }

    #[test]
    fn contradictory_zero_pair_has_certificate() {
        let idx = MonomialIndex::single(2, 0, 1, 0);
        let mut l = LimitVector::new();
        l.insert(MonomialIndex::unit(2), LimitClass::Finite(1.0)).unwrap();
        l.insert(idx.clone(), LimitClass::Zero).unwrap();
        l.insert(idx.negate(), LimitClass::Zero).unwrap();
        match fit_exponents(&l).unwrap() {
            ExponentOutcome::Infeasible(cert) => {
                let gap = cert.verify().unwrap();
                assert!(gap > CERTIFICATE_TOLERANCE);
                assert!(cert.support().len() >= 2);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(fit(&l, &PairLayout::new(vec![2]).unwrap()), Err(CanonicalError::Infeasible(_))));
    }

    #[test]
    fn value_violations_are_rejected() {
        let idx = MonomialIndex::single(2, 0, 1, 0);
        let mut l = LimitVector::new();
        l.insert(MonomialIndex::unit(2), LimitClass::Finite(1.0)).unwrap();
        l.insert(idx.clone(), LimitClass::Finite(2.0)).unwrap();
        l.insert(idx.negate(), LimitClass::Finite(3.0)).unwrap();
        assert!(matches!(fit_exponents(&l), Err(CanonicalError::Properties(_))));
    }

    #[test]
    fn undetermined_is_rejected() {
        let mut l = LimitVector::new();
        l.insert(MonomialIndex::unit(1), LimitClass::Finite(1.0)).unwrap();
        l.insert(
            MonomialIndex::single(1, 0, 1, 0),
            LimitClass::Undetermined(crate::monomials::Diagnostic {
                slope: 0.5,
                band: [0.0, 1.0],
                reason: "test".into(),
            }),
        )
        .unwrap();
        assert!(matches!(fit_exponents(&l), Err(CanonicalError::Undetermined { count: 1, .. })));
    }

    #[test]
    fn rationalization() {
        let xc = CanonicalStrategy::from_rows(vec![vec![1.0, 1.0]], vec![vec![0.0, 0.5]]).unwrap();
        let idx = enumerate_m(xc.layout(), DEFAULT_ENUMERATION_CAP).unwrap();
        let l = xc.limit_vector(&idx).unwrap();
        assert_eq!(rationalize(&[0.0, 0.5], 2, &l).unwrap(), vec![0.0, 0.5]);
        // 0.5 rounds to 1 at N = 1; the strict row (A=(0,-1), a=1) then fails
        assert!(matches!(rationalize(&[0.0, 0.5], 1, &l), Err(CanonicalError::Rationalize { n: 1, .. })));
        let int = CanonicalStrategy::from_rows(vec![vec![1.0, 1.0]], vec![vec![0.0, 1.0]]).unwrap();
        let l = int.limit_vector(&enumerate_m(int.layout(), DEFAULT_ENUMERATION_CAP).unwrap()).unwrap();
        for n in 1..5 {
            assert_eq!(rationalize(&[0.0, 1.0], n, &l).unwrap(), vec![0.0, 1.0]);
        }
        assert!(matches!(rationalize(&[0.0], 0, &l), Err(CanonicalError::Denominator)));
    }

    #[test]
    fn json_round_trip() {
        let xc = big_match_xc();
        let text = xc.to_json();
        assert!(text.contains("\"action\""));
        assert_eq!(CanonicalStrategy::from_json(&text).unwrap(), xc);
        assert!(CanonicalStrategy::from_json(r#"[[{"action": 1, "c": 1.0, "e": 0.0}]]"#).is_err());
    }
}
