//! Dense two-phase simplex with Bland's rule.
//!
//! Every solve ends in one of three verifiable states: an optimal vertex
//! with dual multipliers, a Farkas certificate of infeasibility, or a
//! direction of unboundedness.

use serde::{Deserialize, Serialize};
use thiserror::Error;

const REDUCED_COST_EPS: f64 = 1e-10;
const PIVOT_EPS: f64 = 1e-9;
const FEASIBILITY_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    /// Amount by which `x` violates the constraint (zero when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs: f64 = self.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// `maximize c·x` subject to tagged rows, with optional per-variable lower
/// bounds (variables are free by default).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    constraints: Vec<Constraint>,
    lower: Vec<Option<f64>>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("constraint {row} has {got} coefficients, expected {expected}")]
    Dimension {
        row: usize,
        expected: usize,
        got: usize,
    },
    #[error("non-finite data in {0}")]
    NonFinite(String),
    #[error("simplex exceeded {limit} pivots in phase {phase} (objective {objective})")]
    PivotLimit {
        limit: usize,
        phase: u8,
        objective: f64,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertificateError {
    #[error("certificate has {got} multipliers for {expected} constraints")]
    Length { expected: usize, got: usize },
    #[error("certificate is identically zero")]
    Zero,
    #[error("multiplier {row} = {value} has the wrong sign for an inequality row")]
    Sign { row: usize, value: f64 },
    #[error("combined coefficient {value} on variable {var} is not admissible")]
    Coefficient { var: usize, value: f64 },
    #[error("combined row is not contradictory (gap {gap})")]
    NoContradiction { gap: f64 },
}

impl LinearProgram {
    pub fn maximize(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            constraints: vec![],
            lower: vec![None; n],
        }
    }

    /// A pure feasibility problem (zero objective).
    pub fn feasibility(num_vars: usize) -> Self {
        Self::maximize(vec![0.0; num_vars])
    }

    pub fn with_lower_bounds(mut self, bound: f64) -> Self {
        self.lower = vec![Some(bound); self.objective.len()];
        self
    }

    pub fn set_lower_bound(&mut self, var: usize, bound: Option<f64>) {
        self.lower[var] = bound;
    }

    pub fn add(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> usize {
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
        self.constraints.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn lower_bound(&self, var: usize) -> Option<f64> {
        self.lower[var]
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest violation of any row or bound by `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self
            .constraints
            .iter()
            .map(|c| c.violation(x))
            .fold(0.0, f64::max);
        let bounds = self
            .lower
            .iter()
            .zip(x)
            .filter_map(|(l, v)| l.map(|l| (l - v).max(0.0)))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }

    /// Same variables and bounds, restricted to the given rows.
    pub fn subset(&self, rows: &[usize]) -> LinearProgram {
        LinearProgram {
            objective: self.objective.clone(),
            constraints: rows.iter().map(|&r| self.constraints[r].clone()).collect(),
            lower: self.lower.clone(),
        }
    }

    fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(LpError::NonFinite("objective".into()));
        }
        for (j, l) in self.lower.iter().enumerate() {
            if matches!(l, Some(v) if !v.is_finite()) {
                return Err(LpError::NonFinite(format!("lower bound of variable {j}")));
            }
        }
        for (row, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(LpError::Dimension {
                    row,
                    expected: n,
                    got: c.coeffs.len(),
                });
            }
            if !c.rhs.is_finite() || c.coeffs.iter().any(|a| !a.is_finite()) {
                return Err(LpError::NonFinite(format!("constraint {row}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// One multiplier per row: `≥ 0` on `≤` rows, `≤ 0` on `≥` rows.
    pub duals: Vec<f64>,
}

impl LpSolution {
    /// Objective of the dual problem at `duals`; equals `objective` at optimality.
    pub fn dual_objective(&self, lp: &LinearProgram) -> f64 {
        let mut value: f64 = lp
            .constraints
            .iter()
            .zip(&self.duals)
            .map(|(c, y)| y * c.rhs)
            .sum();
        for j in 0..lp.num_vars() {
            if let Some(l) = lp.lower[j] {
                let reduced = lp.objective[j]
                    - lp
                        .constraints
                        .iter()
                        .zip(&self.duals)
                        .map(|(c, y)| y * c.coeffs[j])
                        .sum::<f64>();
                value += reduced * l;
            }
        }
        value
    }
}

/// Multipliers `μ` over the rows proving that no point satisfies them all.
///
/// Rows are combined as `Σ μ_k s_k (a_k·x) ≤ Σ μ_k s_k b_k` with `s_k = -1`
/// on `≥` rows and `+1` otherwise; `μ_k ≥ 0` on inequality rows. The
/// combined coefficients vanish on free variables and are nonnegative on
/// lower-bounded ones, while the combined right-hand side falls below the
/// smallest value the left side can take.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FarkasCertificate {
    pub multipliers: Vec<f64>,
}

impl FarkasCertificate {
    /// Combined coefficient row and right-hand side.
    pub fn combination(&self, lp: &LinearProgram) -> (Vec<f64>, f64) {
        let mut row = vec![0.0; lp.num_vars()];
        let mut rhs = 0.0;
        for (c, &mu) in lp.constraints.iter().zip(&self.multipliers) {
            let s = if c.relation == Relation::Ge { -1.0 } else { 1.0 };
            for (r, a) in row.iter_mut().zip(&c.coeffs) {
                *r += mu * s * a;
            }
            rhs += mu * s * c.rhs;
        }
        (row, rhs)
    }

    /// Checks the certificate at relative tolerance `tol` after scaling the
    /// multipliers to unit max-norm. Returns the contradiction gap.
    pub fn verify(&self, lp: &LinearProgram, tol: f64) -> Result<f64, CertificateError> {
        if self.multipliers.len() != lp.num_constraints() {
            return Err(CertificateError::Length {
                expected: lp.num_constraints(),
                got: self.multipliers.len(),
            });
        }
        let scale = self.multipliers.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return Err(CertificateError::Zero);
        }
        let unit = FarkasCertificate {
            multipliers: self.multipliers.iter().map(|m| m / scale).collect(),
        };
        for (row, (c, &mu)) in lp.constraints.iter().zip(&unit.multipliers).enumerate() {
            if c.relation != Relation::Eq && mu < -tol {
                return Err(CertificateError::Sign { row, value: mu });
            }
        }
        let (row, rhs) = unit.combination(lp);
        let mut lhs_min = 0.0;
        for (var, &r) in row.iter().enumerate() {
            let magnitude: f64 = lp
                .constraints
                .iter()
                .zip(&unit.multipliers)
                .map(|(c, mu)| (mu * c.coeffs[var]).abs())
                .sum::<f64>()
                .max(1.0);
            match lp.lower[var] {
                None if r.abs() > tol * magnitude => {
                    return Err(CertificateError::Coefficient { var, value: r })
                }
                Some(_) if r < -tol * magnitude => {
                    return Err(CertificateError::Coefficient { var, value: r })
                }
                Some(l) => lhs_min += r.max(0.0) * l,
                None => {}
            }
        }
        let gap = lhs_min - rhs;
        if gap > tol {
            Ok(gap)
        } else {
            Err(CertificateError::NoContradiction { gap })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible(FarkasCertificate),
    Unbounded,
}

impl LpOutcome {
    pub fn optimal(self) -> Option<LpSolution> {
        match self {
            LpOutcome::Optimal(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub max_pivots: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self { max_pivots: 200_000 }
    }
}

/// Solves `lp` with default options.
pub fn lp_solve(lp: &LinearProgram) -> Result<LpOutcome, LpError> {
    lp_solve_with(lp, SimplexOptions::default())
}

enum VarColumn {
    Shifted { col: usize, lower: f64 },
    Split { pos: usize, neg: usize },
}

struct Tableau {
    rows: usize,
    cols: usize,
    // row-major, `cols + 1` entries per row, right-hand side last
    data: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * (self.cols + 1) + c]
    }

    #[inline]
    fn rhs(&self, r: usize) -> f64 {
        self.data[r * (self.cols + 1) + self.cols]
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.cols + 1;
        let p = self.data[pr * w + pc];
        for v in &mut self.data[pr * w..(pr + 1) * w] {
            *v /= p;
        }
        let pivot_row: Vec<f64> = self.data[pr * w..(pr + 1) * w].to_vec();
        for r in 0..self.rows {
            if r == pr {
                continue;
            }
            let f = self.data[r * w + pc];
            if f != 0.0 {
                for (v, pv) in self.data[r * w..(r + 1) * w].iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                self.data[r * w + pc] = 0.0;
            }
        }
        self.basis[pr] = pc;
    }

    fn objective(&self, cost: &[f64]) -> f64 {
        (0..self.rows).map(|r| cost[self.basis[r]] * self.rhs(r)).sum()
    }

    /// Maximizes `cost` over the current basis. Returns `false` on unboundedness.
    fn run(
        &mut self,
        cost: &[f64],
        allowed: &[bool],
        pivots: &mut usize,
        limit: usize,
        phase: u8,
    ) -> Result<bool, LpError> {
        let mut is_basic = vec![false; self.cols];
        for &b in &self.basis {
            is_basic[b] = true;
        }
        loop {
            // Bland: lowest-index improving column
            let mut entering = None;
            for j in 0..self.cols {
                if is_basic[j] || !allowed[j] {
                    continue;
                }
                let mut d = cost[j];
                for r in 0..self.rows {
                    let a = self.at(r, j);
                    if a != 0.0 {
                        d -= cost[self.basis[r]] * a;
                    }
                }
                if d > REDUCED_COST_EPS {
                    entering = Some(j);
                    break;
                }
            }
            let Some(pc) = entering else {
                return Ok(true);
            };

            let mut leaving: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, pc);
                if a > PIVOT_EPS {
                    let ratio = self.rhs(r).max(0.0) / a;
                    leaving = match leaving {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            let tie = (ratio - lratio).abs() <= 1e-12 * (1.0 + lratio.abs());
                            if (tie && self.basis[r] < self.basis[lr]) || (!tie && ratio < lratio) {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            let Some((pr, _)) = leaving else {
                return Ok(false);
            };

            *pivots += 1;
            if *pivots > limit {
                return Err(LpError::PivotLimit {
                    limit,
                    phase,
                    objective: self.objective(cost),
                });
            }
            is_basic[self.basis[pr]] = false;
            is_basic[pc] = true;
            self.pivot(pr, pc);
        }
    }

    /// `c_B^T B^{-1}` read off the columns that formed the initial identity basis.
    fn duals(&self, cost: &[f64], initial: &[usize]) -> Vec<f64> {
        initial
            .iter()
            .map(|&col| {
                (0..self.rows)
                    .map(|k| cost[self.basis[k]] * self.at(k, col))
                    .sum()
            })
            .collect()
    }
}

pub fn lp_solve_with(lp: &LinearProgram, options: SimplexOptions) -> Result<LpOutcome, LpError> {
    lp.validate()?;
    let m = lp.num_constraints();

    let mut vars = Vec::with_capacity(lp.num_vars());
    let mut n_struct = 0;
    for j in 0..lp.num_vars() {
        match lp.lower[j] {
            Some(lower) => {
                vars.push(VarColumn::Shifted { col: n_struct, lower });
                n_struct += 1;
            }
            None => {
                vars.push(VarColumn::Split {
                    pos: n_struct,
                    neg: n_struct + 1,
                });
                n_struct += 2;
            }
        }
    }
    let n_slack = lp
        .constraints
        .iter()
        .filter(|c| c.relation != Relation::Eq)
        .count();

    // row signs and which rows need an artificial column
    let mut sigma = vec![1.0; m];
    let mut shifted_rhs = vec![0.0; m];
    let mut slack_of = vec![None; m];
    let mut next_slack = n_struct;
    let mut needs_artificial = vec![false; m];
    for (k, c) in lp.constraints.iter().enumerate() {
        let mut b = c.rhs;
        for (j, v) in vars.iter().enumerate() {
            if let VarColumn::Shifted { lower, .. } = v {
                b -= c.coeffs[j] * lower;
            }
        }
        shifted_rhs[k] = b;
        if b < 0.0 {
            sigma[k] = -1.0;
        }
        let slack_sign = match c.relation {
            Relation::Le => Some(1.0),
            Relation::Ge => Some(-1.0),
            Relation::Eq => None,
        };
        if let Some(s) = slack_sign {
            slack_of[k] = Some((next_slack, s));
            next_slack += 1;
        }
        needs_artificial[k] = !matches!(slack_sign, Some(s) if s * sigma[k] > 0.0);
    }
    let n_art = needs_artificial.iter().filter(|&&a| a).count();
    let cols = n_struct + n_slack + n_art;

    let w = cols + 1;
    let mut t = Tableau {
        rows: m,
        cols,
        data: vec![0.0; m * w],
        basis: vec![0; m],
    };
    let mut initial = vec![0; m];
    let mut next_art = n_struct + n_slack;
    for (k, c) in lp.constraints.iter().enumerate() {
        let s = sigma[k];
        let row = &mut t.data[k * w..(k + 1) * w];
        for (j, v) in vars.iter().enumerate() {
            let a = c.coeffs[j] * s;
            match *v {
                VarColumn::Shifted { col, .. } => row[col] = a,
                VarColumn::Split { pos, neg } => {
                    row[pos] = a;
                    row[neg] = -a;
                }
            }
        }
        if let Some((col, sign)) = slack_of[k] {
            row[col] = sign * s;
        }
        row[cols] = shifted_rhs[k] * s;
        if needs_artificial[k] {
            row[next_art] = 1.0;
            initial[k] = next_art;
            next_art += 1;
        } else {
            initial[k] = slack_of[k].expect("slack row").0;
        }
        t.basis[k] = initial[k];
    }

    let is_artificial = |j: usize| j >= n_struct + n_slack;
    let mut pivots = 0;

    if n_art > 0 {
        let cost1: Vec<f64> = (0..cols)
            .map(|j| if is_artificial(j) { -1.0 } else { 0.0 })
            .collect();
        let allowed = vec![true; cols];
        t.run(&cost1, &allowed, &mut pivots, options.max_pivots, 1)?;
        let phase1 = t.objective(&cost1);
        let scale = 1.0 + shifted_rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if phase1 < -FEASIBILITY_EPS * scale {
            let y = t.duals(&cost1, &initial);
            let multipliers = lp
                .constraints
                .iter()
                .enumerate()
                .map(|(k, c)| {
                    let w_k = -sigma[k] * y[k];
                    let mu = if c.relation == Relation::Ge { w_k } else { -w_k };
                    if c.relation != Relation::Eq && mu < 0.0 && mu > -1e-12 {
                        0.0
                    } else {
                        mu
                    }
                })
                .collect();
            return Ok(LpOutcome::Infeasible(FarkasCertificate { multipliers }));
        }
        // drive zero-level artificials out of the basis where possible
        for r in 0..m {
            if is_artificial(t.basis[r]) {
                if let Some(j) = (0..n_struct + n_slack).find(|&j| t.at(r, j).abs() > PIVOT_EPS) {
                    t.pivot(r, j);
                }
            }
        }
    }

    let mut cost2 = vec![0.0; cols];
    let mut constant = 0.0;
    for (j, v) in vars.iter().enumerate() {
        let c = lp.objective[j];
        match *v {
            VarColumn::Shifted { col, lower } => {
                cost2[col] = c;
                constant += c * lower;
            }
            VarColumn::Split { pos, neg } => {
                cost2[pos] = c;
                cost2[neg] = -c;
            }
        }
    }
    let allowed: Vec<bool> = (0..cols).map(|j| !is_artificial(j)).collect();
    if !t.run(&cost2, &allowed, &mut pivots, options.max_pivots, 2)? {
        return Ok(LpOutcome::Unbounded);
    }

    let mut z = vec![0.0; cols];
    for r in 0..m {
        z[t.basis[r]] = t.rhs(r);
    }
    let x: Vec<f64> = vars
        .iter()
        .map(|v| match *v {
            VarColumn::Shifted { col, lower } => lower + z[col],
            VarColumn::Split { pos, neg } => z[pos] - z[neg],
        })
        .collect();
    let y = t.duals(&cost2, &initial);
    let duals = (0..m).map(|k| sigma[k] * y[k]).collect();
    let objective = t.objective(&cost2) + constant;
    Ok(LpOutcome::Optimal(LpSolution {
        x,
        objective,
        duals,
    }))
}

/// Solves `lp` by row generation: starts from the `initial` rows and adds up
/// to `batch` of the most violated remaining rows per round. Certificates
/// and duals are reported over all rows of `lp`.
pub fn lp_solve_lazy(
    lp: &LinearProgram,
    initial: &[usize],
    batch: usize,
) -> Result<LpOutcome, LpError> {
    lp.validate()?;
    let m = lp.num_constraints();
    let mut in_set = vec![false; m];
    let mut working: Vec<usize> = vec![];
    for &r in initial {
        if !in_set[r] {
            in_set[r] = true;
            working.push(r);
        }
    }
    let batch = batch.max(1);
    loop {
        working.sort_unstable();
        let sub = lp.subset(&working);
        match lp_solve(&sub)? {
            LpOutcome::Infeasible(cert) => {
                let mut multipliers = vec![0.0; m];
                for (k, &r) in working.iter().enumerate() {
                    multipliers[r] = cert.multipliers[k];
                }
                return Ok(LpOutcome::Infeasible(FarkasCertificate { multipliers }));
            }
            LpOutcome::Unbounded => {
                if working.len() == m {
                    return Ok(LpOutcome::Unbounded);
                }
                working = (0..m).collect();
                in_set = vec![true; m];
            }
            LpOutcome::Optimal(sol) => {
                let mut violated: Vec<(f64, usize)> = (0..m)
                    .filter(|&r| !in_set[r])
                    .filter_map(|r| {
                        let c = &lp.constraints[r];
                        let v = c.violation(&sol.x);
                        (v > FEASIBILITY_EPS * (1.0 + c.rhs.abs())).then_some((v, r))
                    })
                    .collect();
                if violated.is_empty() {
                    let mut duals = vec![0.0; m];
                    for (k, &r) in working.iter().enumerate() {
                        duals[r] = sol.duals[k];
                    }
                    return Ok(LpOutcome::Optimal(LpSolution {
                        x: sol.x,
                        objective: sol.objective,
                        duals,
                    }));
                }
                violated.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
                for &(_, r) in violated.iter().take(batch) {
                    in_set[r] = true;
                    working.push(r);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_upper_bound() {
        let mut lp = LinearProgram::maximize(vec![1.0]);
        lp.add(vec![1.0], Relation::Le, 3.0);
        let sol = lp_solve(&lp).unwrap().optimal().unwrap();
        assert!((sol.x[0] - 3.0).abs() < 1e-12);
        assert!((sol.objective - 3.0).abs() < 1e-12);
        assert!((sol.duals[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn forced_contradiction() {
        let mut lp = LinearProgram::feasibility(1);
        lp.add(vec![1.0], Relation::Ge, 1.0);
        lp.add(vec![1.0], Relation::Le, 0.0);
        match lp_solve(&lp).unwrap() {
            LpOutcome::Infeasible(cert) => {
                let scale = cert.multipliers[0];
                assert!(scale > 0.0);
                assert!((cert.multipliers[1] / scale - 1.0).abs() < 1e-12);
                let gap = cert.verify(&lp, 1e-8).unwrap();
                assert!((gap - 1.0).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn two_variable_max_min() {
        // maximize t s.t. e - t >= 0, -e + 1 - t >= 0, e >= 0
        let mut lp = LinearProgram::maximize(vec![0.0, 1.0]);
        lp.set_lower_bound(0, Some(0.0));
        lp.add(vec![1.0, -1.0], Relation::Ge, 0.0);
        lp.add(vec![-1.0, -1.0], Relation::Ge, -1.0);
        let sol = lp_solve(&lp).unwrap().optimal().unwrap();
        assert!((sol.x[1] - 0.5).abs() < 1e-12);
        assert!((sol.x[0] - 0.5).abs() < 1e-12);
        assert!((sol.dual_objective(&lp) - sol.objective).abs() < 1e-12);
    }

    #[test]
    fn unbounded() {
        let mut lp = LinearProgram::maximize(vec![1.0, 0.0]);
        lp.add(vec![0.0, 1.0], Relation::Le, 1.0);
        assert_eq!(lp_solve(&lp).unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn equality_and_bounds() {
        // x + y = 2, x >= 0.5, y >= 0; maximize -x  -> x = 0.5
        let mut lp = LinearProgram::maximize(vec![-1.0, 0.0]);
        lp.set_lower_bound(0, Some(0.5));
        lp.set_lower_bound(1, Some(0.0));
        lp.add(vec![1.0, 1.0], Relation::Eq, 2.0);
        let sol = lp_solve(&lp).unwrap().optimal().unwrap();
        assert!((sol.x[0] - 0.5).abs() < 1e-12 && (sol.x[1] - 1.5).abs() < 1e-12);
        assert!((sol.dual_objective(&lp) - sol.objective).abs() < 1e-12);
    }

    #[test]
    fn infeasible_with_bounds() {
        // x >= 0, x <= -1
        let mut lp = LinearProgram::feasibility(1).with_lower_bounds(0.0);
        lp.add(vec![1.0], Relation::Le, -1.0);
        match lp_solve(&lp).unwrap() {
            LpOutcome::Infeasible(cert) => {
                cert.verify(&lp, 1e-8).unwrap();
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::maximize(vec![1.0, 1.0]).with_lower_bounds(0.0);
        lp.add(vec![1.0, 1.0], Relation::Eq, 1.0);
        lp.add(vec![2.0, 2.0], Relation::Eq, 2.0);
        lp.add(vec![1.0, 0.0], Relation::Le, 0.25);
        let sol = lp_solve(&lp).unwrap().optimal().unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-12);
        assert!(lp.max_violation(&sol.x) < 1e-12);
    }

    #[test]
    fn bad_certificates_are_rejected() {
        let mut lp = LinearProgram::feasibility(1);
        lp.add(vec![1.0], Relation::Ge, 1.0);
        lp.add(vec![1.0], Relation::Le, 0.0);
        let zero = FarkasCertificate { multipliers: vec![0.0, 0.0] };
        assert_eq!(zero.verify(&lp, 1e-8), Err(CertificateError::Zero));
        let sign = FarkasCertificate { multipliers: vec![-1.0, 1.0] };
        assert!(matches!(sign.verify(&lp, 1e-8), Err(CertificateError::Sign { .. })));
        let unbalanced = FarkasCertificate { multipliers: vec![1.0, 2.0] };
        assert!(matches!(unbalanced.verify(&lp, 1e-8), Err(CertificateError::Coefficient { .. })));
    }

    #[test]
    fn lazy_matches_full() {
        // many redundant rows around a box
        let mut lp = LinearProgram::maximize(vec![1.0, 2.0]);
        for k in 0..200 {
            let a = (k as f64) / 200.0;
            lp.add(vec![a, 1.0 - a], Relation::Le, 1.0 + a * a);
        }
        lp.add(vec![1.0, 0.0], Relation::Ge, -5.0);
        lp.add(vec![0.0, 1.0], Relation::Ge, -5.0);
        let full = lp_solve(&lp).unwrap().optimal().unwrap();
        let lazy = lp_solve_lazy(&lp, &[200, 201], 5).unwrap().optimal().unwrap();
        assert!((full.objective - lazy.objective).abs() < 1e-9);
        assert!(lp.max_violation(&lazy.x) < 1e-9);
        assert!((lazy.dual_objective(&lp) - lazy.objective).abs() < 1e-8);
    }
}
