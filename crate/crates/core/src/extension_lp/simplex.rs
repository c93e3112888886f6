//! Dense two-phase simplex with Bland's rule.
//!
//! Every row gets an artificial column, so the final tableau holds `B⁻¹` in
//! those columns and the dual values can be read off the reduced costs.
//! Variables are nonnegative.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowKind {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
}

impl RowKind {
    fn flipped(self) -> Self {
        match self {
            RowKind::Le => RowKind::Ge,
            RowKind::Ge => RowKind::Le,
            RowKind::Eq => RowKind::Eq,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint<T> {
    pub coeffs: Vec<T>,
    pub kind: RowKind,
    pub rhs: T,
}

impl<T> Constraint<T> {
    pub fn new(coeffs: Vec<T>, kind: RowKind, rhs: T) -> Self {
        Self { coeffs, kind, rhs }
    }
}

/// `optimize cᵀx` subject to the rows and `x ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpProblem<T> {
    pub sense: Sense,
    pub objective: Vec<T>,
    pub constraints: Vec<Constraint<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Solver outcome with its certificate.
///
/// * `Optimal`: `duals` satisfy `objective = bᵀy`, and `Aᵀy ≤ c` when
///   minimizing (`Aᵀy ≥ c` when maximizing).
/// * `Infeasible`: `certificate` satisfies `Aᵀy ≥ 0`, `y_i ≥ 0` on `≤` rows,
///   `y_i ≤ 0` on `≥` rows and `bᵀy < 0`.
/// * `Unbounded`: `ray` is a feasible direction (`x ≥ 0` preserved, rows
///   unchanged) along which the objective improves without bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum LpSolution<T> {
    Optimal { x: Vec<T>, duals: Vec<T>, objective: T },
    Infeasible { certificate: Vec<T> },
    Unbounded { ray: Vec<T> },
}

impl<T: Scalar> LpSolution<T> {
    pub fn status(&self) -> LpStatus {
        match self {
            LpSolution::Optimal { .. } => LpStatus::Optimal,
            LpSolution::Infeasible { .. } => LpStatus::Infeasible,
            LpSolution::Unbounded { .. } => LpStatus::Unbounded,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("row {row} has {got} coefficients, expected {expected}")]
    DimensionMismatch { row: usize, got: usize, expected: usize },
    #[error("non-finite problem data")]
    NonFinite,
    #[error("simplex pivot budget exhausted")]
    IterationLimit,
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerances<T> {
    pub pivot: T,
    pub feasibility: T,
}

impl<T: Scalar> Default for Tolerances<T> {
    fn default() -> Self {
        Self {
            pivot: T::tol(1e-10, 100.0),
            feasibility: T::tol(1e-8, 1000.0),
        }
    }
}

pub fn solve_lp<T: Scalar>(p: &LpProblem<T>) -> Result<LpSolution<T>, LpError> {
    solve_lp_with(p, Tolerances::default())
}

struct Tableau<T> {
    rows: Vec<Vec<T>>,
    obj: Vec<T>,
    basis: Vec<usize>,
    width: usize,
}

impl<T: Scalar> Tableau<T> {
    fn rhs(&self, i: usize) -> T {
        self.rows[i][self.width]
    }

    fn pivot(&mut self, r: usize, e: usize) {
        let inv = T::one() / self.rows[r][e];
        for v in self.rows[r].iter_mut() {
            *v *= inv;
        }
        self.rows[r][e] = T::one();
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[e];
            if f != T::zero() {
                for (v, &pr) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pr;
                }
                row[e] = T::zero();
            }
        }
        let f = self.obj[e];
        if f != T::zero() {
            for (v, &pr) in self.obj.iter_mut().zip(&pivot_row) {
                *v -= f * pr;
            }
            self.obj[e] = T::zero();
        }
        self.basis[r] = e;
    }

    /// Loads costs and prices out the basic columns; the last entry holds `-z`.
    fn set_costs(&mut self, costs: &[T]) {
        self.obj = costs.to_vec();
        self.obj.push(T::zero());
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = costs[b];
            if cb != T::zero() {
                for (v, &x) in self.obj.iter_mut().zip(&self.rows[i]) {
                    *v -= cb * x;
                }
            }
        }
    }

    /// Runs Bland's rule over the allowed columns.
    fn optimize(
        &mut self,
        allowed: impl Fn(usize) -> bool,
        opt_tol: T,
        pivot_tol: T,
        budget: &mut usize,
    ) -> Result<Option<usize>, LpError> {
        loop {
            let Some(e) = (0..self.width).find(|&j| allowed(j) && self.obj[j] < -opt_tol) else {
                return Ok(None);
            };
            let mut leave: Option<(usize, T)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][e];
                if a > pivot_tol {
                    let ratio = self.rhs(i) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((r, best)) => {
                            let tie = (ratio - best).abs() <= T::epsilon() * T::lit(64.0) * (T::one() + best.abs());
                            if (!tie && ratio < best) || (tie && self.basis[i] < self.basis[r]) {
                                Some((i, ratio))
                            } else {
                                Some((r, best))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Ok(Some(e));
            };
            if *budget == 0 {
                return Err(LpError::IterationLimit);
            }
            *budget -= 1;
            self.pivot(r, e);
        }
    }
}

pub fn solve_lp_with<T: Scalar>(p: &LpProblem<T>, tol: Tolerances<T>) -> Result<LpSolution<T>, LpError> {
    let n = p.objective.len();
    let m = p.constraints.len();
    for (row, c) in p.constraints.iter().enumerate() {
        if c.coeffs.len() != n {
            return Err(LpError::DimensionMismatch {
                row,
                got: c.coeffs.len(),
                expected: n,
            });
        }
        if !c.rhs.is_finite() || c.coeffs.iter().any(|v| !v.is_finite()) {
            return Err(LpError::NonFinite);
        }
    }
    if p.objective.iter().any(|v| !v.is_finite()) {
        return Err(LpError::NonFinite);
    }

    // normalize to b ≥ 0
    let sigma: Vec<T> = p
        .constraints
        .iter()
        .map(|c| if c.rhs < T::zero() { -T::one() } else { T::one() })
        .collect();
    let kinds: Vec<RowKind> = p
        .constraints
        .iter()
        .zip(&sigma)
        .map(|(c, &s)| if s < T::zero() { c.kind.flipped() } else { c.kind })
        .collect();
    let slack_of: Vec<Option<usize>> = {
        let mut next = n;
        kinds
            .iter()
            .map(|k| match k {
                RowKind::Eq => None,
                _ => {
                    next += 1;
                    Some(next - 1)
                }
            })
            .collect()
    };
    let n_slack = slack_of.iter().flatten().count();
    let art0 = n + n_slack;
    let width = art0 + m;

    let mut rows = Vec::with_capacity(m);
    for (i, c) in p.constraints.iter().enumerate() {
        let mut row = vec![T::zero(); width + 1];
        for (v, &a) in row.iter_mut().zip(&c.coeffs) {
            *v = sigma[i] * a;
        }
        if let Some(s) = slack_of[i] {
            row[s] = if kinds[i] == RowKind::Le { T::one() } else { -T::one() };
        }
        row[art0 + i] = T::one();
        row[width] = sigma[i] * c.rhs;
        rows.push(row);
    }
    let mut tab = Tableau {
        rows,
        obj: Vec::new(),
        basis: (art0..width).collect(),
        width,
    };
    let mut budget = 50_000 + 200 * (m + width);

    let b_scale = p.constraints.iter().fold(T::one(), |s, c| s.max(c.rhs.abs()));
    let c_scale = p.objective.iter().fold(T::one(), |s, c| s.max(c.abs()));

    // phase 1
    let mut phase1 = vec![T::zero(); width];
    for c in phase1.iter_mut().skip(art0) {
        *c = T::one();
    }
    tab.set_costs(&phase1);
    tab.optimize(|_| true, tol.pivot, tol.pivot, &mut budget)?;
    let infeasibility = -tab.obj[width];
    if infeasibility > tol.feasibility * b_scale {
        let certificate = (0..m).map(|i| -sigma[i] * (T::one() - tab.obj[art0 + i])).collect();
        return Ok(LpSolution::Infeasible { certificate });
    }

    // drive zero-level artificials out of the basis where possible
    for r in 0..m {
        if tab.basis[r] >= art0 {
            if let Some(j) = (0..art0).find(|&j| tab.rows[r][j].abs() > tol.pivot) {
                tab.pivot(r, j);
            }
        }
    }

    // phase 2
    let flip = if p.sense == Sense::Maximize {
        -T::one()
    } else {
        T::one()
    };
    let mut phase2 = vec![T::zero(); width];
    for (c, &o) in phase2.iter_mut().zip(&p.objective) {
        *c = flip * o;
    }
    tab.set_costs(&phase2);
    let opt_tol = tol.pivot * c_scale;
    if let Some(e) = tab.optimize(|j| j < art0, opt_tol, tol.pivot, &mut budget)? {
        let mut ray = vec![T::zero(); n];
        if e < n {
            ray[e] = T::one();
        }
        for (i, &b) in tab.basis.iter().enumerate() {
            if b < n {
                ray[b] = -tab.rows[i][e];
            }
        }
        return Ok(LpSolution::Unbounded { ray });
    }
    let mut x = vec![T::zero(); n];
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] = tab.rhs(i).max(T::zero());
        }
    }
    let duals = (0..m).map(|i| -flip * sigma[i] * tab.obj[art0 + i]).collect();
    let objective = p.objective.iter().zip(&x).map(|(&c, &v)| c * v).sum();
    Ok(LpSolution::Optimal { x, duals, objective })
}

/// Checks a Farkas certificate against the problem rows.
pub fn verify_farkas<T: Scalar>(p: &LpProblem<T>, y: &[T], tol: T) -> bool {
    if y.len() != p.constraints.len() {
        return false;
    }
    let n = p.objective.len();
    let mut aty = vec![T::zero(); n];
    let mut bty = T::zero();
    for (c, &yi) in p.constraints.iter().zip(y) {
        let sign_ok = match c.kind {
            RowKind::Le => yi >= -tol,
            RowKind::Ge => yi <= tol,
            RowKind::Eq => true,
        };
        if !sign_ok {
            return false;
        }
        for (v, &a) in aty.iter_mut().zip(&c.coeffs) {
            *v += a * yi;
        }
        bty += c.rhs * yi;
    }
    aty.iter().all(|&v| v >= -tol) && bty < -tol
}

/// Primal feasibility, dual feasibility and complementary slackness of an
/// optimal solution; returns the largest violation.
pub fn optimality_residual<T: Scalar>(p: &LpProblem<T>, x: &[T], y: &[T]) -> T {
    let mut worst = T::zero();
    let flip = if p.sense == Sense::Maximize {
        -T::one()
    } else {
        T::one()
    };
    for &v in x {
        worst = worst.max(-v);
    }
    for (c, &yi) in p.constraints.iter().zip(y) {
        let ax: T = c.coeffs.iter().zip(x).map(|(&a, &v)| a * v).sum();
        let slack = c.rhs - ax;
        let primal = match c.kind {
            RowKind::Le => (-slack).max(T::zero()),
            RowKind::Ge => slack.max(T::zero()),
            RowKind::Eq => slack.abs(),
        };
        // dual sign in the minimization frame
        let yf = flip * yi;
        let dual_sign = match c.kind {
            RowKind::Le => yf.max(T::zero()),
            RowKind::Ge => (-yf).max(T::zero()),
            RowKind::Eq => T::zero(),
        };
        worst = worst.max(primal).max(dual_sign).max((slack * yi).abs());
    }
    for (j, &xj) in x.iter().enumerate() {
        let aty: T = p.constraints.iter().zip(y).map(|(c, &yi)| c.coeffs[j] * yi).sum();
        let reduced = flip * (p.objective[j] - aty);
        worst = worst.max(-reduced).max((reduced * xj).abs());
    }
    worst
}
