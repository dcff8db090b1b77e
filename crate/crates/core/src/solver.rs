//! Two-phase primal simplex with Bland's rule.
//!
//! Small problems pivot on exact rationals; larger ones fall back to f64
//! with an absolute pivot tolerance.

use std::ops::{Add, Div, Mul, Neg, Sub};

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::canonical::{to_solver_form, CanonicalForm, CanonicalizeError};
use crate::ir::Direction;
use crate::number::{int, to_f64, Rational};

/// `min c·x  s.t.  A x <= b`, plus `x >= 0` when `nonnegative`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub c: Vec<Rational>,
    pub a: Vec<Vec<Rational>>,
    pub b: Vec<Rational>,
    pub nonnegative: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: SolveStatus,
    /// Primal point; empty unless optimal.
    pub x: Vec<f64>,
    /// Objective value in the sense of the problem that was solved.
    pub objective: Option<f64>,
    /// Rows of the phase-one infeasibility certificate (empty unless infeasible).
    pub infeasible_rows: Vec<usize>,
    /// Whether exact arithmetic was used.
    pub exact: bool,
    #[serde(skip)]
    pub x_exact: Option<Vec<Rational>>,
}

/// Above this many tableau cells the solver switches to f64.
pub const EXACT_CELL_LIMIT: usize = 20_000;

const FLOAT_EPS: f64 = 1e-9;

trait Field:
    Clone
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + PartialOrd
{
    fn zero() -> Self;
    fn from_rational(r: &Rational) -> Self;
    fn is_pos(&self) -> bool;
    fn is_neg(&self) -> bool;
    fn to_f64(&self) -> f64;
    fn to_rational(&self) -> Option<Rational>;
}

impl Field for Rational {
    fn zero() -> Self {
        <Rational as Zero>::zero()
    }
    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }
    fn is_pos(&self) -> bool {
        self.is_positive()
    }
    fn is_neg(&self) -> bool {
        self.is_negative()
    }
    fn to_f64(&self) -> f64 {
        to_f64(self)
    }
    fn to_rational(&self) -> Option<Rational> {
        Some(self.clone())
    }
}

impl Field for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_rational(r: &Rational) -> Self {
        to_f64(r)
    }
    fn is_pos(&self) -> bool {
        *self > FLOAT_EPS
    }
    fn is_neg(&self) -> bool {
        *self < -FLOAT_EPS
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn to_rational(&self) -> Option<Rational> {
        None
    }
}

struct Tableau<T> {
    rows: Vec<Vec<T>>,
    basis: Vec<usize>,
    /// Columns allowed to enter the basis.
    allowed: Vec<bool>,
}

impl<T: Field> Tableau<T> {
    fn width(&self) -> usize {
        self.allowed.len()
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.rows[r][col].clone();
        for v in self.rows[r].iter_mut() {
            *v = v.clone() / p.clone();
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[col].clone();
            if f.is_pos() || f.is_neg() {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v = v.clone() - f.clone() * pv.clone();
                }
            } else {
                row[col] = T::zero();
            }
        }
        self.basis[r] = col;
    }

    fn reduced_costs(&self, cost: &[T]) -> Vec<T> {
        (0..self.width())
            .map(|j| {
                let mut d = cost[j].clone();
                for (i, row) in self.rows.iter().enumerate() {
                    d = d - cost[self.basis[i]].clone() * row[j].clone();
                }
                d
            })
            .collect()
    }

    /// Runs Bland's rule to optimality. Returns false when unbounded.
    fn optimize(&mut self, cost: &[T]) -> bool {
        let rhs = self.width();
        loop {
            let d = self.reduced_costs(cost);
            let Some(enter) = (0..self.width()).find(|&j| self.allowed[j] && d[j].is_neg()) else {
                return true;
            };
            let mut leave: Option<(usize, T)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if !row[enter].is_pos() {
                    continue;
                }
                let ratio = row[rhs].clone() / row[enter].clone();
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((li, lr)) => {
                        let better = ratio < lr
                            || (!(ratio.clone() - lr.clone()).is_pos()
                                && !(ratio.clone() - lr.clone()).is_neg()
                                && self.basis[i] < self.basis[li]);
                        if better {
                            Some((i, ratio))
                        } else {
                            Some((li, lr))
                        }
                    }
                };
            }
            match leave {
                Some((r, _)) => self.pivot(r, enter),
                None => return false,
            }
        }
    }

    fn value_of(&self, col: usize) -> T {
        let rhs = self.width();
        self.basis
            .iter()
            .position(|&b| b == col)
            .map(|i| self.rows[i][rhs].clone())
            .unwrap_or_else(T::zero)
    }
}

fn run<T: Field>(lp: &LpProblem) -> LpSolution {
    let m = lp.b.len();
    let n0 = lp.c.len();
    // free variables are split into x+ and x-
    let n = if lp.nonnegative { n0 } else { 2 * n0 };
    let expand = |row: &[Rational]| -> Vec<T> {
        let mut out: Vec<T> = row.iter().map(T::from_rational).collect();
        if !lp.nonnegative {
            out.extend(row.iter().map(|v| -T::from_rational(v)));
        }
        out
    };
    let needs_art: Vec<bool> = lp.b.iter().map(|b| b.is_negative()).collect();
    let n_art = needs_art.iter().filter(|&&x| x).count();
    let width = n + m + n_art;
    let mut rows = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut art_row = Vec::new();
    let mut next_art = n + m;
    for i in 0..m {
        let mut row = expand(&lp.a[i]);
        row.resize(width + 1, T::zero());
        row[n + i] = T::from_rational(&int(1));
        row[width] = T::from_rational(&lp.b[i]);
        if needs_art[i] {
            for v in row.iter_mut() {
                *v = -v.clone();
            }
            row[next_art] = T::from_rational(&int(1));
            basis.push(next_art);
            art_row.push((next_art, i));
            next_art += 1;
        } else {
            basis.push(n + i);
        }
        rows.push(row);
    }
    let mut t = Tableau {
        rows,
        basis,
        allowed: vec![true; width],
    };
    let zero_solution = |status, infeasible_rows| LpSolution {
        status,
        x: Vec::new(),
        objective: None,
        infeasible_rows,
        exact: T::zero().to_rational().is_some(),
        x_exact: None,
    };

    if n_art > 0 {
        let mut cost = vec![T::zero(); width];
        for &(col, _) in &art_row {
            cost[col] = T::from_rational(&int(1));
        }
        t.optimize(&cost);
        if art_row.iter().any(|(col, _)| t.value_of(*col).is_pos()) {
            // rows with a nonzero phase-one dual form the infeasibility certificate
            let d = t.reduced_costs(&cost);
            let rows: Vec<usize> = (0..m)
                .filter(|&i| {
                    let art_positive = art_row.iter().any(|&(col, r)| r == i && t.value_of(col).is_pos());
                    art_positive || d[n + i].is_pos() || d[n + i].is_neg()
                })
                .collect();
            return zero_solution(SolveStatus::Infeasible, rows);
        }
        for &(col, _) in &art_row {
            t.allowed[col] = false;
            if let Some(r) = t.basis.iter().position(|&b| b == col) {
                if let Some(j) = (0..n + m).find(|&j| t.rows[r][j].is_pos() || t.rows[r][j].is_neg()) {
                    t.pivot(r, j);
                }
            }
        }
    }

    let mut cost = expand(&lp.c);
    cost.resize(width, T::zero());
    if !t.optimize(&cost) {
        return zero_solution(SolveStatus::Unbounded, Vec::new());
    }
    let raw: Vec<T> = (0..n).map(|j| t.value_of(j)).collect();
    let x: Vec<T> = if lp.nonnegative {
        raw
    } else {
        (0..n0).map(|j| raw[j].clone() - raw[n0 + j].clone()).collect()
    };
    let mut obj = T::zero();
    for (cj, xj) in lp.c.iter().zip(&x) {
        obj = obj + T::from_rational(cj) * xj.clone();
    }
    LpSolution {
        status: SolveStatus::Optimal,
        x: x.iter().map(Field::to_f64).collect(),
        objective: Some(obj.to_f64()),
        infeasible_rows: Vec::new(),
        exact: obj.to_rational().is_some(),
        x_exact: x.iter().map(Field::to_rational).collect(),
    }
}

/// Solves `lp`, exactly when the tableau is small enough.
pub fn solve(lp: &LpProblem) -> LpSolution {
    let cells = lp.b.len() * (lp.c.len() * 2 + 2 * lp.b.len() + 1);
    if cells <= EXACT_CELL_LIMIT {
        run::<Rational>(lp)
    } else {
        run::<f64>(lp)
    }
}

/// Forces the floating-point path.
pub fn solve_f64(lp: &LpProblem) -> LpSolution {
    run::<f64>(lp)
}

/// Solves a canonical form; the objective value is reported in the form's
/// own direction (a maximum for maximization problems).
pub fn solve_canonical(form: &CanonicalForm, nonnegative: bool) -> Result<LpSolution, CanonicalizeError> {
    let lp = to_solver_form(form, nonnegative)?;
    let mut sol = solve(&lp);
    if form.objective.as_ref().map(|o| o.direction) == Some(Direction::Maximize) {
        sol.objective = sol.objective.map(|v| -v);
    }
    Ok(sol)
}

/// True when `x` satisfies every row (and sign constraint) within `tol`.
pub fn check_feasible(lp: &LpProblem, x: &[f64], tol: f64) -> bool {
    if x.len() != lp.c.len() {
        return false;
    }
    if lp.nonnegative && x.iter().any(|&v| v < -tol) {
        return false;
    }
    lp.a.iter().zip(&lp.b).all(|(row, b)| {
        let lhs: f64 = row.iter().zip(x).map(|(a, v)| to_f64(a) * v).sum();
        lhs <= to_f64(b) + tol
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeasibilityViolation {
    /// `a·x - b` of a row that exceeds the tolerance.
    Row {
        row: usize,
        excess: f64,
    },
    Negative {
        column: usize,
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("point has {found} components, the form has {expected} variables")]
pub struct DimensionError {
    pub expected: usize,
    pub found: usize,
}

/// Every row of `form` the point violates by more than [`FEASIBILITY_TOL`],
/// then every negative component. Exact arithmetic.
pub fn check_point(form: &CanonicalForm, point: &[Rational]) -> Result<Vec<FeasibilityViolation>, DimensionError> {
    let n = form.variables.len();
    let dim = |found| DimensionError { expected: n, found };
    if point.len() != n {
        return Err(dim(point.len()));
    }
    let tol = crate::number::from_f64(FEASIBILITY_TOL).expect("finite");
    let mut out = Vec::new();
    for (row, r) in form.constraints.iter().enumerate() {
        if r.coefficients.len() != n {
            return Err(dim(r.coefficients.len()));
        }
        let lhs = r
            .coefficients
            .iter()
            .zip(point)
            .fold(<Rational as Zero>::zero(), |acc, (a, x)| acc + a * x);
        let excess = lhs - &r.rhs;
        if excess > tol {
            out.push(FeasibilityViolation::Row {
                row,
                excess: to_f64(&excess),
            });
        }
    }
    for (column, x) in point.iter().enumerate() {
        if x.is_negative() {
            out.push(FeasibilityViolation::Negative {
                column,
                value: to_f64(x),
            });
        }
    }
    Ok(out)
}

/// Default tolerance for [`check_feasible`].
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::number::ratio;

    fn lp(c: &[i64], a: &[&[i64]], b: &[i64]) -> LpProblem {
        LpProblem {
            c: c.iter().map(|&v| int(v)).collect(),
            a: a.iter().map(|r| r.iter().map(|&v| int(v)).collect()).collect(),
            b: b.iter().map(|&v| int(v)).collect(),
            nonnegative: true,
        }
    }

    #[test]
    fn flower_shop() {
        // max 5x + 3y; 20x + 35y <= 5000; x >= 3y; y >= 10
        let p = lp(&[-5, -3], &[&[20, 35], &[-1, 3], &[0, -1]], &[5000, 0, -10]);
        let s = solve(&p);
        assert_eq!(s.status, SolveStatus::Optimal);
        let x = s.x_exact.unwrap();
        assert_eq!(x, vec![ratio(465, 2), int(10)]);
        assert_eq!(s.objective, Some(-1192.5));
    }

    #[test]
    fn infeasible_reports_rows() {
        let p = lp(&[1, 1], &[&[1, 1], &[-1, -1]], &[4, -6]);
        let s = solve(&p);
        assert_eq!(s.status, SolveStatus::Infeasible);
        assert_eq!(s.infeasible_rows, vec![0, 1]);
    }

    #[test]
    fn certificate_skips_unrelated_rows() {
        let p = lp(&[1, 1], &[&[0, 1], &[1, 0], &[-1, 0]], &[3, 1, -5]);
        assert_eq!(solve(&p).infeasible_rows, vec![1, 2]);
    }

    #[test]
    fn point_violations_are_listed() {
        use crate::canonical::canonicalize;
        use crate::ir::parse_ir;
        let ir = "<DECLARATION> <OBJ_DIR> maximize </OBJ_DIR> <OBJ_NAME> z </OBJ_NAME> \
                  <VAR> x </VAR> <PARAM> 1 </PARAM> </DECLARATION>\n\
                  <DECLARATION> <CONST_DIR> at most </CONST_DIR> <LIMIT> 4 </LIMIT> \
                  <OPERATOR> LESS_OR_EQUAL </OPERATOR> <CONST_TYPE> [UPPER_BOUND] </CONST_TYPE> \
                  <VAR> x </VAR> </DECLARATION>";
        let form = canonicalize(&parse_ir(ir).unwrap().into_complete().unwrap()).unwrap();
        assert_eq!(check_point(&form, &[int(4)]).unwrap(), []);
        assert_eq!(
            check_point(&form, &[int(5)]).unwrap(),
            [FeasibilityViolation::Row { row: 0, excess: 1.0 }]
        );
        assert_eq!(
            check_point(&form, &[int(-1)]).unwrap(),
            [FeasibilityViolation::Negative { column: 0, value: -1.0 }]
        );
        assert_eq!(check_point(&form, &[]), Err(DimensionError { expected: 1, found: 0 }));
    }

    #[test]
    fn unbounded() {
        let p = lp(&[-1, 0], &[&[-1, 1]], &[2]);
        assert_eq!(solve(&p).status, SolveStatus::Unbounded);
    }

    #[test]
    fn free_variables() {
        // min x  s.t. -x <= 3 (x >= -3) with x free
        let mut p = lp(&[1], &[&[-1]], &[3]);
        p.nonnegative = false;
        let s = solve(&p);
        assert_eq!(s.x_exact.unwrap(), vec![int(-3)]);
        p.nonnegative = true;
        assert_eq!(solve(&p).x_exact.unwrap(), vec![int(0)]);
    }

    #[test]
    fn float_path_agrees_on_a_degenerate_problem() {
        let p = lp(
            &[-10, 57, 9, 24],
            &[&[1, -11, -5, 18], &[1, -3, -1, 2], &[1, 0, 0, 0]],
            &[0, 0, 1],
        );
        let exact = solve(&p);
        let float = solve_f64(&p);
        assert_eq!(exact.status, SolveStatus::Optimal);
        assert!((exact.objective.unwrap() - float.objective.unwrap()).abs() < 1e-9);
        assert!(check_feasible(&p, &float.x, FEASIBILITY_TOL));
    }
}
