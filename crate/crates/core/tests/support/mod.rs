//! Independent oracles shared by the integration tests and the acceptance
//! target. Nothing here calls the code it checks except at the edges.
#![allow(dead_code, clippy::needless_range_loop, clippy::type_complexity)]

pub mod criteria;

use lpwp_core::canonical::{variable_key, CanonicalForm};
use lpwp_core::ir::Direction;
use lpwp_core::number::to_f64;
use rand::Rng;

/// Dense `min c·x  s.t.  a x <= b` in floats.
#[derive(Debug, Clone)]
pub struct DenseLp {
    pub c: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl DenseLp {
    /// Minimization form of a canonical table, sign bounds left implicit.
    pub fn from_form(form: &CanonicalForm) -> Self {
        let obj = form.objective.as_ref().expect("objective");
        let sign = if obj.direction == Direction::Maximize {
            -1.0
        } else {
            1.0
        };
        DenseLp {
            c: obj.coefficients.iter().map(|v| sign * to_f64(v)).collect(),
            a: form
                .constraints
                .iter()
                .map(|r| r.coefficients.iter().map(to_f64).collect())
                .collect(),
            b: form.constraints.iter().map(|r| to_f64(&r.rhs)).collect(),
        }
    }

    pub fn feasible(&self, x: &[f64], tol: f64) -> bool {
        x.iter().all(|&v| v >= -tol)
            && self
                .a
                .iter()
                .zip(&self.b)
                .all(|(row, b)| dot(row, x) <= b + tol * (1.0 + b.abs()))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_square(mut m: Vec<Vec<f64>>, mut r: Vec<f64>) -> Option<Vec<f64>> {
    let n = r.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-10 {
            return None;
        }
        m.swap(col, piv);
        r.swap(col, piv);
        for i in 0..n {
            if i != col {
                let f = m[i][col] / m[col][col];
                for k in col..n {
                    m[i][k] -= f * m[col][k];
                }
                r[i] -= f * r[col];
            }
        }
    }
    Some((0..n).map(|i| r[i] / m[i][i]).collect())
}

fn subsets(k: usize, n: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if cur.len() == k {
        out.push(cur.clone());
        return;
    }
    for i in start..n {
        cur.push(i);
        subsets(k, n, i + 1, cur, out);
        cur.pop();
    }
}

/// Best objective over every vertex of `{a x <= b, x >= 0}`: each vertex is
/// the solution of `n` tight rows chosen among the constraints and the sign
/// bounds. Only meaningful for bounded problems. `None` when no vertex is
/// feasible.
pub fn vertex_optimum(lp: &DenseLp) -> Option<(f64, Vec<f64>)> {
    let n = lp.c.len();
    let mut rows: Vec<(Vec<f64>, f64)> = lp.a.iter().cloned().zip(lp.b.iter().copied()).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = -1.0;
        rows.push((e, 0.0));
    }
    let mut picks = Vec::new();
    subsets(n, rows.len(), 0, &mut Vec::new(), &mut picks);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for pick in picks {
        let m = pick.iter().map(|&i| rows[i].0.clone()).collect();
        let r = pick.iter().map(|&i| rows[i].1).collect();
        let Some(x) = solve_square(m, r) else { continue };
        if !lp.feasible(&x, 1e-9) {
            continue;
        }
        let v = dot(&lp.c, &x);
        if best.as_ref().is_none_or(|(b, _)| v < *b) {
            best = Some((v, x));
        }
    }
    best
}

/// A feasible, bounded LP with 2 or 3 variables and small integer data:
/// rows are built around a known interior point and boxed by `x_j <= 20`.
pub fn random_lp(rng: &mut impl Rng) -> DenseLp {
    let n = rng.gen_range(2..=3);
    let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(0..=10) as f64).collect();
    let m = rng.gen_range(1..=4);
    let mut a = Vec::new();
    let mut b = Vec::new();
    for _ in 0..m {
        let row: Vec<f64> = (0..n).map(|_| rng.gen_range(-6..=6) as f64).collect();
        b.push(dot(&row, &x0) + rng.gen_range(0..=8) as f64);
        a.push(row);
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        a.push(e);
        b.push(20.0);
    }
    let c = (0..n).map(|_| rng.gen_range(-9..=9) as f64).collect();
    DenseLp { c, a, b }
}

/// Largest one-to-one assignment in a boolean table, by exhaustive search.
pub fn max_matching(table: &[Vec<bool>]) -> usize {
    fn go(table: &[Vec<bool>], p: usize, used: &mut Vec<bool>) -> usize {
        if p == table.len() {
            return 0;
        }
        let mut best = go(table, p + 1, used);
        for g in 0..used.len() {
            if table[p][g] && !used[g] {
                used[g] = true;
                best = best.max(1 + go(table, p + 1, used));
                used[g] = false;
            }
        }
        best
    }
    let width = table.first().map_or(0, Vec::len);
    go(table, 0, &mut vec![false; width])
}

/// Objective-first row list of a form in floats, columns renamed to gold
/// order by exact normalized name.
fn float_rows(form: &CanonicalForm, gold_vars: &[String]) -> Vec<(Option<Direction>, Vec<f64>, f64)> {
    let gk: Vec<String> = gold_vars.iter().map(|v| variable_key(v)).collect();
    let col: Vec<Option<usize>> = form
        .variables
        .iter()
        .map(|v| gk.iter().position(|g| *g == variable_key(v)))
        .collect();
    let place = |coeffs: &[lpwp_core::Rational]| {
        let mut out = vec![0.0; gk.len()];
        for (j, a) in coeffs.iter().enumerate() {
            match col[j] {
                Some(g) => out[g] += to_f64(a),
                None if to_f64(a) != 0.0 => return vec![f64::NAN; gk.len()],
                None => {}
            }
        }
        out
    };
    let mut rows = Vec::new();
    if let Some(o) = &form.objective {
        rows.push((Some(o.direction), place(&o.coefficients), 0.0));
    }
    for r in &form.constraints {
        rows.push((None, place(&r.coefficients), to_f64(&r.rhs)));
    }
    rows
}

/// Row-equality table within `1e-4`, objectives compared with direction.
pub fn match_table(pred: &CanonicalForm, gold: &CanonicalForm) -> Vec<Vec<bool>> {
    let pr = float_rows(pred, &gold.variables);
    let gr = float_rows(gold, &gold.variables);
    pr.iter()
        .map(|(pd, pc, pb)| {
            gr.iter()
                .map(|(gd, gc, gb)| {
                    pd == gd && (pb - gb).abs() <= 1e-4 && pc.iter().zip(gc).all(|(x, y)| (x - y).abs() <= 1e-4)
                })
                .collect()
        })
        .collect()
}

/// `1 - Σ min(FP+FN, D) / Σ D` straight from the definition.
pub fn accuracy_by_hand(problems: &[(usize, usize, usize)]) -> f64 {
    let num: usize = problems.iter().map(|&(fp, fn_, d)| (fp + fn_).min(d)).sum();
    let den: usize = problems.iter().map(|&(_, _, d)| d).sum();
    1.0 - num as f64 / den as f64
}
