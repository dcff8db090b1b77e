//! Conversion of IR declarations into the canonical LP matrix.
//!
//! Every constraint row is written as `a · x <= b`. The objective keeps its
//! raw coefficients and a direction flag; [`to_solver_form`] flips the sign
//! for maximization.

use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::ir::{Constraint, ConstraintBody, ConstraintKind, Direction, IrDocument, Objective, Operator};
use crate::number::{fixed, from_f64, int, to_f64, Rational};
use crate::solver::LpProblem;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CanonicalizeError {
    #[error("document has no objective")]
    NoObjective,
    #[error("ratio limit {value} of constraint {index} is not a fraction in [0, 1]")]
    RatioOutOfRange { index: usize, value: String },
    #[error("row width {found} does not match {expected} variables")]
    Width { expected: usize, found: usize },
}

/// Key used to decide that two variable mentions denote the same column:
/// case-folded, whitespace-collapsed, one trailing plural `s` removed.
pub fn variable_key(surface: &str) -> String {
    let mut key = surface.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    if key.len() > 3 && key.ends_with('s') && !key.ends_with("ss") {
        key.pop();
    }
    key
}

/// One constraint before columns are fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRow {
    /// Variable surface with its coefficient; `None` stands for "every
    /// variable" (SUM rows and the complement part of RATIO rows).
    pub terms: Vec<(String, Rational)>,
    pub all: Option<Rational>,
    pub rhs: Rational,
}

impl SparseRow {
    /// Dense coefficients for the given column resolver.
    pub fn densify(&self, width: usize, column: &mut dyn FnMut(&str) -> usize) -> (Vec<Rational>, Rational) {
        let mut coeffs = vec![Rational::zero(); width];
        let cols: Vec<(usize, &Rational)> = self.terms.iter().map(|(v, a)| (column(v), a)).collect();
        let width = cols.iter().map(|(c, _)| c + 1).max().unwrap_or(0).max(width);
        coeffs.resize(width, Rational::zero());
        if let Some(a) = &self.all {
            for c in coeffs.iter_mut() {
                *c += a;
            }
        }
        for (c, a) in cols {
            coeffs[c] += a;
        }
        (coeffs, self.rhs.clone())
    }
}

/// Sparse `<=` row for one constraint. `index` only labels errors.
pub fn sparse_row(index: usize, c: &Constraint) -> Result<SparseRow, CanonicalizeError> {
    // Written as ">=" with positive sign, negated below when the operator is ">=".
    let (terms, all, rhs) = match &c.body {
        ConstraintBody::LinearConstraint { limit, terms } => (
            terms
                .iter()
                .map(|t| (t.variable.clone(), t.coefficient.value.clone()))
                .collect(),
            None,
            limit.value.clone(),
        ),
        ConstraintBody::SumConstraint { limit } => (Vec::new(), Some(int(1)), limit.value.clone()),
        ConstraintBody::UpperBound { variable, limit } | ConstraintBody::LowerBound { variable, limit } => {
            (vec![(variable.clone(), int(1))], None, limit.value.clone())
        }
        ConstraintBody::RatioConstraint { variable, limit } => {
            let f = &limit.value;
            if f.is_negative() || *f > Rational::one() {
                return Err(CanonicalizeError::RatioOutOfRange {
                    index,
                    value: limit.text.clone(),
                });
            }
            // x_j OP f * sum(x)  <=>  x_j - f * sum(x) OP 0
            (vec![(variable.clone(), int(1))], Some(-f.clone()), Rational::zero())
        }
        ConstraintBody::XbyConstraint { base, compared, .. } => {
            let k = c.body.multiplier_value().unwrap_or_else(|| int(1));
            (
                vec![(compared.clone(), int(1)), (base.clone(), -k)],
                None,
                Rational::zero(),
            )
        }
    };
    let row = SparseRow { terms, all, rhs };
    Ok(match c.operator {
        Operator::LessOrEqual => row,
        Operator::GreaterOrEqual => SparseRow {
            terms: row.terms.into_iter().map(|(v, a)| (v, -a)).collect(),
            all: row.all.map(|a| -a),
            rhs: -row.rhs,
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalObjective {
    pub direction: Direction,
    pub coefficients: Vec<Rational>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalRow {
    pub coefficients: Vec<Rational>,
    pub rhs: Rational,
    pub source_kind: ConstraintKind,
    pub const_dir_text: String,
}

/// The canonical matrix. `objective` is `None` only for partial documents.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalForm {
    pub variables: Vec<String>,
    pub objective: Option<CanonicalObjective>,
    pub constraints: Vec<CanonicalRow>,
}

/// Column registry keyed by [`variable_key`].
#[derive(Debug, Clone, Default)]
pub struct Columns {
    pub names: Vec<String>,
    keys: Vec<String>,
}

impl Columns {
    pub fn find(&self, surface: &str) -> Option<usize> {
        let key = variable_key(surface);
        self.keys.iter().position(|k| *k == key)
    }

    pub fn intern(&mut self, surface: &str) -> usize {
        if let Some(i) = self.find(surface) {
            return i;
        }
        self.keys.push(variable_key(surface));
        self.names
            .push(surface.split_whitespace().collect::<Vec<_>>().join(" "));
        self.names.len() - 1
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

fn objective_row(o: &Objective, cols: &mut Columns) -> Vec<(usize, Rational)> {
    o.terms
        .iter()
        .map(|t| (cols.intern(&t.variable), t.coefficient.value.clone()))
        .collect()
}

/// Canonicalizes a complete document.
pub fn canonicalize(doc: &IrDocument) -> Result<CanonicalForm, CanonicalizeError> {
    let form = canonicalize_partial(doc)?;
    if form.objective.is_none() {
        return Err(CanonicalizeError::NoObjective);
    }
    Ok(form)
}

/// Like [`canonicalize`] but accepts a document without an objective.
pub fn canonicalize_partial(doc: &IrDocument) -> Result<CanonicalForm, CanonicalizeError> {
    let mut cols = Columns::default();
    let objective = doc.objective().map(|o| (o.direction, objective_row(o, &mut cols)));
    let mut sparse = Vec::new();
    for (index, c) in doc.constraints().enumerate() {
        for v in c.body.variables() {
            cols.intern(v);
        }
        sparse.push((c, sparse_row(index, c)?));
    }
    let n = cols.len();
    let objective = objective.map(|(direction, terms)| {
        let mut coefficients = vec![Rational::zero(); n];
        for (j, a) in terms {
            coefficients[j] += a;
        }
        CanonicalObjective {
            direction,
            coefficients,
        }
    });
    let constraints = sparse
        .into_iter()
        .map(|(c, row)| {
            let (coefficients, rhs) = row.densify(n, &mut |v| cols.find(v).expect("interned"));
            CanonicalRow {
                coefficients,
                rhs,
                source_kind: c.kind(),
                const_dir_text: c.const_dir.clone(),
            }
        })
        .collect();
    Ok(CanonicalForm {
        variables: cols.names,
        objective,
        constraints,
    })
}

/// Minimization form `min c·x  s.t.  A x <= b`, with x >= 0 unless disabled.
pub fn to_solver_form(form: &CanonicalForm, nonnegative: bool) -> Result<LpProblem, CanonicalizeError> {
    let obj = form.objective.as_ref().ok_or(CanonicalizeError::NoObjective)?;
    let n = form.variables.len();
    for row in &form.constraints {
        if row.coefficients.len() != n {
            return Err(CanonicalizeError::Width {
                expected: n,
                found: row.coefficients.len(),
            });
        }
    }
    let c = match obj.direction {
        Direction::Minimize => obj.coefficients.clone(),
        Direction::Maximize => obj.coefficients.iter().map(|a| -a).collect(),
    };
    Ok(LpProblem {
        c,
        a: form.constraints.iter().map(|r| r.coefficients.clone()).collect(),
        b: form.constraints.iter().map(|r| r.rhs.clone()).collect(),
        nonnegative,
    })
}

impl CanonicalForm {
    /// Header `var_0 .. var_{n-1} rhs`, then the objective and one line per
    /// constraint, values at four decimals.
    pub fn table(&self) -> String {
        let n = self.variables.len();
        let mut rows: Vec<Vec<String>> = Vec::new();
        let mut header = vec![String::new()];
        header.extend((0..n).map(|j| format!("var_{j}")));
        header.push("rhs".into());
        rows.push(header);
        if let Some(o) = &self.objective {
            let mut r = vec!["objective".to_string()];
            r.extend(o.coefficients.iter().map(|a| fixed(a, 4)));
            r.push(String::new());
            rows.push(r);
        }
        for (k, c) in self.constraints.iter().enumerate() {
            let mut r = vec![format!("constraint_{k}")];
            r.extend(c.coefficients.iter().map(|a| fixed(a, 4)));
            r.push(fixed(&c.rhs, 4));
            rows.push(r);
        }
        let widths: Vec<usize> = (0..n + 2)
            .map(|j| rows.iter().map(|r| r[j].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for r in rows {
            let line: Vec<String> = r
                .iter()
                .enumerate()
                .map(|(j, cell)| {
                    if j == 0 {
                        format!("{cell:<w$}", w = widths[j])
                    } else {
                        format!("{cell:>w$}", w = widths[j])
                    }
                })
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        out
    }

    /// Maximum absolute difference to another form of the same shape, or
    /// `None` when shapes or directions differ.
    pub fn max_abs_diff(&self, other: &CanonicalForm) -> Option<f64> {
        if self.variables.len() != other.variables.len() || self.constraints.len() != other.constraints.len() {
            return None;
        }
        let mut worst = 0f64;
        let mut cmp = |a: &[Rational], b: &[Rational]| -> Option<()> {
            if a.len() != b.len() {
                return None;
            }
            for (x, y) in a.iter().zip(b) {
                worst = worst.max((to_f64(x) - to_f64(y)).abs());
            }
            Some(())
        };
        match (&self.objective, &other.objective) {
            (Some(a), Some(b)) if a.direction == b.direction => cmp(&a.coefficients, &b.coefficients)?,
            (None, None) => {}
            _ => return None,
        }
        for (a, b) in self.constraints.iter().zip(&other.constraints) {
            cmp(&a.coefficients, &b.coefficients)?;
            cmp(std::slice::from_ref(&a.rhs), std::slice::from_ref(&b.rhs))?;
        }
        Some(worst)
    }
}

impl fmt::Display for CanonicalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.table())
    }
}

#[derive(Serialize, Deserialize)]
struct WireRow {
    coeffs: Vec<f64>,
    rhs: f64,
    #[serde(rename = "type")]
    kind: ConstraintKind,
    #[serde(default)]
    dir_text: String,
}

#[derive(Serialize, Deserialize)]
struct Wire {
    variables: Vec<String>,
    direction: Option<Direction>,
    objective: Option<Vec<f64>>,
    constraints: Vec<WireRow>,
}

fn to_floats(v: &[Rational]) -> Vec<f64> {
    v.iter().map(to_f64).collect()
}

fn from_floats<E: serde::de::Error>(v: &[f64]) -> Result<Vec<Rational>, E> {
    v.iter()
        .map(|x| from_f64(*x).ok_or_else(|| E::custom("non-finite number")))
        .collect()
}

impl Serialize for CanonicalForm {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        Wire {
            variables: self.variables.clone(),
            direction: self.objective.as_ref().map(|o| o.direction),
            objective: self.objective.as_ref().map(|o| to_floats(&o.coefficients)),
            constraints: self
                .constraints
                .iter()
                .map(|r| WireRow {
                    coeffs: to_floats(&r.coefficients),
                    rhs: to_f64(&r.rhs),
                    kind: r.source_kind,
                    dir_text: r.const_dir_text.clone(),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CanonicalForm {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let w = Wire::deserialize(d)?;
        let objective = match (w.direction, w.objective) {
            (Some(direction), Some(c)) => Some(CanonicalObjective {
                direction,
                coefficients: from_floats::<D::Error>(&c)?,
            }),
            (None, None) => None,
            _ => return Err(D::Error::custom("direction and objective must be given together")),
        };
        let constraints = w
            .constraints
            .iter()
            .map(|r| {
                Ok(CanonicalRow {
                    coefficients: from_floats::<D::Error>(&r.coeffs)?,
                    rhs: from_f64(r.rhs).ok_or_else(|| D::Error::custom("non-finite rhs"))?,
                    source_kind: r.kind,
                    const_dir_text: r.dir_text.clone(),
                })
            })
            .collect::<Result<_, D::Error>>()?;
        Ok(CanonicalForm {
            variables: w.variables,
            objective,
            constraints,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_ir;
    use crate::number::ratio;

    fn doc(text: &str) -> IrDocument {
        parse_ir(text).unwrap().into_complete().unwrap()
    }

    const OBJ: &str = "<DECLARATION><OBJ_DIR> maximize </OBJ_DIR><OBJ_NAME> profit </OBJ_NAME><VAR> x </VAR><PARAM> 2 </PARAM><VAR> y </VAR><PARAM> 3 </PARAM></DECLARATION>";

    fn one(constraint: &str) -> CanonicalRow {
        let form = canonicalize(&doc(&format!("{OBJ}\n{constraint}"))).unwrap();
        form.constraints.into_iter().next().unwrap()
    }

    #[test]
    fn each_kind_lands_in_le_form() {
        let r = one("<DECLARATION><LIMIT> 7 </LIMIT><OPERATOR> GREATER_OR_EQUAL </OPERATOR><CONST_TYPE> [LINEAR_CONSTRAINT] </CONST_TYPE><VAR> x </VAR><PARAM> 1 </PARAM><VAR> y </VAR><PARAM> 4 </PARAM></DECLARATION>");
        assert_eq!(r.coefficients, vec![int(-1), int(-4)]);
        assert_eq!(r.rhs, int(-7));
        let r = one("<DECLARATION><LIMIT> 9 </LIMIT><OPERATOR> LESS_OR_EQUAL </OPERATOR><CONST_TYPE> [SUM_CONSTRAINT] </CONST_TYPE></DECLARATION>");
        assert_eq!((r.coefficients, r.rhs), (vec![int(1), int(1)], int(9)));
        let r = one("<DECLARATION><LIMIT> 4 </LIMIT><OPERATOR> LESS_OR_EQUAL </OPERATOR><CONST_TYPE> [UPPER_BOUND] </CONST_TYPE><VAR> y </VAR></DECLARATION>");
        assert_eq!((r.coefficients, r.rhs), (vec![int(0), int(1)], int(4)));
        let r = one("<DECLARATION><LIMIT> 4 </LIMIT><OPERATOR> GREATER_OR_EQUAL </OPERATOR><CONST_TYPE> [LOWER_BOUND] </CONST_TYPE><VAR> x </VAR></DECLARATION>");
        assert_eq!((r.coefficients, r.rhs), (vec![int(-1), int(0)], int(-4)));
        let r = one("<DECLARATION><LIMIT> 30% </LIMIT><OPERATOR> GREATER_OR_EQUAL </OPERATOR><CONST_TYPE> [RATIO_CONSTRAINT] </CONST_TYPE><VAR> y </VAR></DECLARATION>");
        assert_eq!((r.coefficients, r.rhs), (vec![ratio(3, 10), ratio(-7, 10)], int(0)));
        let r = one("<DECLARATION><LIMIT> 80% </LIMIT><OPERATOR> LESS_OR_EQUAL </OPERATOR><CONST_TYPE> [RATIO_CONSTRAINT] </CONST_TYPE><VAR> y </VAR></DECLARATION>");
        assert_eq!((r.coefficients, r.rhs), (vec![ratio(-8, 10), ratio(2, 10)], int(0)));
        let r = one("<DECLARATION><OPERATOR> GREATER_OR_EQUAL </OPERATOR><CONST_TYPE> [XBY_CONSTRAINT] </CONST_TYPE><VAR> y </VAR><PARAM> three </PARAM><VAR> x </VAR></DECLARATION>");
        assert_eq!((r.coefficients, r.rhs), (vec![int(-1), int(3)], int(0)));
        let r = one("<DECLARATION><OPERATOR> LESS_OR_EQUAL </OPERATOR><CONST_TYPE> [XY_CONSTRAINT] </CONST_TYPE><VAR> y </VAR><VAR> x </VAR></DECLARATION>");
        assert_eq!((r.coefficients, r.rhs), (vec![int(1), int(-1)], int(0)));
    }

    #[test]
    fn columns_follow_first_appearance_and_plural_folding() {
        let form = canonicalize(&doc(&format!("{OBJ}\n<DECLARATION><LIMIT> 1 </LIMIT><OPERATOR> LESS_OR_EQUAL </OPERATOR><CONST_TYPE> [LINEAR_CONSTRAINT] </CONST_TYPE><VAR> Zs </VAR><PARAM> 1 </PARAM><VAR> X </VAR><PARAM> 1 </PARAM></DECLARATION>"))).unwrap();
        assert_eq!(form.variables, vec!["x", "y", "Zs"]);
        assert_eq!(form.constraints[0].coefficients, vec![int(1), int(0), int(1)]);
        assert_eq!(variable_key("Youth  Doses"), "youth dose");
        assert_eq!(variable_key("glass"), "glass");
    }

    #[test]
    fn ratio_out_of_range_is_rejected() {
        let text = format!("{OBJ}\n<DECLARATION><LIMIT> 150 </LIMIT><OPERATOR> LESS_OR_EQUAL </OPERATOR><CONST_TYPE> [RATIO_CONSTRAINT] </CONST_TYPE><VAR> y </VAR></DECLARATION>");
        assert!(matches!(
            canonicalize(&doc(&text)),
            Err(CanonicalizeError::RatioOutOfRange { .. })
        ));
    }

    #[test]
    fn solver_form_negates_a_maximization() {
        let form = canonicalize(&doc(OBJ)).unwrap();
        let lp = to_solver_form(&form, true).unwrap();
        assert_eq!(lp.c, vec![int(-2), int(-3)]);
        assert_eq!(form.objective.unwrap().coefficients, vec![int(2), int(3)]);
    }

    #[test]
    fn json_round_trip_and_table() {
        let text = format!("{OBJ}\n<DECLARATION><OPERATOR> GREATER_OR_EQUAL </OPERATOR><CONST_TYPE> [XBY_CONSTRAINT] </CONST_TYPE><VAR> x </VAR><PARAM> a third </PARAM><VAR> y </VAR></DECLARATION>");
        let form = canonicalize(&doc(&text)).unwrap();
        let json = serde_json::to_string(&form).unwrap();
        let back: CanonicalForm = serde_json::from_str(&json).unwrap();
        assert!(back.max_abs_diff(&form).unwrap() < 1e-12);
        let table = form.table();
        let header: Vec<&str> = table.lines().next().unwrap().split_whitespace().collect();
        assert_eq!(header, vec!["var_0", "var_1", "rhs"]);
        assert!(table.contains("constraint_0"));
        assert!(table.contains("0.3333"));
    }
}
