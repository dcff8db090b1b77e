//! Declaration-level mapping accuracy.
//!
//! `Acc = 1 - Σ min(FP_i + FN_i, D_i) / Σ D_i`, with FP the unmatched
//! predictions and FN = max(0, D - P).

use std::collections::BTreeMap;
use std::fmt::Write;

use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::{canonicalize_partial, sparse_row, variable_key, CanonicalForm};
use crate::ir::{parse_ir, ConstraintBody, Declaration, IrDocument, ParsedIr, ProblemSyntaxError, Term};
use crate::number::{to_f64, Rational};

/// Absolute tolerance for coefficient and rhs equality.
pub const MATCH_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchResult {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    /// `(pred_idx, gold_idx)`; index 0 is the objective when present.
    pub matched: Vec<(usize, usize)>,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub d: usize,
    pub p: usize,
}

impl MatchResult {
    fn from_matches(matched: Vec<(usize, usize)>, p: usize, d: usize) -> Self {
        MatchResult {
            id: None,
            fp: p - matched.len(),
            fn_: d.saturating_sub(p),
            matched,
            d,
            p,
        }
    }

    /// The clamped per-problem penalty `min(FP + FN, D)`.
    pub fn penalty(&self) -> usize {
        (self.fp + self.fn_).min(self.d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ErrorCategory {
    ProblemSyntax,
    DeclarationSyntax,
    ConstraintType,
    Parameter,
    Limit,
    DirectionOperator,
    Variable,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 7] = [
        ErrorCategory::ProblemSyntax,
        ErrorCategory::DeclarationSyntax,
        ErrorCategory::ConstraintType,
        ErrorCategory::Parameter,
        ErrorCategory::Limit,
        ErrorCategory::DirectionOperator,
        ErrorCategory::Variable,
    ];
}

pub type ErrorTallies = BTreeMap<ErrorCategory, usize>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub per_problem: Vec<MatchResult>,
    pub error_tallies: ErrorTallies,
    /// Unmatched predictions with the fields that differ from their closest
    /// gold declaration, one list per problem.
    #[serde(default)]
    pub diffs: Vec<Vec<DeclarationDiff>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeclarationDiff {
    /// Index among the parsed predicted declarations (objective first).
    pub pred_index: usize,
    pub gold_index: Option<usize>,
    pub categories: Vec<ErrorCategory>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("corpus has no gold declarations")]
pub struct EmptyCorpusError;

/// Exact accuracy over per-problem results.
pub fn accuracy(results: &[MatchResult]) -> Result<f64, EmptyCorpusError> {
    let total: usize = results.iter().map(|r| r.d).sum();
    if total == 0 {
        return Err(EmptyCorpusError);
    }
    let penalty: usize = results.iter().map(MatchResult::penalty).sum();
    Ok(1.0 - penalty as f64 / total as f64)
}

/// Maps each predicted column to a gold column: exact normalized name
/// first, then a containment match when it is unique in both directions.
pub fn align_variables(pred: &[String], gold: &[String]) -> Vec<Option<usize>> {
    let pk: Vec<String> = pred.iter().map(|s| variable_key(s)).collect();
    let gk: Vec<String> = gold.iter().map(|s| variable_key(s)).collect();
    let mut map = vec![None; pred.len()];
    let mut used = vec![false; gold.len()];
    for (i, k) in pk.iter().enumerate() {
        if let Some(g) = gk.iter().position(|x| x == k) {
            if !used[g] {
                map[i] = Some(g);
                used[g] = true;
            }
        }
    }
    let contains = |a: &str, b: &str| {
        let wa: Vec<String> = a.split(' ').map(variable_key).collect();
        let wb: Vec<String> = b.split(' ').map(variable_key).collect();
        let (long, short) = if wa.len() >= wb.len() { (wa, wb) } else { (wb, wa) };
        long.windows(short.len()).any(|w| w == short.as_slice())
    };
    let candidates: Vec<Vec<usize>> = pk
        .iter()
        .enumerate()
        .map(|(i, k)| {
            if map[i].is_some() {
                return Vec::new();
            }
            (0..gk.len()).filter(|&g| !used[g] && contains(k, &gk[g])).collect()
        })
        .collect();
    for i in 0..pk.len() {
        if let [g] = candidates[i].as_slice() {
            let rivals = candidates.iter().filter(|c| c.contains(g)).count();
            if rivals == 1 {
                map[i] = Some(*g);
                used[*g] = true;
            }
        }
    }
    map
}

#[derive(Debug, Clone)]
enum Row {
    Objective(crate::ir::Direction, Vec<Rational>),
    Constraint(Vec<Rational>, Rational),
}

fn rows_of(form: &CanonicalForm) -> Vec<Row> {
    let mut rows = Vec::new();
    if let Some(o) = &form.objective {
        rows.push(Row::Objective(o.direction, o.coefficients.clone()));
    }
    rows.extend(
        form.constraints
            .iter()
            .map(|c| Row::Constraint(c.coefficients.clone(), c.rhs.clone())),
    );
    rows
}

fn close(a: &Rational, b: &Rational) -> bool {
    (to_f64(a) - to_f64(b)).abs() <= MATCH_TOL
}

/// Projects a predicted coefficient vector onto gold columns; `None` if a
/// non-zero coefficient sits on an unaligned column.
fn project(coeffs: &[Rational], map: &[Option<usize>], width: usize) -> Option<Vec<Rational>> {
    let mut out = vec![Rational::zero(); width];
    for (j, a) in coeffs.iter().enumerate() {
        match map.get(j).copied().flatten() {
            Some(g) => out[g] += a,
            None if to_f64(a).abs() > MATCH_TOL => return None,
            None => {}
        }
    }
    Some(out)
}

fn rows_match(pred: &Row, gold: &Row, map: &[Option<usize>], width: usize) -> bool {
    let same = |p: &[Rational], g: &[Rational]| {
        project(p, map, width).is_some_and(|p| p.iter().zip(g).all(|(a, b)| close(a, b)))
    };
    match (pred, gold) {
        (Row::Objective(pd, pc), Row::Objective(gd, gc)) => pd == gd && same(pc, gc),
        (Row::Constraint(pc, pr), Row::Constraint(gc, gr)) => close(pr, gr) && same(pc, gc),
        _ => false,
    }
}

/// Pairwise match table `m[p][g]`.
fn match_table(pred: &CanonicalForm, gold: &CanonicalForm) -> Vec<Vec<bool>> {
    let map = align_variables(&pred.variables, &gold.variables);
    let width = gold.variables.len();
    let pr = rows_of(pred);
    let gr = rows_of(gold);
    pr.iter()
        .map(|p| gr.iter().map(|g| rows_match(p, g, &map, width)).collect())
        .collect()
}

fn greedy(table: &[Vec<bool>], d: usize) -> Vec<(usize, usize)> {
    let mut taken = vec![false; d];
    let mut out = Vec::new();
    for (p, row) in table.iter().enumerate() {
        if let Some(g) = (0..d).find(|&g| !taken[g] && row[g]) {
            taken[g] = true;
            out.push((p, g));
        }
    }
    out
}

/// Greedy one-to-one matching of predicted to gold declarations.
pub fn match_declarations(pred: &CanonicalForm, gold: &CanonicalForm) -> MatchResult {
    let table = match_table(pred, gold);
    let d = gold.constraints.len() + usize::from(gold.objective.is_some());
    let p = table.len();
    MatchResult::from_matches(greedy(&table, d), p, d)
}

/// Full evaluation of one predicted IR text against a gold document.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemEval {
    pub result: MatchResult,
    pub tallies: ErrorTallies,
    pub diffs: Vec<DeclarationDiff>,
}

fn gold_count(gold: &IrDocument) -> usize {
    gold.declarations.len()
}

/// Evaluates raw predicted IR text. A document-level parse failure gives
/// P = 0; malformed blocks count as predicted but unmatched.
pub fn evaluate_ir(pred_text: &str, gold: &IrDocument) -> ProblemEval {
    evaluate_parsed(parse_ir(pred_text).as_ref(), gold)
}

/// Keeps declarations that canonicalize on their own, with their original indices.
fn canonicalizable(doc: &IrDocument) -> (IrDocument, Vec<usize>) {
    let mut kept = Vec::new();
    let mut idx = Vec::new();
    // objective first so indices line up with the canonical rows
    let order = doc
        .declarations
        .iter()
        .enumerate()
        .filter(|(_, d)| d.is_objective())
        .chain(doc.declarations.iter().enumerate().filter(|(_, d)| !d.is_objective()));
    for (i, d) in order {
        let ok = match d {
            Declaration::Objective(_) => true,
            Declaration::Constraint(c) => sparse_row(i, c).is_ok(),
        };
        if ok {
            kept.push(d.clone());
            idx.push(i);
        }
    }
    (IrDocument::new(kept), idx)
}

pub fn evaluate_parsed(pred: Result<&ParsedIr, &ProblemSyntaxError>, gold: &IrDocument) -> ProblemEval {
    let d = gold_count(gold);
    let mut tallies = ErrorTallies::new();
    let parsed = match pred {
        Ok(p) => p,
        Err(_) => {
            tallies.insert(ErrorCategory::ProblemSyntax, 1);
            return ProblemEval {
                result: MatchResult::from_matches(Vec::new(), 0, d),
                tallies,
                diffs: Vec::new(),
            };
        }
    };
    if !parsed.errors.is_empty() {
        tallies.insert(ErrorCategory::DeclarationSyntax, parsed.errors.len());
    }
    let (gold_doc, gold_idx) = canonicalizable(gold);
    let gold_form = canonicalize_partial(&gold_doc).expect("filtered");
    let (pred_doc, pred_idx) = canonicalizable(&parsed.document);
    let pred_form = canonicalize_partial(&pred_doc).expect("filtered");
    let table = match_table(&pred_form, &gold_form);
    let matched: Vec<(usize, usize)> = greedy(&table, gold_idx.len())
        .into_iter()
        .map(|(p, g)| (pred_idx[p], gold_idx[g]))
        .collect();
    let p = parsed.document.declarations.len() + parsed.errors.len();
    let result = MatchResult::from_matches(matched, p, d);

    let diffs = classify_unmatched(&parsed.document, gold, &result.matched);
    for diff in &diffs {
        for c in &diff.categories {
            *tallies.entry(*c).or_default() += 1;
        }
    }
    ProblemEval { result, tallies, diffs }
}

/// Error tallies for one prediction; see [`evaluate_parsed`].
pub fn classify_errors(pred: Result<&ParsedIr, &ProblemSyntaxError>, gold: &IrDocument) -> ErrorTallies {
    evaluate_parsed(pred, gold).tallies
}

struct Fields {
    kind: Option<crate::ir::ConstraintKind>,
    operator: String,
    limit: Option<Rational>,
    vars: Vec<String>,
    params: Vec<(String, Rational)>,
}

fn fields(decl: &Declaration, rename: &dyn Fn(&str) -> String) -> Fields {
    let terms = |ts: &[Term]| -> Vec<(String, Rational)> {
        let mut v: Vec<_> = ts
            .iter()
            .map(|t| (rename(&t.variable), t.coefficient.value.clone()))
            .collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v
    };
    let mut vars: Vec<String> = decl.variables().iter().map(|v| rename(v)).collect();
    vars.sort();
    vars.dedup();
    match decl {
        Declaration::Objective(o) => Fields {
            kind: None,
            operator: o.direction.word().into(),
            limit: None,
            vars,
            params: terms(&o.terms),
        },
        Declaration::Constraint(c) => Fields {
            kind: Some(c.kind()),
            operator: c.operator.tag().into(),
            limit: c.body.limit().map(|q| q.value.clone()),
            vars,
            params: match &c.body {
                ConstraintBody::LinearConstraint { terms: ts, .. } => terms(ts),
                ConstraintBody::XbyConstraint { .. } => {
                    vec![(String::new(), c.body.multiplier_value().unwrap_or_default())]
                }
                _ => Vec::new(),
            },
        },
    }
}

fn differing(p: &Fields, g: &Fields) -> Vec<ErrorCategory> {
    let mut out = Vec::new();
    if p.kind != g.kind {
        out.push(ErrorCategory::ConstraintType);
    }
    if p.operator != g.operator {
        out.push(ErrorCategory::DirectionOperator);
    }
    let limit_differs = match (&p.limit, &g.limit) {
        (Some(a), Some(b)) => !close(a, b),
        (None, None) => false,
        _ => true,
    };
    if limit_differs {
        out.push(ErrorCategory::Limit);
    }
    if p.vars != g.vars {
        out.push(ErrorCategory::Variable);
    }
    let params_differ =
        p.params.len() != g.params.len() || p.params.iter().zip(&g.params).any(|(a, b)| !close(&a.1, &b.1));
    if params_differ {
        out.push(ErrorCategory::Parameter);
    }
    out
}

fn classify_unmatched(pred: &IrDocument, gold: &IrDocument, matched: &[(usize, usize)]) -> Vec<DeclarationDiff> {
    let pred_vars: Vec<String> = canonicalize_partial(&IrDocument::new(
        pred.declarations
            .iter()
            .filter(|d| d.as_constraint().is_none_or(|c| sparse_row(0, c).is_ok()))
            .cloned()
            .collect(),
    ))
    .map(|f| f.variables)
    .unwrap_or_default();
    let gold_vars: Vec<String> = canonicalize_partial(gold).map(|f| f.variables).unwrap_or_default();
    let map = align_variables(&pred_vars, &gold_vars);
    let rename_pred = |v: &str| -> String {
        let key = variable_key(v);
        pred_vars
            .iter()
            .position(|p| variable_key(p) == key)
            .and_then(|i| map[i])
            .map(|g| variable_key(&gold_vars[g]))
            .unwrap_or(key)
    };
    let rename_gold = |v: &str| variable_key(v);

    let matched_pred: Vec<usize> = matched.iter().map(|m| m.0).collect();
    let mut free_gold: Vec<usize> = (0..gold.declarations.len())
        .filter(|g| !matched.iter().any(|m| m.1 == *g))
        .collect();
    let gold_fields: Vec<Fields> = gold.declarations.iter().map(|d| fields(d, &rename_gold)).collect();
    let mut diffs = Vec::new();
    for (pi, decl) in pred.declarations.iter().enumerate() {
        if matched_pred.contains(&pi) {
            continue;
        }
        let pf = fields(decl, &rename_pred);
        let best = free_gold
            .iter()
            .enumerate()
            .map(|(slot, &g)| (slot, g, differing(&pf, &gold_fields[g]).len()))
            .min_by_key(|&(_, g, n)| (n, g));
        let diff = match best {
            Some((slot, g, _)) => {
                free_gold.remove(slot);
                DeclarationDiff {
                    pred_index: pi,
                    gold_index: Some(g),
                    categories: differing(&pf, &gold_fields[g]),
                }
            }
            None => DeclarationDiff {
                pred_index: pi,
                gold_index: None,
                categories: Vec::new(),
            },
        };
        diffs.push(diff);
    }
    diffs
}

/// Evaluates a corpus of `(id, predicted IR text, gold document)`.
pub fn evaluate_corpus<'a, I>(items: I) -> Result<EvalReport, EmptyCorpusError>
where
    I: IntoIterator<Item = (&'a str, &'a str, &'a IrDocument)>,
{
    let mut per_problem = Vec::new();
    let mut tallies = ErrorTallies::new();
    let mut diffs = Vec::new();
    for (id, pred, gold) in items {
        let mut e = evaluate_ir(pred, gold);
        e.result.id = Some(id.to_string());
        for (k, v) in e.tallies {
            *tallies.entry(k).or_default() += v;
        }
        per_problem.push(e.result);
        diffs.push(e.diffs);
    }
    Ok(EvalReport {
        accuracy: accuracy(&per_problem)?,
        per_problem,
        error_tallies: tallies,
        diffs,
    })
}

impl EvalReport {
    /// One line per problem, then a summary line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,D,P,matched,FP,FN,penalty\n");
        for r in &self.per_problem {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.id.as_deref().unwrap_or(""),
                r.d,
                r.p,
                r.matched.len(),
                r.fp,
                r.fn_,
                r.penalty()
            );
        }
        let _ = writeln!(out, "accuracy,{:.6}", self.accuracy);
        for (k, v) in &self.error_tallies {
            let _ = writeln!(out, "{k:?},{v}");
        }
        out
    }
}

/// One predicted problem. Corpus records work too: their `gold_ir` is read
/// as the prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    #[serde(alias = "pred_ir", alias = "gold_ir")]
    pub ir: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldEntry {
    pub id: String,
    pub gold_ir: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorpusEvalError {
    #[error(transparent)]
    Empty(#[from] EmptyCorpusError),
    #[error("gold problem {id} does not parse: {message}")]
    BadGold { id: String, message: String },
    #[error("prediction {0} has no gold problem")]
    UnknownId(String),
    #[error("id {0} appears twice")]
    DuplicateId(String),
}

/// Joins predictions to gold problems by id, in gold order. A gold problem
/// without a prediction scores as an empty prediction.
pub fn evaluate_predictions(pred: &[Prediction], gold: &[GoldEntry]) -> Result<EvalReport, CorpusEvalError> {
    let mut by_id: BTreeMap<&str, &str> = BTreeMap::new();
    for p in pred {
        if by_id.insert(&p.id, &p.ir).is_some() {
            return Err(CorpusEvalError::DuplicateId(p.id.clone()));
        }
    }
    let mut docs = Vec::with_capacity(gold.len());
    let mut seen = std::collections::BTreeSet::new();
    for g in gold {
        if !seen.insert(g.id.as_str()) {
            return Err(CorpusEvalError::DuplicateId(g.id.clone()));
        }
        let bad = |message: String| CorpusEvalError::BadGold {
            id: g.id.clone(),
            message,
        };
        let doc = parse_ir(&g.gold_ir)
            .map_err(|e| bad(e.to_string()))?
            .into_complete()
            .map_err(|e| bad(e.to_string()))?;
        docs.push(doc);
    }
    if let Some(extra) = by_id.keys().find(|id| !seen.contains(*id)) {
        return Err(CorpusEvalError::UnknownId(extra.to_string()));
    }
    let items: Vec<(&str, &str, &IrDocument)> = gold
        .iter()
        .zip(&docs)
        .map(|(g, d)| (g.id.as_str(), by_id.get(g.id.as_str()).copied().unwrap_or(""), d))
        .collect();
    Ok(evaluate_corpus(items)?)
}
