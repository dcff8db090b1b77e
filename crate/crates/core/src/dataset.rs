//! LPWP-format corpora: JSON-lines problem records, validation and summary
//! statistics.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use num_traits::{One, Signed};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::{canonicalize, variable_key, CanonicalForm};
use crate::ir::{
    parse_ir, Constraint, ConstraintBody, ConstraintKind, Declaration, Direction, EntityLabel, EntitySpan, IrDocument,
    Objective, Operator, Quantity, Term,
};
use crate::number::{to_f64, NumberContext};

/// Cell tolerance when comparing a record's canonical form to its IR.
pub const CANONICAL_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Advertising,
    Investment,
    Sales,
    Production,
    Science,
    Transportation,
}

impl Domain {
    pub fn is_source(self) -> bool {
        matches!(self, Domain::Advertising | Domain::Investment | Domain::Sales)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemRecord {
    pub id: String,
    pub domain: Domain,
    pub description: String,
    pub entities: Vec<EntitySpan>,
    pub gold_ir: String,
    pub gold_canonical: CanonicalForm,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
}

impl ProblemRecord {
    /// The parsed gold IR; `None` if it does not parse completely.
    pub fn gold_document(&self) -> Option<IrDocument> {
        parse_ir(&self.gold_ir).ok()?.into_complete().ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    SpanOutOfBounds,
    SpanTextMismatch,
    SpanOverlap,
    IrSyntax,
    MissingRole,
    RatioNotFraction,
    UnresolvedVariable,
    ShapeMismatch,
    ObjectiveMismatch,
    CoefficientMismatch,
    RhsMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub message: String,
}

impl Violation {
    fn new(kind: ViolationKind, message: impl Into<String>) -> Self {
        Violation {
            kind,
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.kind, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub line: usize,
    pub id: String,
    pub violations: Vec<Violation>,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read corpus: {0}")]
    Io(#[from] std::io::Error),
    #[error("schema error at line {line}: {field}")]
    Schema { line: usize, field: String },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Corpus {
    pub records: Vec<ProblemRecord>,
    pub rejections: Vec<Rejection>,
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, DatasetError> {
    parse_corpus(&std::fs::read_to_string(path)?)
}

/// Parses JSON-lines text. Malformed JSON aborts; records that parse but
/// fail validation go to [`Corpus::rejections`].
pub fn parse_corpus(text: &str) -> Result<Corpus, DatasetError> {
    let mut corpus = Corpus::default();
    let mut seen = 0;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        seen += 1;
        let record: ProblemRecord = serde_json::from_str(line).map_err(|e| DatasetError::Schema {
            line: i + 1,
            field: schema_field(&e),
        })?;
        let violations = validate_record(&record);
        if violations.is_empty() {
            corpus.records.push(record);
        } else {
            corpus.rejections.push(Rejection {
                line: i + 1,
                id: record.id,
                violations,
            });
        }
    }
    if seen == 0 {
        return Err(DatasetError::Schema {
            line: 0,
            field: "no records".into(),
        });
    }
    Ok(corpus)
}

fn schema_field(e: &serde_json::Error) -> String {
    let msg = e.to_string();
    match msg.split('`').nth(1) {
        Some(field) if msg.starts_with("missing field") || msg.starts_with("unknown variant") => field.to_string(),
        _ => msg,
    }
}

pub fn write_corpus(records: &[ProblemRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("records serialize") + "\n")
        .collect()
}

/// Every check: spans, IR syntax, annotation roles, canonical agreement.
pub fn validate_record(record: &ProblemRecord) -> Vec<Violation> {
    let mut out = check_spans(record);
    let doc = match parse_ir(&record.gold_ir) {
        Ok(parsed) => match parsed.into_complete() {
            Ok(doc) => doc,
            Err(e) => {
                out.push(Violation::new(ViolationKind::IrSyntax, e.to_string()));
                return out;
            }
        },
        Err(e) => {
            out.push(Violation::new(ViolationKind::IrSyntax, e.to_string()));
            return out;
        }
    };
    out.extend(validate_document(&doc, &record.entities));
    if out.iter().any(|v| v.kind == ViolationKind::RatioNotFraction) {
        return out;
    }
    match canonicalize(&doc) {
        Ok(form) => out.extend(first_difference(&record.gold_canonical, &form)),
        Err(e) => out.push(Violation::new(ViolationKind::ShapeMismatch, e.to_string())),
    }
    out
}

/// Relation-level annotation checks on a record's gold IR.
pub fn validate_annotations(record: &ProblemRecord) -> Vec<Violation> {
    match parse_ir(&record.gold_ir).map(|p| p.into_complete()) {
        Ok(Ok(doc)) => validate_document(&doc, &record.entities),
        Ok(Err(e)) => vec![Violation::new(ViolationKind::IrSyntax, e.to_string())],
        Err(e) => vec![Violation::new(ViolationKind::IrSyntax, e.to_string())],
    }
}

fn validate_document(doc: &IrDocument, entities: &[EntitySpan]) -> Vec<Violation> {
    let mut out = Vec::new();
    let var_keys: Vec<String> = entities
        .iter()
        .filter(|e| e.label == EntityLabel::Var)
        .map(|e| variable_key(&e.text))
        .collect();
    for (i, decl) in doc.declarations.iter().enumerate() {
        if let Declaration::Constraint(c) = decl {
            if c.const_dir.is_empty() {
                out.push(Violation::new(
                    ViolationKind::MissingRole,
                    format!("declaration {i}: no CONST_DIR"),
                ));
            }
            match &c.body {
                ConstraintBody::RatioConstraint { limit, .. } => {
                    if limit.value.is_negative() || limit.value > crate::number::Rational::one() {
                        out.push(Violation::new(
                            ViolationKind::RatioNotFraction,
                            format!("declaration {i}: ratio limit not a fraction ({})", limit.text),
                        ));
                    }
                }
                ConstraintBody::XbyConstraint {
                    multiplier: None,
                    xy_alias: false,
                    ..
                } => out.push(Violation::new(
                    ViolationKind::MissingRole,
                    format!("declaration {i}: XBY_CONSTRAINT without a PARAM multiplier"),
                )),
                _ => {}
            }
        }
        if !var_keys.is_empty() {
            for v in decl.variables() {
                if !var_keys.contains(&variable_key(v)) {
                    out.push(Violation::new(
                        ViolationKind::UnresolvedVariable,
                        format!("declaration {i}: VAR {v:?} has no tagged span"),
                    ));
                }
            }
        }
    }
    out
}

fn check_spans(record: &ProblemRecord) -> Vec<Violation> {
    let chars: Vec<char> = record.description.chars().collect();
    let mut out = Vec::new();
    for (i, e) in record.entities.iter().enumerate() {
        if e.start >= e.end || e.end > chars.len() {
            out.push(Violation::new(
                ViolationKind::SpanOutOfBounds,
                format!(
                    "entity {i} [{}, {}) outside description of {} chars",
                    e.start,
                    e.end,
                    chars.len()
                ),
            ));
            continue;
        }
        let text: String = chars[e.start..e.end].iter().collect();
        if text != e.text {
            out.push(Violation::new(
                ViolationKind::SpanTextMismatch,
                format!("entity {i}: {:?} at [{}, {}) reads {text:?}", e.text, e.start, e.end),
            ));
        }
        for (j, other) in record.entities.iter().enumerate().skip(i + 1) {
            if e.overlaps(other) {
                out.push(Violation::new(
                    ViolationKind::SpanOverlap,
                    format!("entities {i} and {j} overlap"),
                ));
            }
        }
    }
    out
}

/// The first cell where `actual` departs from `expected` by more than
/// [`CANONICAL_TOL`], in table reading order.
pub fn first_difference(expected: &CanonicalForm, actual: &CanonicalForm) -> Option<Violation> {
    let n = expected.variables.len();
    if actual.variables.len() != n || actual.constraints.len() != expected.constraints.len() {
        return Some(Violation::new(
            ViolationKind::ShapeMismatch,
            format!(
                "expected {} variables and {} constraints, IR gives {} and {}",
                n,
                expected.constraints.len(),
                actual.variables.len(),
                actual.constraints.len()
            ),
        ));
    }
    let differs =
        |a: &crate::number::Rational, b: &crate::number::Rational| (to_f64(a) - to_f64(b)).abs() > CANONICAL_TOL;
    match (&expected.objective, &actual.objective) {
        (Some(e), Some(a)) => {
            if e.direction != a.direction {
                return Some(Violation::new(
                    ViolationKind::ObjectiveMismatch,
                    format!("objective direction {} vs {}", e.direction.word(), a.direction.word()),
                ));
            }
            for j in 0..n {
                if differs(&e.coefficients[j], &a.coefficients[j]) {
                    return Some(Violation::new(
                        ViolationKind::CoefficientMismatch,
                        format!(
                            "cell objective/var_{j}: expected {}, IR gives {}",
                            to_f64(&e.coefficients[j]),
                            to_f64(&a.coefficients[j])
                        ),
                    ));
                }
            }
        }
        (None, None) => {}
        _ => {
            return Some(Violation::new(
                ViolationKind::ObjectiveMismatch,
                "objective present on one side only",
            ))
        }
    }
    for (k, (e, a)) in expected.constraints.iter().zip(&actual.constraints).enumerate() {
        for j in 0..n {
            if differs(&e.coefficients[j], &a.coefficients[j]) {
                return Some(Violation::new(
                    ViolationKind::CoefficientMismatch,
                    format!(
                        "cell constraint_{k}/var_{j}: expected {}, IR gives {}",
                        to_f64(&e.coefficients[j]),
                        to_f64(&a.coefficients[j])
                    ),
                ));
            }
        }
        if differs(&e.rhs, &a.rhs) {
            return Some(Violation::new(
                ViolationKind::RhsMismatch,
                format!(
                    "cell constraint_{k}/rhs: expected {}, IR gives {}",
                    to_f64(&e.rhs),
                    to_f64(&a.rhs)
                ),
            ));
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub problems: usize,
    pub declarations: usize,
    pub constraint_types: usize,
    pub kind_histogram: BTreeMap<ConstraintKind, usize>,
    pub avg_variables: f64,
    pub avg_constraints: f64,
    pub split_sizes: BTreeMap<Split, usize>,
    /// `(source, target)` problem counts per split.
    pub domain_mix: BTreeMap<Split, (usize, usize)>,
    /// Dev/test splits whose source share is off 1:3 by more than rounding.
    pub ratio_flags: Vec<String>,
}

/// Summary statistics; records whose IR does not parse are skipped.
pub fn stats(records: &[ProblemRecord]) -> CorpusStats {
    let mut declarations = 0;
    let mut vars = 0;
    let mut constraints = 0;
    let mut problems = 0;
    let mut hist: BTreeMap<ConstraintKind, usize> = BTreeMap::new();
    let mut split_sizes = BTreeMap::new();
    let mut mix: BTreeMap<Split, (usize, usize)> = BTreeMap::new();
    for r in records {
        let Some(doc) = r.gold_document() else { continue };
        problems += 1;
        declarations += doc.declarations.len();
        constraints += doc.constraints().count();
        vars += r.gold_canonical.variables.len();
        for c in doc.constraints() {
            *hist.entry(c.kind()).or_default() += 1;
        }
        if let Some(s) = r.split {
            *split_sizes.entry(s).or_default() += 1;
            let e = mix.entry(s).or_default();
            if r.domain.is_source() {
                e.0 += 1;
            } else {
                e.1 += 1;
            }
        }
    }
    let mut ratio_flags = Vec::new();
    for s in [Split::Dev, Split::Test] {
        if let Some(&(src, tgt)) = mix.get(&s) {
            let expected = (src + tgt) as f64 / 4.0;
            if (src as f64 - expected).abs() >= 1.0 {
                ratio_flags.push(format!(
                    "{s:?} split has {src} source and {tgt} target problems (1:3 expects about {expected:.2} source)"
                ));
            }
        }
    }
    let avg = |x: usize| if problems == 0 { 0.0 } else { x as f64 / problems as f64 };
    CorpusStats {
        problems,
        declarations,
        constraint_types: hist.len(),
        kind_histogram: hist,
        avg_variables: avg(vars),
        avg_constraints: avg(constraints),
        split_sizes,
        domain_mix: mix,
        ratio_flags,
    }
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "problems            {}", self.problems)?;
        writeln!(f, "declarations        {}", self.declarations)?;
        writeln!(f, "constraint types    {}", self.constraint_types)?;
        writeln!(f, "avg variables       {:.2}", self.avg_variables)?;
        writeln!(f, "avg constraints     {:.2}", self.avg_constraints)?;
        for (k, v) in &self.kind_histogram {
            writeln!(f, "  {:<18}{v}", k.tag())?;
        }
        for (s, v) in &self.split_sizes {
            let (src, tgt) = self.domain_mix.get(s).copied().unwrap_or_default();
            writeln!(
                f,
                "split {:<14}{v} ({src} source / {tgt} target)",
                format!("{s:?}").to_lowercase()
            )?;
        }
        for flag in &self.ratio_flags {
            writeln!(f, "warning: {flag}")?;
        }
        Ok(())
    }
}

/// Import for the released generation-task JSON layout: one object per
/// line mapping an id to an entry with `document`, `obj_declaration`,
/// `const_declarations` and optional `spans`.
pub mod import {
    use super::*;
    use serde_json::{Map, Value};

    fn s<'a>(v: &'a Value, key: &str) -> Option<&'a str> {
        v.get(key).and_then(Value::as_str)
    }

    fn text_of(v: Option<&Value>) -> Option<String> {
        match v? {
            Value::String(x) => Some(x.clone()),
            Value::Number(n) => Some(n.to_string()),
            _ => None,
        }
    }

    fn quantity(v: Option<&Value>, ctx: NumberContext) -> Result<Quantity, String> {
        let t = text_of(v).ok_or("missing number")?;
        Quantity::parse(&t, ctx).map_err(|e| e.to_string())
    }

    fn terms(v: Option<&Value>) -> Result<Vec<Term>, String> {
        let obj = v.and_then(Value::as_object).ok_or("missing terms")?;
        obj.iter()
            .map(|(var, p)| {
                Ok(Term {
                    variable: var.clone(),
                    coefficient: quantity(Some(p), NumberContext::Param)?,
                })
            })
            .collect()
    }

    fn operator(v: &Value) -> Result<Operator, String> {
        s(v, "operator")
            .and_then(Operator::from_tag)
            .ok_or_else(|| "missing operator".to_string())
    }

    fn constraint(v: &Value) -> Result<Constraint, String> {
        let kind = s(v, "type").ok_or("missing type")?.to_ascii_lowercase();
        let var = || s(v, "var").map(str::to_string).ok_or("missing var".to_string());
        let limit = |ctx| quantity(v.get("limit"), ctx);
        let body = match kind.as_str() {
            "linear" => ConstraintBody::LinearConstraint {
                limit: limit(NumberContext::Limit)?,
                terms: terms(v.get("terms"))?,
            },
            "sum" => ConstraintBody::SumConstraint {
                limit: limit(NumberContext::Limit)?,
            },
            "upperbound" | "upper_bound" => ConstraintBody::UpperBound {
                variable: var()?,
                limit: limit(NumberContext::Limit)?,
            },
            "lowerbound" | "lower_bound" => ConstraintBody::LowerBound {
                variable: var()?,
                limit: limit(NumberContext::Limit)?,
            },
            "ratio" => ConstraintBody::RatioConstraint {
                variable: var()?,
                limit: limit(NumberContext::Ratio)?,
            },
            "xby" | "xy" => ConstraintBody::XbyConstraint {
                compared: s(v, "x_var").ok_or("missing x_var")?.to_string(),
                base: s(v, "y_var").ok_or("missing y_var")?.to_string(),
                multiplier: match v.get("param") {
                    Some(p) if !p.is_null() => Some(quantity(Some(p), NumberContext::Param)?),
                    _ => None,
                },
                xy_alias: kind == "xy",
            },
            other => return Err(format!("unknown constraint type {other:?}")),
        };
        Ok(Constraint {
            const_dir: s(v, "direction").unwrap_or_default().to_string(),
            operator: operator(v)?,
            body,
        })
    }

    fn entry(id: &str, v: &Value, domain: Domain, split: Option<Split>) -> Result<ProblemRecord, String> {
        let description = s(v, "document").ok_or("missing document")?.to_string();
        let o = v.get("obj_declaration").ok_or("missing obj_declaration")?;
        let direction = s(o, "direction")
            .and_then(Direction::from_word)
            .ok_or("missing objective direction")?;
        let mut decls = vec![Declaration::Objective(Objective {
            direction,
            name: s(o, "name").unwrap_or_default().to_string(),
            terms: terms(o.get("terms"))?,
        })];
        for c in v
            .get("const_declarations")
            .and_then(Value::as_array)
            .into_iter()
            .flatten()
        {
            decls.push(Declaration::Constraint(constraint(c)?));
        }
        let doc = IrDocument::new(decls);
        let gold_canonical = canonicalize(&doc).map_err(|e| e.to_string())?;
        let entities = v
            .get("spans")
            .and_then(Value::as_array)
            .into_iter()
            .flatten()
            .filter_map(|sp| {
                let label: EntityLabel = serde_json::from_value(sp.get("label")?.clone()).ok()?;
                let start = sp.get("start")?.as_u64()? as usize;
                let end = sp.get("end")?.as_u64()? as usize;
                Some(EntitySpan::from_chars(&description, start, end, label))
            })
            .collect();
        let domain = s(v, "domain")
            .and_then(|d| serde_json::from_value(Value::String(d.to_lowercase())).ok())
            .unwrap_or(domain);
        Ok(ProblemRecord {
            id: id.to_string(),
            domain,
            description,
            entities,
            gold_ir: crate::ir::print_ir(&doc),
            gold_canonical,
            split,
            notes: None,
        })
    }

    /// Converts the released layout. Entries that cannot be converted are
    /// returned as rejections with the reason.
    pub fn import_generation_jsonl(
        text: &str,
        default_domain: Domain,
        split: Option<Split>,
    ) -> Result<Corpus, DatasetError> {
        let mut corpus = Corpus::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let map: Map<String, Value> = serde_json::from_str(line).map_err(|e| DatasetError::Schema {
                line: i + 1,
                field: e.to_string(),
            })?;
            for (id, v) in &map {
                match entry(id, v, default_domain, split) {
                    Ok(r) => corpus.records.push(r),
                    Err(reason) => corpus.rejections.push(Rejection {
                        line: i + 1,
                        id: id.clone(),
                        violations: vec![Violation::new(ViolationKind::IrSyntax, reason)],
                    }),
                }
            }
        }
        Ok(corpus)
    }
}

/// The seven worked problems shipped with the crate.
pub const APPENDIX_FIXTURES: &str = include_str!("../fixtures/appendix.jsonl");

pub fn appendix_corpus() -> Corpus {
    parse_corpus(APPENDIX_FIXTURES).expect("bundled fixtures parse")
}
