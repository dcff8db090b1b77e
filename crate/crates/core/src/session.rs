//! Review sessions: suggestions are offered one at a time, the user accepts,
//! rejects, edits or retypes each, and the accepted model is solved.
//!
//! Every successful action is appended to [`Session::log`]; replaying the log
//! with the same generator and lexicon rebuilds an identical session.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::{canonicalize, canonicalize_partial, variable_key, CanonicalForm, CanonicalizeError};
use crate::ir::{
    collapse_ws, parse_fragment, print_declaration, print_ir, Constraint, ConstraintBody, ConstraintKind, Declaration,
    DeclarationSyntaxError, EntityLabel, EntitySpan, IrDocument, Operator, Quantity, Term,
};
use crate::lexicon::Lexicon;
use crate::number::{decimal_text, int, NumberContext, Rational};
use crate::solver::{solve_canonical, LpSolution, SolveStatus};
use crate::suggest::{
    prompt_targets, source_span, suggest_one, tag_with, DeclarationPrompt, GeneratorContract, Suggestion,
};

pub const MAX_DESCRIPTION_BYTES: usize = 64 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Suggested,
    Accepted,
    Rejected,
    Edited,
}

impl Status {
    /// Edited declarations count as accepted.
    pub fn is_accepted(self) -> bool {
        matches!(self, Status::Accepted | Status::Edited)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionDeclaration {
    pub index: usize,
    /// Position of the prompt among the session's prompt targets.
    pub prompt_index: usize,
    pub prompt: Option<DeclarationPrompt>,
    pub status: Status,
    /// `None` while a failed suggestion has not been edited.
    pub declaration: Option<Declaration>,
    pub ir: Option<String>,
    pub rendered: Option<String>,
    pub error: Option<String>,
    /// The description sentence the declaration came from.
    pub source: String,
    pub source_span: (usize, usize),
}

impl SessionDeclaration {
    fn set(&mut self, decl: Declaration) {
        self.ir = Some(print_declaration(&decl));
        self.rendered = Some(render(&decl));
        self.declaration = Some(decl);
        self.error = None;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    Create { id: String, description: String },
    SetEntities { entities: Vec<EntitySpan> },
    Next,
    Accept { index: usize },
    Reject { index: usize },
    Edit { index: usize, ir: String },
    Retype { index: usize, kind: ConstraintKind },
}

/// Field-level edit; turned into IR by [`Session::patch_ir`] before it is applied.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldPatch {
    pub limit: Option<String>,
    pub operator: Option<Operator>,
    pub multiplier: Option<String>,
    pub const_dir: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("description is empty")]
    EmptyDescription,
    #[error("description is {0} bytes, over the {MAX_DESCRIPTION_BYTES} byte limit")]
    DescriptionTooLarge(usize),
    #[error("entity {index}: {reason}")]
    InvalidEntity { index: usize, reason: String },
    #[error("no declaration {0}")]
    UnknownDeclaration(usize),
    #[error(transparent)]
    Syntax(#[from] DeclarationSyntaxError),
    #[error("{field}: {reason}")]
    InvalidField { field: String, reason: String },
    #[error("{message}")]
    Conflict {
        code: String,
        message: String,
        missing_roles: Vec<String>,
    },
    #[error("action log: {0}")]
    Log(String),
}

impl SessionError {
    pub fn code(&self) -> &str {
        match self {
            SessionError::EmptyDescription => "empty_description",
            SessionError::DescriptionTooLarge(_) => "description_too_large",
            SessionError::InvalidEntity { .. } => "invalid_entity",
            SessionError::UnknownDeclaration(_) => "unknown_declaration",
            SessionError::Syntax(_) => "syntax_error",
            SessionError::InvalidField { .. } => "invalid_field",
            SessionError::Conflict { code, .. } => code,
            SessionError::Log(_) => "invalid_log",
        }
    }

    fn conflict(code: &str, message: impl Into<String>) -> Self {
        SessionError::Conflict {
            code: code.into(),
            message: message.into(),
            missing_roles: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfeasibilityHint {
    /// Constraint row of the canonical form.
    pub row: usize,
    pub declaration: usize,
    pub source: String,
    pub rendered: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub solution: LpSolution,
    pub canonical: CanonicalForm,
    /// Declaration index of each canonical constraint row.
    pub row_declarations: Vec<usize>,
    pub hints: Vec<InfeasibilityHint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub description: String,
    pub entities: Vec<EntitySpan>,
    pub declarations: Vec<SessionDeclaration>,
    /// Prompts already handed out.
    pub cursor: usize,
    pub log: Vec<Action>,
}

impl Session {
    /// Validates the description and tags it with `lexicon`.
    pub fn create(id: impl Into<String>, description: &str, lexicon: &Lexicon) -> Result<Session, SessionError> {
        if description.trim().is_empty() {
            return Err(SessionError::EmptyDescription);
        }
        if description.len() > MAX_DESCRIPTION_BYTES {
            return Err(SessionError::DescriptionTooLarge(description.len()));
        }
        let id = id.into();
        Ok(Session {
            entities: tag_with(description, lexicon),
            log: vec![Action::Create {
                id: id.clone(),
                description: description.to_string(),
            }],
            id,
            description: description.to_string(),
            declarations: Vec::new(),
            cursor: 0,
        })
    }

    /// Rebuilds a session from its action log.
    pub fn replay(
        log: &[Action],
        generator: &dyn GeneratorContract,
        lexicon: &Lexicon,
    ) -> Result<Session, SessionError> {
        let Some(Action::Create { id, description }) = log.first() else {
            return Err(SessionError::Log("first action must be create".into()));
        };
        let mut s = Session::create(id.clone(), description, lexicon)?;
        for (i, a) in log.iter().enumerate().skip(1) {
            s.apply(a.clone(), generator)
                .map_err(|e| SessionError::Log(format!("action {i} failed: {e}")))?;
        }
        Ok(s)
    }

    pub fn prompt_count(&self) -> usize {
        prompt_targets(&self.entities).len()
    }

    pub fn declaration(&self, index: usize) -> Result<&SessionDeclaration, SessionError> {
        self.declarations
            .get(index)
            .ok_or(SessionError::UnknownDeclaration(index))
    }

    /// Applies one action atomically: on error the session is unchanged.
    /// Returns the index of the declaration touched, `None` for a `next`
    /// with no prompts left (which is not logged) or a `set_entities`.
    pub fn apply(&mut self, action: Action, generator: &dyn GeneratorContract) -> Result<Option<usize>, SessionError> {
        let mut next = self.clone();
        let touched = next.step(&action, generator)?;
        if matches!(action, Action::Next) && touched.is_none() {
            return Ok(None);
        }
        next.check_objectives()?;
        next.log.push(action);
        *self = next;
        Ok(touched)
    }

    pub fn next(&mut self, generator: &dyn GeneratorContract) -> Result<Option<&SessionDeclaration>, SessionError> {
        Ok(self.apply(Action::Next, generator)?.map(|i| &self.declarations[i]))
    }

    fn step(&mut self, action: &Action, generator: &dyn GeneratorContract) -> Result<Option<usize>, SessionError> {
        match action {
            Action::Create { .. } => Err(SessionError::Log("session already created".into())),
            Action::SetEntities { entities } => {
                self.set_entities(entities, generator)?;
                Ok(None)
            }
            Action::Next => {
                let targets = prompt_targets(&self.entities);
                let Some(&target) = targets.get(self.cursor) else {
                    return Ok(None);
                };
                let s = suggest_one(generator, &self.description, &self.entities, target, self.cursor);
                let index = self.declarations.len();
                self.declarations.push(self.declaration_from(index, s));
                self.cursor += 1;
                Ok(Some(index))
            }
            Action::Accept { index } => {
                let d = self.declaration_mut(*index)?;
                if d.declaration.is_none() {
                    return Err(SessionError::conflict(
                        "nothing_to_accept",
                        "the suggestion failed; edit it before accepting",
                    ));
                }
                if d.status != Status::Edited {
                    d.status = Status::Accepted;
                }
                Ok(Some(*index))
            }
            Action::Reject { index } => {
                self.declaration_mut(*index)?.status = Status::Rejected;
                Ok(Some(*index))
            }
            Action::Edit { index, ir } => {
                let decl = parse_fragment(ir)?;
                let d = self.declaration_mut(*index)?;
                d.set(decl);
                d.status = Status::Edited;
                Ok(Some(*index))
            }
            Action::Retype { index, kind } => {
                let d = self.declaration(*index)?;
                let Some(c) = d.declaration.as_ref().and_then(Declaration::as_constraint) else {
                    return Err(SessionError::conflict(
                        "not_a_constraint",
                        "only constraints can be retyped",
                    ));
                };
                if c.kind() == *kind {
                    return Ok(Some(*index));
                }
                let roles = Roles::gather(c, self.sentence_entities(d.source_span));
                let c = retype(c, *kind, &roles)?;
                let d = self.declaration_mut(*index)?;
                d.set(Declaration::Constraint(c));
                d.status = Status::Edited;
                Ok(Some(*index))
            }
        }
    }

    fn declaration_mut(&mut self, index: usize) -> Result<&mut SessionDeclaration, SessionError> {
        self.declarations
            .get_mut(index)
            .ok_or(SessionError::UnknownDeclaration(index))
    }

    fn declaration_from(&self, index: usize, s: Suggestion) -> SessionDeclaration {
        let source_span = s
            .prompt
            .as_ref()
            .map(|p| source_span(&self.description, p.anchor))
            .unwrap_or((0, 0));
        let mut d = SessionDeclaration {
            index,
            prompt_index: s.index,
            prompt: s.prompt,
            status: Status::Suggested,
            declaration: None,
            ir: None,
            rendered: None,
            error: None,
            source: s.source,
            source_span,
        };
        match s.outcome {
            Ok(g) => d.set(g.declaration),
            Err(f) => d.error = Some(f.reason),
        }
        d
    }

    /// Replaces the entities. Declarations still in suggested status are
    /// regenerated from their prompt; decided ones are left alone.
    fn set_entities(&mut self, entities: &[EntitySpan], generator: &dyn GeneratorContract) -> Result<(), SessionError> {
        let chars: Vec<char> = self.description.chars().collect();
        let mut spans = Vec::with_capacity(entities.len());
        for (index, e) in entities.iter().enumerate() {
            let bad = |reason: String| SessionError::InvalidEntity { index, reason };
            if e.start >= e.end || e.end > chars.len() {
                return Err(bad(format!("span {}..{} is outside the description", e.start, e.end)));
            }
            let actual: String = chars[e.start..e.end].iter().collect();
            if !e.text.is_empty() && collapse_ws(&e.text) != collapse_ws(&actual) {
                return Err(bad(format!("text {:?} does not match {:?}", e.text, actual)));
            }
            spans.push(EntitySpan::from_chars(&self.description, e.start, e.end, e.label));
        }
        spans.sort_by_key(|e| (e.start, e.end));
        self.entities = spans;
        let targets = prompt_targets(&self.entities);
        self.cursor = self.cursor.min(targets.len());
        for i in 0..self.declarations.len() {
            let d = &self.declarations[i];
            if d.status != Status::Suggested {
                continue;
            }
            let pi = d.prompt_index;
            let fresh = match targets.get(pi) {
                Some(&t) => {
                    let s = suggest_one(generator, &self.description, &self.entities, t, pi);
                    self.declaration_from(i, s)
                }
                None => SessionDeclaration {
                    prompt: None,
                    declaration: None,
                    ir: None,
                    rendered: None,
                    error: Some("the prompt is no longer offered by the entities".into()),
                    ..d.clone()
                },
            };
            self.declarations[i] = fresh;
        }
        Ok(())
    }

    fn check_objectives(&self) -> Result<(), SessionError> {
        let n = self
            .declarations
            .iter()
            .filter(|d| d.status != Status::Rejected)
            .filter(|d| d.declaration.as_ref().is_some_and(Declaration::is_objective))
            .count();
        if n > 1 {
            return Err(SessionError::conflict(
                "second_objective",
                "another objective is already in the model; reject it first",
            ));
        }
        Ok(())
    }

    fn sentence_entities(&self, span: (usize, usize)) -> Vec<&EntitySpan> {
        self.entities
            .iter()
            .filter(|e| e.start >= span.0 && e.end <= span.1)
            .collect()
    }

    /// IR for declaration `index` with `patch` applied.
    pub fn patch_ir(&self, index: usize, patch: &FieldPatch) -> Result<String, SessionError> {
        let d = self.declaration(index)?;
        let decl = d.declaration.clone().ok_or_else(|| SessionError::InvalidField {
            field: "declaration".into(),
            reason: "the suggestion failed; send IR instead of a field patch".into(),
        })?;
        let invalid = |field: &str, reason: String| SessionError::InvalidField {
            field: field.into(),
            reason,
        };
        let Declaration::Constraint(mut c) = decl else {
            return Err(invalid("declaration", "objectives take IR edits only".into()));
        };
        if let Some(text) = &patch.limit {
            let ctx = if c.kind() == ConstraintKind::RatioConstraint {
                NumberContext::Ratio
            } else {
                NumberContext::Limit
            };
            let q = Quantity::parse(text, ctx).map_err(|e| invalid("LIMIT", e.to_string()))?;
            match &mut c.body {
                ConstraintBody::LinearConstraint { limit, .. }
                | ConstraintBody::SumConstraint { limit }
                | ConstraintBody::UpperBound { limit, .. }
                | ConstraintBody::LowerBound { limit, .. }
                | ConstraintBody::RatioConstraint { limit, .. } => *limit = q,
                ConstraintBody::XbyConstraint { .. } => {
                    return Err(invalid("LIMIT", "XBY constraints have no limit".into()))
                }
            }
        }
        if let Some(text) = &patch.multiplier {
            let q = Quantity::parse(text, NumberContext::Param).map_err(|e| invalid("PARAM", e.to_string()))?;
            match &mut c.body {
                ConstraintBody::XbyConstraint {
                    multiplier, xy_alias, ..
                } => {
                    *multiplier = Some(q);
                    *xy_alias = false;
                }
                _ => return Err(invalid("PARAM", "only XBY constraints have a multiplier".into())),
            }
        }
        if let Some(op) = patch.operator {
            c.operator = op;
        }
        if let Some(dir) = &patch.const_dir {
            c.const_dir = collapse_ws(dir);
        }
        Ok(print_declaration(&Declaration::Constraint(c)))
    }

    /// Accepted and edited declarations, in session order.
    pub fn accepted(&self) -> impl Iterator<Item = (usize, &Declaration)> {
        self.declarations
            .iter()
            .filter(|d| d.status.is_accepted())
            .filter_map(|d| d.declaration.as_ref().map(|x| (d.index, x)))
    }

    pub fn accepted_document(&self) -> IrDocument {
        let mut doc = IrDocument::new(self.accepted().map(|(_, d)| d.clone()).collect());
        doc.source_text = self.description.clone();
        doc
    }

    /// The accepted model as IR text.
    pub fn model_ir(&self) -> String {
        print_ir(&self.accepted_document())
    }

    /// Canonical form of the accepted declarations; the objective may be missing.
    pub fn canonical(&self) -> Result<CanonicalForm, SessionError> {
        canonicalize_partial(&self.accepted_document()).map_err(model_error)
    }

    /// Declaration `index` as a canonical row read against the accepted
    /// model: every accepted variable as a column, that single row, no
    /// objective. `None` for objectives and failed suggestions.
    pub fn row_preview(&self, index: usize) -> Result<Option<CanonicalForm>, SessionError> {
        let d = self.declaration(index)?;
        let Some(Declaration::Constraint(c)) = &d.declaration else {
            return Ok(None);
        };
        let mut decls: Vec<Declaration> = self
            .accepted()
            .filter(|(i, _)| *i != index)
            .map(|(_, d)| d.clone())
            .collect();
        decls.push(Declaration::Constraint(c.clone()));
        let mut form = canonicalize_partial(&IrDocument::new(decls)).map_err(model_error)?;
        let row = form.constraints.pop().expect("pushed last");
        form.constraints = vec![row];
        form.objective = None;
        Ok(Some(form))
    }

    pub fn solve(&self) -> Result<SolveReport, SessionError> {
        let doc = self.accepted_document();
        let canonical = canonicalize(&doc).map_err(model_error)?;
        let solution = solve_canonical(&canonical, true).map_err(model_error)?;
        let row_declarations: Vec<usize> = self
            .accepted()
            .filter(|(_, d)| !d.is_objective())
            .map(|(i, _)| i)
            .collect();
        let hints = if solution.status == SolveStatus::Infeasible {
            solution
                .infeasible_rows
                .iter()
                .map(|&row| {
                    let d = &self.declarations[row_declarations[row]];
                    InfeasibilityHint {
                        row,
                        declaration: d.index,
                        source: d.source.clone(),
                        rendered: d.rendered.clone().unwrap_or_default(),
                    }
                })
                .collect()
        } else {
            Vec::new()
        };
        Ok(SolveReport {
            solution,
            canonical,
            row_declarations,
            hints,
        })
    }
}

fn model_error(e: CanonicalizeError) -> SessionError {
    match e {
        CanonicalizeError::NoObjective => SessionError::conflict("no_objective", "the model has no accepted objective"),
        other => SessionError::conflict("invalid_model", other.to_string()),
    }
}

/// What the declaration and its sentence offer for rebuilding it as another kind.
#[derive(Debug, Default)]
struct Roles {
    variables: Vec<String>,
    terms: Vec<Term>,
    params: Vec<String>,
    limit: Option<String>,
}

impl Roles {
    fn gather(c: &Constraint, sentence: Vec<&EntitySpan>) -> Roles {
        let mut r = Roles::default();
        let mut add = |v: &str| {
            let v = collapse_ws(v);
            if !r.variables.iter().any(|x| variable_key(x) == variable_key(&v)) {
                r.variables.push(v);
            }
        };
        match &c.body {
            // the compared operand is written last but reads first
            ConstraintBody::XbyConstraint { base, compared, .. } => {
                add(compared);
                add(base);
            }
            body => body.variables().into_iter().for_each(&mut add),
        }
        for e in sentence.iter().filter(|e| e.label == EntityLabel::Var) {
            add(&e.text);
        }
        if let ConstraintBody::LinearConstraint { terms, .. } = &c.body {
            r.terms = terms.clone();
        }
        if let ConstraintBody::XbyConstraint {
            multiplier: Some(k), ..
        } = &c.body
        {
            r.params.push(k.text.clone());
        }
        r.params.extend(
            sentence
                .iter()
                .filter(|e| e.label == EntityLabel::Param)
                .map(|e| collapse_ws(&e.text)),
        );
        r.limit = c.body.limit().map(|q| q.text.clone()).or_else(|| {
            sentence
                .iter()
                .find(|e| e.label == EntityLabel::Limit)
                .map(|e| collapse_ws(&e.text))
        });
        r
    }

    /// The single variable a bound keeps: largest |coefficient| for a linear
    /// constraint, the first operand otherwise.
    fn single(&self) -> Option<String> {
        let mut best: Option<(&Term, Rational)> = None;
        for t in &self.terms {
            let a = abs(&t.coefficient.value);
            if best.as_ref().is_none_or(|(_, b)| a > *b) {
                best = Some((t, a));
            }
        }
        best.map(|(t, _)| t.variable.clone())
            .or_else(|| self.variables.first().cloned())
    }
}

fn abs(r: &Rational) -> Rational {
    if *r < int(0) {
        -r.clone()
    } else {
        r.clone()
    }
}

fn retype(c: &Constraint, kind: ConstraintKind, roles: &Roles) -> Result<Constraint, SessionError> {
    let mut missing = Vec::new();
    let context = if kind == ConstraintKind::RatioConstraint {
        NumberContext::Ratio
    } else {
        NumberContext::Limit
    };
    let limit = if kind == ConstraintKind::XbyConstraint {
        None
    } else {
        let q = roles.limit.as_deref().and_then(|t| Quantity::parse(t, context).ok());
        if q.is_none() {
            missing.push("LIMIT".to_string());
        }
        q
    };
    let need_vars = match kind {
        ConstraintKind::SumConstraint => 0,
        ConstraintKind::XbyConstraint => 2,
        _ => 1,
    };
    let have = roles.variables.len().max(roles.terms.len());
    missing.extend((have..need_vars).map(|_| "VAR".to_string()));
    if !missing.is_empty() {
        return Err(SessionError::Conflict {
            code: "missing_roles".into(),
            message: format!("the stored entities cannot fill a {kind}"),
            missing_roles: missing,
        });
    }
    if let Some(q) = &limit {
        if kind == ConstraintKind::RatioConstraint && (q.value < int(0) || q.value > int(1)) {
            return Err(SessionError::Conflict {
                code: "missing_roles".into(),
                message: format!("limit {} is not a fraction", q.text),
                missing_roles: vec!["LIMIT".into()],
            });
        }
    }
    let limit = || limit.clone().expect("checked above");
    let single = || roles.single().expect("checked above");
    let mut operator = c.operator;
    let body = match kind {
        ConstraintKind::LinearConstraint => {
            let terms = if !roles.terms.is_empty() {
                roles.terms.clone()
            } else {
                let paired = roles.params.len() == roles.variables.len();
                roles
                    .variables
                    .iter()
                    .enumerate()
                    .map(|(i, v)| Term {
                        variable: v.clone(),
                        coefficient: paired
                            .then(|| Quantity::parse(&roles.params[i], NumberContext::Param).ok())
                            .flatten()
                            .unwrap_or_else(|| Quantity::from_value(int(1))),
                    })
                    .collect()
            };
            ConstraintBody::LinearConstraint { limit: limit(), terms }
        }
        ConstraintKind::SumConstraint => ConstraintBody::SumConstraint { limit: limit() },
        ConstraintKind::UpperBound => {
            operator = Operator::LessOrEqual;
            ConstraintBody::UpperBound {
                variable: single(),
                limit: limit(),
            }
        }
        ConstraintKind::LowerBound => {
            operator = Operator::GreaterOrEqual;
            ConstraintBody::LowerBound {
                variable: single(),
                limit: limit(),
            }
        }
        ConstraintKind::RatioConstraint => ConstraintBody::RatioConstraint {
            variable: single(),
            limit: limit(),
        },
        ConstraintKind::XbyConstraint => {
            let multiplier = roles
                .params
                .iter()
                .find_map(|p| Quantity::parse(p, NumberContext::Param).ok());
            ConstraintBody::XbyConstraint {
                compared: roles.variables[0].clone(),
                base: roles.variables[1].clone(),
                xy_alias: multiplier.is_none(),
                multiplier,
            }
        }
    };
    Ok(Constraint {
        const_dir: c.const_dir.clone(),
        operator,
        body,
    })
}

fn number(q: &Quantity) -> String {
    decimal_text(&q.value, 4)
}

fn terms_text(terms: &[Term]) -> String {
    terms
        .iter()
        .map(|t| format!("{}·{}", number(&t.coefficient), t.variable))
        .collect::<Vec<_>>()
        .join(" + ")
}

/// A one-line algebraic reading of a declaration.
pub fn render(decl: &Declaration) -> String {
    match decl {
        Declaration::Objective(o) if o.terms.is_empty() => format!("{} {}", o.direction.word(), o.name),
        Declaration::Objective(o) => format!("{} {} = {}", o.direction.word(), o.name, terms_text(&o.terms)),
        Declaration::Constraint(c) => {
            let op = c.operator.symbol();
            match &c.body {
                ConstraintBody::LinearConstraint { limit, terms } => {
                    format!("{} {op} {}", terms_text(terms), number(limit))
                }
                ConstraintBody::SumConstraint { limit } => format!("sum of all variables {op} {}", number(limit)),
                ConstraintBody::UpperBound { variable, limit } | ConstraintBody::LowerBound { variable, limit } => {
                    format!("{variable} {op} {}", number(limit))
                }
                ConstraintBody::RatioConstraint { variable, limit } => {
                    format!("{variable} {op} {}·(sum of all variables)", number(limit))
                }
                ConstraintBody::XbyConstraint { .. } => {
                    let ConstraintBody::XbyConstraint { base, compared, .. } = &c.body else {
                        unreachable!()
                    };
                    let k = c.body.multiplier_value().unwrap_or_else(|| int(1));
                    if k == int(1) {
                        format!("{compared} {op} {base}")
                    } else {
                        format!("{compared} {op} {}·{base}", decimal_text(&k, 4))
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::suggest::RuleGenerator;

    const HOTEL: &str = "A hotel employs cleaners and receptionists. Cleaners earn $500 per week and \
        receptionists earn $350 per week. The hotel requires a minimum of 100 workers of whom at least \
        20 must be receptionists. To keep the hotel clean and running smoothly, the number of \
        receptionists should be at least a third of the number of cleaners. The hotel wants to keep \
        the weekly wage bill below $30000. Formulate an LP to minimize the wage bill.";

    fn start(d: &str) -> (Session, RuleGenerator) {
        let g = RuleGenerator::default();
        let s = Session::create("s1", d, g.lexicon()).unwrap();
        (s, g)
    }

    fn drain(s: &mut Session, g: &RuleGenerator) {
        while s.next(g).unwrap().is_some() {}
    }

    #[test]
    fn create_checks_the_description() {
        let lex = Lexicon::shared();
        assert_eq!(Session::create("a", " \n ", lex), Err(SessionError::EmptyDescription));
        let big = "x ".repeat(MAX_DESCRIPTION_BYTES);
        assert!(matches!(
            Session::create("a", &big, lex),
            Err(SessionError::DescriptionTooLarge(_))
        ));
        let s = Session::create("a", HOTEL, lex).unwrap();
        assert!(s.declarations.is_empty());
        assert!(!s.entities.is_empty());
    }

    #[test]
    fn next_walks_the_prompts_then_stops() {
        let (mut s, g) = start(HOTEL);
        let first = s.next(&g).unwrap().unwrap().clone();
        assert!(first.declaration.as_ref().unwrap().is_objective());
        assert_eq!(first.status, Status::Suggested);
        drain(&mut s, &g);
        assert_eq!(s.cursor, s.prompt_count());
        let logged = s.log.len();
        assert!(s.next(&g).unwrap().is_none());
        assert_eq!(s.log.len(), logged);
    }

    #[test]
    fn decisions_and_replay() {
        let (mut s, g) = start(HOTEL);
        drain(&mut s, &g);
        s.apply(Action::Accept { index: 0 }, &g).unwrap();
        s.apply(Action::Reject { index: 1 }, &g).unwrap();
        let ir = s
            .patch_ir(
                2,
                &FieldPatch {
                    limit: Some("25".into()),
                    ..Default::default()
                },
            )
            .unwrap();
        s.apply(Action::Edit { index: 2, ir }, &g).unwrap();
        let row = s.row_preview(2).unwrap().unwrap();
        assert_eq!(row.constraints[0].rhs, int(-25));
        assert!(s.row_preview(0).unwrap().is_none());
        s.apply(Action::Accept { index: 2 }, &g).unwrap();
        assert_eq!(s.declarations[2].status, Status::Edited);
        assert_eq!(s.declarations[1].status, Status::Rejected);
        assert_eq!(s.accepted().count(), 2);

        let again = Session::replay(&s.log, &g, g.lexicon()).unwrap();
        assert_eq!(again.model_ir(), s.model_ir());
        assert_eq!(
            serde_json::to_string(&again).unwrap(),
            serde_json::to_string(&s).unwrap()
        );
    }

    #[test]
    fn failed_actions_leave_no_trace() {
        let (mut s, g) = start(HOTEL);
        s.next(&g).unwrap();
        let before = s.clone();
        let err = s
            .apply(
                Action::Edit {
                    index: 0,
                    ir: "<DECLARATION> <LIMIT> 3".into(),
                },
                &g,
            )
            .unwrap_err();
        assert!(matches!(err, SessionError::Syntax(_)));
        assert_eq!(
            s.apply(Action::Accept { index: 9 }, &g),
            Err(SessionError::UnknownDeclaration(9))
        );
        assert_eq!(s, before);
    }

    #[test]
    fn one_objective_at_a_time() {
        let (mut s, g) = start(HOTEL);
        drain(&mut s, &g);
        let obj = s.declarations[0].ir.clone().unwrap();
        let err = s
            .apply(
                Action::Edit {
                    index: 1,
                    ir: obj.clone(),
                },
                &g,
            )
            .unwrap_err();
        assert_eq!(err.code(), "second_objective");
        s.apply(Action::Reject { index: 0 }, &g).unwrap();
        s.apply(Action::Edit { index: 1, ir: obj }, &g).unwrap();
        assert_eq!(
            s.apply(Action::Accept { index: 0 }, &g).unwrap_err().code(),
            "second_objective"
        );
    }

    #[test]
    fn retype_rebuilds_from_entities() {
        let (mut s, g) = start(HOTEL);
        drain(&mut s, &g);
        let kinds: Vec<ConstraintKind> = s.declarations[1..]
            .iter()
            .map(|d| d.declaration.as_ref().unwrap().as_constraint().unwrap().kind())
            .collect();
        assert_eq!(
            kinds,
            [
                ConstraintKind::SumConstraint,
                ConstraintKind::LowerBound,
                ConstraintKind::XbyConstraint,
                ConstraintKind::LinearConstraint
            ]
        );
        // same kind: nothing changes
        let before = s.declarations[1].clone();
        s.apply(
            Action::Retype {
                index: 1,
                kind: ConstraintKind::SumConstraint,
            },
            &g,
        )
        .unwrap();
        assert_eq!(s.declarations[1], before);

        // the minimum-of-100 sentence names one variable only
        let err = s
            .apply(
                Action::Retype {
                    index: 1,
                    kind: ConstraintKind::XbyConstraint,
                },
                &g,
            )
            .unwrap_err();
        let SessionError::Conflict {
            code, missing_roles, ..
        } = err
        else {
            panic!()
        };
        assert_eq!(
            (code.as_str(), missing_roles),
            ("missing_roles", vec!["VAR".to_string()])
        );

        // linear to upper bound keeps the heaviest term
        s.apply(
            Action::Retype {
                index: 4,
                kind: ConstraintKind::UpperBound,
            },
            &g,
        )
        .unwrap();
        let d = &s.declarations[4];
        assert_eq!(d.status, Status::Edited);
        let c = d.declaration.as_ref().unwrap().as_constraint().unwrap();
        assert_eq!(c.body.variables(), ["cleaners"]);
        assert_eq!(c.operator, Operator::LessOrEqual);
        assert_eq!(c.body.limit().unwrap().value, int(30000));

        // sum to upper bound picks up the sentence's variable
        s.apply(
            Action::Retype {
                index: 1,
                kind: ConstraintKind::LowerBound,
            },
            &g,
        )
        .unwrap();
        let c = s.declarations[1].declaration.as_ref().unwrap().as_constraint().unwrap();
        assert_eq!(c.body.variables(), ["receptionists"]);
        assert_eq!(c.body.limit().unwrap().value, int(100));
    }

    #[test]
    fn upper_bound_retyped_as_ratio() {
        let d = "Maximize profit from wheat and corn. At most 40% of the fields may grow corn.";
        let (mut s, g) = start(d);
        drain(&mut s, &g);
        let i = s
            .declarations
            .iter()
            .position(|x| !x.declaration.as_ref().is_none_or(Declaration::is_objective))
            .unwrap();
        let ir = "<DECLARATION>\n<CONST_DIR> at most </CONST_DIR> <LIMIT> 40% </LIMIT>\n\
                  <OPERATOR> LESS_OR_EQUAL </OPERATOR>\n<CONST_TYPE> [UPPER_BOUND] </CONST_TYPE> [for]\n\
                  <VAR> corn </VAR>\n</DECLARATION>";
        s.apply(
            Action::Edit {
                index: i,
                ir: ir.into(),
            },
            &g,
        )
        .unwrap();
        s.apply(
            Action::Retype {
                index: i,
                kind: ConstraintKind::RatioConstraint,
            },
            &g,
        )
        .unwrap();
        let c = s.declarations[i].declaration.as_ref().unwrap().as_constraint().unwrap();
        assert_eq!(c.kind(), ConstraintKind::RatioConstraint);
        assert_eq!(c.body.limit().unwrap().value, crate::number::ratio(2, 5));
        assert_eq!(
            s.declarations[i].rendered.as_deref(),
            Some("corn <= 0.4·(sum of all variables)")
        );
    }

    #[test]
    fn solve_reports_hints_for_contradictions() {
        let d = "Maximize output. Use x at most 1. Use x at least 5.";
        let (mut s, g) = start(d);
        drain(&mut s, &g);
        let edits = [
            "<DECLARATION>\n<OBJ_DIR> maximize </OBJ_DIR>\n<OBJ_NAME> output </OBJ_NAME> [is]\n<VAR> x </VAR> [TIMES] <PARAM> 1 </PARAM>\n</DECLARATION>",
            "<DECLARATION>\n<CONST_DIR> at most </CONST_DIR> <LIMIT> 1 </LIMIT>\n<OPERATOR> LESS_OR_EQUAL </OPERATOR>\n<CONST_TYPE> [UPPER_BOUND] </CONST_TYPE> [for]\n<VAR> x </VAR>\n</DECLARATION>",
            "<DECLARATION>\n<CONST_DIR> at least </CONST_DIR> <LIMIT> 5 </LIMIT>\n<OPERATOR> GREATER_OR_EQUAL </OPERATOR>\n<CONST_TYPE> [LOWER_BOUND] </CONST_TYPE> [for]\n<VAR> x </VAR>\n</DECLARATION>",
        ];
        assert_eq!(s.solve().unwrap_err().code(), "no_objective");
        for (i, ir) in edits.iter().enumerate() {
            s.apply(
                Action::Edit {
                    index: i,
                    ir: ir.to_string(),
                },
                &g,
            )
            .unwrap();
        }
        let r = s.solve().unwrap();
        assert_eq!(r.solution.status, SolveStatus::Infeasible);
        let hinted: Vec<usize> = r.hints.iter().map(|h| h.declaration).collect();
        assert_eq!(hinted, [1, 2]);
        assert_eq!(r.hints[1].source, "Use x at least 5.");

        s.apply(Action::Reject { index: 1 }, &g).unwrap();
        s.apply(Action::Reject { index: 2 }, &g).unwrap();
        assert_eq!(s.solve().unwrap().solution.status, SolveStatus::Unbounded);
    }

    #[test]
    fn new_entities_regenerate_only_open_suggestions() {
        let (mut s, g) = start(HOTEL);
        drain(&mut s, &g);
        s.apply(Action::Accept { index: 1 }, &g).unwrap();
        let accepted = s.declarations[1].clone();
        let mut entities = s.entities.clone();
        entities.retain(|e| e.label != EntityLabel::Limit);
        s.apply(Action::SetEntities { entities }, &g).unwrap();
        assert_eq!(s.declarations[1], accepted);
        assert!(s.declarations[2].declaration.is_none());
        assert!(s.declarations[2].error.is_some());

        let bad = vec![EntitySpan {
            start: 0,
            end: 5,
            label: EntityLabel::Var,
            text: "hotel".into(),
        }];
        assert_eq!(
            s.apply(Action::SetEntities { entities: bad }, &g).unwrap_err().code(),
            "invalid_entity"
        );
    }
}
