//! The XML-tagged intermediate representation (IR).
//!
//! A problem is a sequence of `<DECLARATION>` blocks. Each block is either the
//! objective (`OBJ_DIR`, `OBJ_NAME`, `VAR`/`PARAM` terms) or one constraint
//! (`CONST_DIR`, `LIMIT`, `OPERATOR`, `CONST_TYPE`, operands).

mod parse;
mod print;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::number::{decimal_text, NumberContext, Rational};

pub use parse::{parse_fragment, parse_ir, DeclarationSyntaxError, ParsedIr, ProblemSyntaxError};
pub use print::{print_declaration, print_ir};

/// The six entity labels of the tagging scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EntityLabel {
    Var,
    Param,
    Limit,
    ConstDir,
    ObjDir,
    ObjName,
}

impl EntityLabel {
    pub const ALL: [EntityLabel; 6] = [
        EntityLabel::Var,
        EntityLabel::Param,
        EntityLabel::Limit,
        EntityLabel::ConstDir,
        EntityLabel::ObjDir,
        EntityLabel::ObjName,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            EntityLabel::Var => "VAR",
            EntityLabel::Param => "PARAM",
            EntityLabel::Limit => "LIMIT",
            EntityLabel::ConstDir => "CONST_DIR",
            EntityLabel::ObjDir => "OBJ_DIR",
            EntityLabel::ObjName => "OBJ_NAME",
        }
    }
}

impl fmt::Display for EntityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// A labelled span of a problem description. Offsets count characters,
/// `end` exclusive.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub label: EntityLabel,
    #[serde(default)]
    pub text: String,
}

impl EntitySpan {
    /// Builds a span from char offsets into `description`.
    pub fn from_chars(description: &str, start: usize, end: usize, label: EntityLabel) -> Self {
        EntitySpan {
            start,
            end,
            label,
            text: description
                .chars()
                .skip(start)
                .take(end.saturating_sub(start))
                .collect(),
        }
    }

    pub fn overlaps(&self, other: &EntitySpan) -> bool {
        self.start < other.end && other.start < self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ConstraintKind {
    LinearConstraint,
    SumConstraint,
    UpperBound,
    LowerBound,
    RatioConstraint,
    XbyConstraint,
}

impl ConstraintKind {
    pub const ALL: [ConstraintKind; 6] = [
        ConstraintKind::LinearConstraint,
        ConstraintKind::SumConstraint,
        ConstraintKind::UpperBound,
        ConstraintKind::LowerBound,
        ConstraintKind::RatioConstraint,
        ConstraintKind::XbyConstraint,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            ConstraintKind::LinearConstraint => "LINEAR_CONSTRAINT",
            ConstraintKind::SumConstraint => "SUM_CONSTRAINT",
            ConstraintKind::UpperBound => "UPPER_BOUND",
            ConstraintKind::LowerBound => "LOWER_BOUND",
            ConstraintKind::RatioConstraint => "RATIO_CONSTRAINT",
            ConstraintKind::XbyConstraint => "XBY_CONSTRAINT",
        }
    }
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Error for an unrecognized `CONST_TYPE` value.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown constraint type {0:?}")]
pub struct UnknownKind(pub String);

impl FromStr for ConstraintKind {
    type Err = UnknownKind;

    /// Accepts the bracketed IR form too. `XY_CONSTRAINT` maps to XBY.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().trim_start_matches('[').trim_end_matches(']').trim();
        let upper = t.to_ascii_uppercase().replace([' ', '-'], "_");
        Ok(match upper.as_str() {
            "LINEAR_CONSTRAINT" | "LINEAR" => ConstraintKind::LinearConstraint,
            "SUM_CONSTRAINT" | "SUM" => ConstraintKind::SumConstraint,
            "UPPER_BOUND" | "UPPERBOUND" => ConstraintKind::UpperBound,
            "LOWER_BOUND" | "LOWERBOUND" => ConstraintKind::LowerBound,
            "RATIO_CONSTRAINT" | "RATIO" => ConstraintKind::RatioConstraint,
            "XBY_CONSTRAINT" | "XBY" | "XY_CONSTRAINT" | "XY" => ConstraintKind::XbyConstraint,
            _ => return Err(UnknownKind(s.to_string())),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Maximize,
    Minimize,
}

impl Direction {
    pub fn word(self) -> &'static str {
        match self {
            Direction::Maximize => "maximize",
            Direction::Minimize => "minimize",
        }
    }

    pub fn from_word(word: &str) -> Option<Direction> {
        match word.trim().to_ascii_lowercase().as_str() {
            "maximize" | "maximise" | "max" | "maximizing" | "maximising" => Some(Direction::Maximize),
            "minimize" | "minimise" | "min" | "minimizing" | "minimising" => Some(Direction::Minimize),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Operator {
    GreaterOrEqual,
    LessOrEqual,
}

impl Operator {
    pub fn tag(self) -> &'static str {
        match self {
            Operator::GreaterOrEqual => "GREATER_OR_EQUAL",
            Operator::LessOrEqual => "LESS_OR_EQUAL",
        }
    }

    pub fn from_tag(s: &str) -> Option<Operator> {
        match s.trim().to_ascii_uppercase().as_str() {
            "GREATER_OR_EQUAL" | ">=" => Some(Operator::GreaterOrEqual),
            "LESS_OR_EQUAL" | "<=" => Some(Operator::LessOrEqual),
            _ => None,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Operator::GreaterOrEqual => ">=",
            Operator::LessOrEqual => "<=",
        }
    }
}

/// A numeric token: the surface text as written plus its normalized value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quantity {
    pub text: String,
    #[serde(with = "crate::number::serde_f64")]
    pub value: Rational,
}

impl Quantity {
    pub fn parse(text: &str, context: NumberContext) -> Result<Self, crate::number::NumberParseError> {
        let value = crate::number::normalize_number(text, context)?;
        Ok(Quantity {
            text: collapse_ws(text),
            value,
        })
    }

    /// A quantity whose surface text is the decimal rendering of `value`.
    pub fn from_value(value: Rational) -> Self {
        Quantity {
            text: decimal_text(&value, 4),
            value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Term {
    pub variable: String,
    pub coefficient: Quantity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Objective {
    pub direction: Direction,
    pub name: String,
    pub terms: Vec<Term>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ConstraintBody {
    LinearConstraint {
        limit: Quantity,
        terms: Vec<Term>,
    },
    SumConstraint {
        limit: Quantity,
    },
    UpperBound {
        variable: String,
        limit: Quantity,
    },
    LowerBound {
        variable: String,
        limit: Quantity,
    },
    RatioConstraint {
        variable: String,
        limit: Quantity,
    },
    /// `compared OP multiplier * base`.
    XbyConstraint {
        base: String,
        compared: String,
        multiplier: Option<Quantity>,
        /// Written with the `XY_CONSTRAINT` tag.
        #[serde(default)]
        xy_alias: bool,
    },
}

impl ConstraintBody {
    pub fn kind(&self) -> ConstraintKind {
        match self {
            ConstraintBody::LinearConstraint { .. } => ConstraintKind::LinearConstraint,
            ConstraintBody::SumConstraint { .. } => ConstraintKind::SumConstraint,
            ConstraintBody::UpperBound { .. } => ConstraintKind::UpperBound,
            ConstraintBody::LowerBound { .. } => ConstraintKind::LowerBound,
            ConstraintBody::RatioConstraint { .. } => ConstraintKind::RatioConstraint,
            ConstraintBody::XbyConstraint { .. } => ConstraintKind::XbyConstraint,
        }
    }

    pub fn limit(&self) -> Option<&Quantity> {
        match self {
            ConstraintBody::LinearConstraint { limit, .. }
            | ConstraintBody::SumConstraint { limit }
            | ConstraintBody::UpperBound { limit, .. }
            | ConstraintBody::LowerBound { limit, .. }
            | ConstraintBody::RatioConstraint { limit, .. } => Some(limit),
            ConstraintBody::XbyConstraint { .. } => None,
        }
    }

    /// Every variable surface mentioned by the body, in written order.
    pub fn variables(&self) -> Vec<&str> {
        match self {
            ConstraintBody::LinearConstraint { terms, .. } => terms.iter().map(|t| t.variable.as_str()).collect(),
            ConstraintBody::SumConstraint { .. } => Vec::new(),
            ConstraintBody::UpperBound { variable, .. }
            | ConstraintBody::LowerBound { variable, .. }
            | ConstraintBody::RatioConstraint { variable, .. } => vec![variable.as_str()],
            ConstraintBody::XbyConstraint { base, compared, .. } => {
                vec![base.as_str(), compared.as_str()]
            }
        }
    }

    /// Effective XBY multiplier (1 for the XY alias or a missing PARAM).
    pub fn multiplier_value(&self) -> Option<Rational> {
        match self {
            ConstraintBody::XbyConstraint { multiplier, .. } => Some(
                multiplier
                    .as_ref()
                    .map(|q| q.value.clone())
                    .unwrap_or_else(|| crate::number::int(1)),
            ),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraint {
    pub const_dir: String,
    pub operator: Operator,
    pub body: ConstraintBody,
}

impl Constraint {
    pub fn kind(&self) -> ConstraintKind {
        self.body.kind()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "declaration", rename_all = "lowercase")]
pub enum Declaration {
    Objective(Objective),
    Constraint(Constraint),
}

impl Declaration {
    pub fn is_objective(&self) -> bool {
        matches!(self, Declaration::Objective(_))
    }

    pub fn as_constraint(&self) -> Option<&Constraint> {
        match self {
            Declaration::Constraint(c) => Some(c),
            Declaration::Objective(_) => None,
        }
    }

    pub fn as_objective(&self) -> Option<&Objective> {
        match self {
            Declaration::Objective(o) => Some(o),
            Declaration::Constraint(_) => None,
        }
    }

    /// Variable surfaces in written order (objective terms or constraint operands).
    pub fn variables(&self) -> Vec<&str> {
        match self {
            Declaration::Objective(o) => o.terms.iter().map(|t| t.variable.as_str()).collect(),
            Declaration::Constraint(c) => c.body.variables(),
        }
    }
}

/// A parsed problem. Equality is structural: `source_text` is ignored.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IrDocument {
    pub declarations: Vec<Declaration>,
    #[serde(default)]
    pub source_text: String,
}

impl PartialEq for IrDocument {
    fn eq(&self, other: &Self) -> bool {
        self.declarations == other.declarations
    }
}

impl IrDocument {
    pub fn new(declarations: Vec<Declaration>) -> Self {
        IrDocument {
            declarations,
            source_text: String::new(),
        }
    }

    pub fn objective(&self) -> Option<&Objective> {
        self.declarations.iter().find_map(Declaration::as_objective)
    }

    pub fn constraints(&self) -> impl Iterator<Item = &Constraint> {
        self.declarations.iter().filter_map(Declaration::as_constraint)
    }
}

pub(crate) fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
