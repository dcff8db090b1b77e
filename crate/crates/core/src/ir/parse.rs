use serde::Serialize;
use thiserror::Error;

use super::{
    collapse_ws, Constraint, ConstraintBody, ConstraintKind, Declaration, Direction, IrDocument, Objective, Operator,
    Quantity, Term,
};
use crate::number::NumberContext;

/// The document as a whole is not parseable (unbalanced DECLARATION tags,
/// no blocks, no or duplicate objective).
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[error("problem syntax error at byte {offset}: {reason}")]
pub struct ProblemSyntaxError {
    pub reason: String,
    pub offset: usize,
}

/// One `<DECLARATION>` block failed to parse; the rest of the document is
/// unaffected.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[error("declaration {index}: {reason}")]
pub struct DeclarationSyntaxError {
    /// Position of the block among all blocks of the document.
    pub index: usize,
    pub reason: String,
    /// The tag the error points at, when there is one.
    pub tag: Option<String>,
    pub offset: usize,
}

/// Result of parsing a document that is at least structurally sound.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedIr {
    pub document: IrDocument,
    pub errors: Vec<DeclarationSyntaxError>,
    /// Number of `<DECLARATION>` blocks found, well-formed or not.
    pub block_count: usize,
}

impl ParsedIr {
    /// Requires every block to parse and exactly one objective.
    pub fn into_complete(self) -> Result<IrDocument, DeclarationSyntaxError> {
        if let Some(e) = self.errors.into_iter().next() {
            return Err(e);
        }
        if self.document.objective().is_none() {
            return Err(DeclarationSyntaxError {
                index: 0,
                reason: "document has no objective".into(),
                tag: Some("OBJ_DIR".into()),
                offset: 0,
            });
        }
        Ok(self.document)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Open(String),
    Close(String),
    Bracket(String),
    Text(String),
    Malformed(String),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    offset: usize,
}

fn lex(text: &str) -> Vec<Token> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let mut text_start = 0;
    let flush = |out: &mut Vec<Token>, from: usize, to: usize| {
        if to > from {
            out.push(Token {
                tok: Tok::Text(text[from..to].to_string()),
                offset: from,
            });
        }
    };
    while i < bytes.len() {
        match bytes[i] {
            b'<' => {
                flush(&mut out, text_start, i);
                let start = i;
                let mut j = i + 1;
                let closing = j < bytes.len() && bytes[j] == b'/';
                if closing {
                    j += 1;
                }
                let name_start = j;
                while j < bytes.len() && (bytes[j].is_ascii_alphabetic() || bytes[j] == b'_') {
                    j += 1;
                }
                let name = &text[name_start..j];
                let mut k = j;
                while k < bytes.len() && (bytes[k] == b' ' || bytes[k] == b'\t') {
                    k += 1;
                }
                if !name.is_empty() && k < bytes.len() && bytes[k] == b'>' {
                    let name = name.to_ascii_uppercase();
                    out.push(Token {
                        tok: if closing { Tok::Close(name) } else { Tok::Open(name) },
                        offset: start,
                    });
                    i = k + 1;
                } else {
                    out.push(Token {
                        tok: Tok::Malformed(text[start..j.max(start + 1)].to_string()),
                        offset: start,
                    });
                    i = j.max(start + 1);
                }
                text_start = i;
            }
            b'[' => {
                let close = text[i..].find([']', '<', '\n']).map(|p| i + p);
                match close {
                    Some(end) if bytes[end] == b']' => {
                        flush(&mut out, text_start, i);
                        out.push(Token {
                            tok: Tok::Bracket(text[i + 1..end].trim().to_string()),
                            offset: i,
                        });
                        i = end + 1;
                        text_start = i;
                    }
                    _ => i += 1,
                }
            }
            _ => i += 1,
        }
    }
    flush(&mut out, text_start, bytes.len());
    out
}

struct Block {
    offset: usize,
    tokens: Vec<Token>,
}

fn problem_error(reason: impl Into<String>, offset: usize) -> ProblemSyntaxError {
    ProblemSyntaxError {
        reason: reason.into(),
        offset,
    }
}

fn split_blocks(text: &str) -> Result<Vec<Block>, ProblemSyntaxError> {
    let mut blocks = Vec::new();
    let mut current: Option<Block> = None;
    for token in lex(text) {
        match (&token.tok, current.as_mut()) {
            (Tok::Open(name), None) if name == "DECLARATION" => {
                current = Some(Block {
                    offset: token.offset,
                    tokens: Vec::new(),
                });
            }
            (Tok::Open(name), Some(_)) if name == "DECLARATION" => {
                return Err(problem_error("nested <DECLARATION>", token.offset));
            }
            (Tok::Close(name), Some(_)) if name == "DECLARATION" => {
                blocks.extend(current.take());
            }
            (Tok::Close(name), None) if name == "DECLARATION" => {
                return Err(problem_error("</DECLARATION> without opening tag", token.offset));
            }
            (_, Some(block)) => block.tokens.push(token),
            (Tok::Text(_) | Tok::Bracket(_), None) => {}
            (Tok::Open(name) | Tok::Close(name), None) => {
                return Err(problem_error(
                    format!("tag <{name}> outside of a DECLARATION block"),
                    token.offset,
                ));
            }
            (Tok::Malformed(raw), None) => {
                return Err(problem_error(
                    format!("malformed tag {raw:?} outside of a DECLARATION block"),
                    token.offset,
                ));
            }
        }
    }
    if let Some(block) = current {
        return Err(problem_error("unclosed <DECLARATION>", block.offset));
    }
    Ok(blocks)
}

/// Parses an IR document.
///
/// Problem-level structure errors abort; errors inside individual blocks are
/// collected in [`ParsedIr::errors`] and the remaining blocks are returned.
pub fn parse_ir(text: &str) -> Result<ParsedIr, ProblemSyntaxError> {
    if text.trim().is_empty() {
        return Err(problem_error("empty input", 0));
    }
    let blocks = split_blocks(text)?;
    if blocks.is_empty() {
        return Err(problem_error("no DECLARATION blocks", 0));
    }
    let mut declarations = Vec::new();
    let mut errors = Vec::new();
    let mut objective_offsets = Vec::new();
    let mut attempted_objective = false;
    for (index, block) in blocks.iter().enumerate() {
        attempted_objective |= block
            .tokens
            .iter()
            .any(|t| matches!(&t.tok, Tok::Open(n) if n == "OBJ_DIR"));
        match parse_block(index, block) {
            Ok(decl) => {
                if decl.is_objective() {
                    objective_offsets.push(block.offset);
                }
                declarations.push(decl);
            }
            Err(e) => errors.push(e),
        }
    }
    if objective_offsets.len() > 1 {
        return Err(problem_error("duplicate objective", objective_offsets[1]));
    }
    if !attempted_objective {
        return Err(problem_error("no objective", 0));
    }
    Ok(ParsedIr {
        document: IrDocument {
            declarations,
            source_text: text.to_string(),
        },
        errors,
        block_count: blocks.len(),
    })
}

/// Parses exactly one `<DECLARATION>` block (objective or constraint).
pub fn parse_fragment(text: &str) -> Result<Declaration, DeclarationSyntaxError> {
    let to_decl_err = |e: ProblemSyntaxError| DeclarationSyntaxError {
        index: 0,
        reason: e.reason,
        tag: Some("DECLARATION".into()),
        offset: e.offset,
    };
    if text.trim().is_empty() {
        return Err(to_decl_err(problem_error("empty input", 0)));
    }
    let blocks = split_blocks(text).map_err(to_decl_err)?;
    match blocks.as_slice() {
        [block] => parse_block(0, block),
        [] => Err(to_decl_err(problem_error("no DECLARATION blocks", 0))),
        _ => Err(to_decl_err(problem_error(
            "expected a single DECLARATION block",
            blocks[1].offset,
        ))),
    }
}

#[derive(Debug)]
struct Element {
    tag: String,
    content: String,
    offset: usize,
}

const KNOWN_TAGS: &[&str] = &[
    "OBJ_DIR",
    "OBJ_NAME",
    "VAR",
    "PARAM",
    "LIMIT",
    "CONST_DIR",
    "OPERATOR",
    "CONST_TYPE",
];

const CONNECTIVES: &[&str] = &["is", "times", "for"];

fn parse_block(index: usize, block: &Block) -> Result<Declaration, DeclarationSyntaxError> {
    let err = |reason: String, tag: Option<&str>, offset: usize| DeclarationSyntaxError {
        index,
        reason,
        tag: tag.map(str::to_string),
        offset,
    };

    let mut elements: Vec<Element> = Vec::new();
    let mut open: Option<Element> = None;
    for token in &block.tokens {
        match (&token.tok, open.as_mut()) {
            (Tok::Open(name), None) => {
                if !KNOWN_TAGS.contains(&name.as_str()) {
                    return Err(err(format!("unknown tag <{name}>"), Some(name), token.offset));
                }
                open = Some(Element {
                    tag: name.clone(),
                    content: String::new(),
                    offset: token.offset,
                });
            }
            (Tok::Open(name), Some(el)) => {
                return Err(err(
                    format!("<{}> is not closed before <{name}>", el.tag),
                    Some(&el.tag),
                    el.offset,
                ));
            }
            (Tok::Close(name), Some(el)) => {
                if *name != el.tag {
                    return Err(err(
                        format!("<{}> closed by </{name}>", el.tag),
                        Some(&el.tag),
                        el.offset,
                    ));
                }
                elements.extend(open.take());
            }
            (Tok::Close(name), None) => {
                return Err(err(format!("</{name}> without opening tag"), Some(name), token.offset));
            }
            (Tok::Text(t), Some(el)) => el.content.push_str(t),
            (Tok::Bracket(b), Some(el)) if el.tag == "CONST_TYPE" => {
                el.content.push('[');
                el.content.push_str(b);
                el.content.push(']');
            }
            (Tok::Bracket(b), Some(el)) => {
                return Err(err(
                    format!("unexpected [{b}] inside <{}>", el.tag),
                    Some(&el.tag),
                    token.offset,
                ));
            }
            (Tok::Bracket(b), None) => {
                if !CONNECTIVES.contains(&b.to_ascii_lowercase().as_str()) {
                    return Err(err(format!("unknown connective [{b}]"), None, token.offset));
                }
            }
            (Tok::Text(t), None) => {
                if !t.trim().is_empty() {
                    return Err(err(
                        format!("stray text {:?} outside of a tag", t.trim()),
                        None,
                        token.offset,
                    ));
                }
            }
            (Tok::Malformed(raw), _) => {
                let tag = raw.trim_start_matches(['<', '/']).to_ascii_uppercase();
                return Err(err(
                    format!("malformed tag {raw:?}"),
                    Some(if tag.is_empty() { "?" } else { &tag }),
                    token.offset,
                ));
            }
        }
    }
    if let Some(el) = open {
        return Err(err(format!("<{}> is not closed", el.tag), Some(&el.tag), el.offset));
    }

    let single = |tag: &str| -> Result<Option<&Element>, DeclarationSyntaxError> {
        let mut found = elements.iter().filter(|e| e.tag == tag);
        let first = found.next();
        if let Some(dup) = found.next() {
            return Err(err(format!("duplicate <{tag}>"), Some(tag), dup.offset));
        }
        Ok(first)
    };
    let operands: Vec<&Element> = elements.iter().filter(|e| e.tag == "VAR" || e.tag == "PARAM").collect();
    for e in &operands {
        if collapse_ws(&e.content).is_empty() {
            return Err(err(format!("empty <{}>", e.tag), Some(&e.tag), e.offset));
        }
    }
    let quantity = |el: &Element, context: NumberContext| {
        Quantity::parse(&el.content, context).map_err(|e| err(format!("<{}>: {e}", el.tag), Some(&el.tag), el.offset))
    };
    let terms = |context: NumberContext| -> Result<Vec<Term>, DeclarationSyntaxError> {
        let mut out = Vec::new();
        let mut it = operands.iter().peekable();
        while let Some(el) = it.next() {
            if el.tag != "VAR" {
                return Err(err("PARAM without a preceding VAR".into(), Some("PARAM"), el.offset));
            }
            match it.next() {
                Some(p) if p.tag == "PARAM" => out.push(Term {
                    variable: collapse_ws(&el.content),
                    coefficient: quantity(p, context)?,
                }),
                _ => {
                    return Err(err(
                        format!("VAR {:?} has no PARAM", collapse_ws(&el.content)),
                        Some("VAR"),
                        el.offset,
                    ))
                }
            }
        }
        Ok(out)
    };

    if let Some(dir) = single("OBJ_DIR")? {
        for tag in ["LIMIT", "OPERATOR", "CONST_TYPE", "CONST_DIR"] {
            if let Some(el) = single(tag)? {
                return Err(err(format!("<{tag}> in an objective"), Some(tag), el.offset));
            }
        }
        let direction = Direction::from_word(&dir.content).ok_or_else(|| {
            err(
                format!("unknown objective direction {:?}", dir.content.trim()),
                Some("OBJ_DIR"),
                dir.offset,
            )
        })?;
        let name = single("OBJ_NAME")?
            .map(|e| collapse_ws(&e.content))
            .ok_or_else(|| err("objective has no <OBJ_NAME>".into(), Some("OBJ_NAME"), block.offset))?;
        let terms = terms(NumberContext::Param)?;
        if terms.is_empty() {
            return Err(err("objective has no terms".into(), Some("VAR"), block.offset));
        }
        return Ok(Declaration::Objective(Objective { direction, name, terms }));
    }
    if let Some(el) = single("OBJ_NAME")? {
        return Err(err("<OBJ_NAME> without <OBJ_DIR>".into(), Some("OBJ_NAME"), el.offset));
    }

    let type_el = single("CONST_TYPE")?.ok_or_else(|| {
        err(
            "constraint has no <CONST_TYPE>".into(),
            Some("CONST_TYPE"),
            block.offset,
        )
    })?;
    let kind: ConstraintKind = type_el
        .content
        .parse()
        .map_err(|e: super::UnknownKind| err(e.to_string(), Some("CONST_TYPE"), type_el.offset))?;
    let xy_alias = type_el.content.to_ascii_uppercase().contains("XY_CONSTRAINT");
    let op_el = single("OPERATOR")?
        .ok_or_else(|| err("constraint has no <OPERATOR>".into(), Some("OPERATOR"), block.offset))?;
    let operator = Operator::from_tag(&op_el.content).ok_or_else(|| {
        err(
            format!("unknown operator {:?}", op_el.content.trim()),
            Some("OPERATOR"),
            op_el.offset,
        )
    })?;
    let const_dir = single("CONST_DIR")?
        .map(|e| collapse_ws(&e.content))
        .unwrap_or_default();
    let limit_el = single("LIMIT")?;
    let need_limit = || limit_el.ok_or_else(|| err(format!("{kind} requires a <LIMIT>"), Some("LIMIT"), block.offset));
    let single_var = || -> Result<String, DeclarationSyntaxError> {
        match operands.as_slice() {
            [v] if v.tag == "VAR" => Ok(collapse_ws(&v.content)),
            _ => Err(err(
                format!("{kind} takes exactly one <VAR> and no <PARAM>"),
                Some("VAR"),
                block.offset,
            )),
        }
    };

    let body = match kind {
        ConstraintKind::LinearConstraint => {
            let limit = quantity(need_limit()?, NumberContext::Limit)?;
            let terms = terms(NumberContext::Param)?;
            if terms.is_empty() {
                return Err(err("LINEAR_CONSTRAINT has no terms".into(), Some("VAR"), block.offset));
            }
            ConstraintBody::LinearConstraint { limit, terms }
        }
        ConstraintKind::SumConstraint => {
            if let Some(el) = operands.first() {
                return Err(err("SUM_CONSTRAINT takes no operands".into(), Some(&el.tag), el.offset));
            }
            ConstraintBody::SumConstraint {
                limit: quantity(need_limit()?, NumberContext::Limit)?,
            }
        }
        ConstraintKind::UpperBound => ConstraintBody::UpperBound {
            variable: single_var()?,
            limit: quantity(need_limit()?, NumberContext::Limit)?,
        },
        ConstraintKind::LowerBound => ConstraintBody::LowerBound {
            variable: single_var()?,
            limit: quantity(need_limit()?, NumberContext::Limit)?,
        },
        ConstraintKind::RatioConstraint => ConstraintBody::RatioConstraint {
            variable: single_var()?,
            limit: quantity(need_limit()?, NumberContext::Ratio)?,
        },
        ConstraintKind::XbyConstraint => {
            if let Some(el) = limit_el {
                return Err(err("XBY_CONSTRAINT takes no <LIMIT>".into(), Some("LIMIT"), el.offset));
            }
            let shape: Vec<&str> = operands.iter().map(|e| e.tag.as_str()).collect();
            let (base, multiplier, compared) = match shape.as_slice() {
                ["VAR", "PARAM", "VAR"] if !xy_alias => (
                    operands[0],
                    Some(quantity(operands[1], NumberContext::Param)?),
                    operands[2],
                ),
                ["VAR", "VAR"] => (operands[0], None, operands[1]),
                _ => {
                    return Err(err(
                        format!(
                            "{} expects VAR {}VAR",
                            if xy_alias { "XY_CONSTRAINT" } else { "XBY_CONSTRAINT" },
                            if xy_alias { "" } else { "PARAM " }
                        ),
                        Some("VAR"),
                        block.offset,
                    ))
                }
            };
            ConstraintBody::XbyConstraint {
                base: collapse_ws(&base.content),
                compared: collapse_ws(&compared.content),
                multiplier,
                xy_alias,
            }
        }
    };
    Ok(Declaration::Constraint(Constraint {
        const_dir,
        operator,
        body,
    }))
}
