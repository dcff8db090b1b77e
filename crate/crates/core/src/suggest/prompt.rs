//! Declaration prompts: the entity tokens that open each declaration.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::{EntityLabel, EntitySpan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptKind {
    Objective,
    Constraint,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeclarationPrompt {
    pub kind: PromptKind,
    pub tokens: Vec<String>,
    /// Character span of the OBJ_DIR or CONST_DIR the prompt starts from.
    pub anchor: (usize, usize),
}

/// Which declaration to prompt for. Constraint occurrences count from 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptTarget {
    Objective,
    Constraint(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("missing entity {}", .label.tag())]
pub struct MissingEntityError {
    pub label: EntityLabel,
}

fn sorted(entities: &[EntitySpan], label: EntityLabel) -> Vec<&EntitySpan> {
    let mut v: Vec<&EntitySpan> = entities.iter().filter(|e| e.label == label).collect();
    v.sort_by_key(|e| (e.start, e.end));
    v
}

fn surface(s: &str) -> String {
    crate::ir::collapse_ws(s)
}

pub fn build_prompt(entities: &[EntitySpan], target: PromptTarget) -> Result<DeclarationPrompt, MissingEntityError> {
    let missing = |label| MissingEntityError { label };
    match target {
        PromptTarget::Objective => {
            let dir = *sorted(entities, EntityLabel::ObjDir)
                .first()
                .ok_or(missing(EntityLabel::ObjDir))?;
            let names = sorted(entities, EntityLabel::ObjName);
            let name = names
                .iter()
                .find(|n| n.start >= dir.end)
                .or(names.first())
                .ok_or(missing(EntityLabel::ObjName))?;
            Ok(DeclarationPrompt {
                kind: PromptKind::Objective,
                tokens: vec![surface(&dir.text), surface(&name.text)],
                anchor: (dir.start, dir.end),
            })
        }
        PromptTarget::Constraint(k) => {
            let c = k
                .checked_sub(1)
                .and_then(|i| sorted(entities, EntityLabel::ConstDir).get(i).copied())
                .ok_or(missing(EntityLabel::ConstDir))?;
            Ok(DeclarationPrompt {
                kind: PromptKind::Constraint,
                tokens: vec![surface(&c.text)],
                anchor: (c.start, c.end),
            })
        }
    }
}

/// Every prompt target the entities support: the objective (when an OBJ_DIR
/// is tagged) followed by one target per CONST_DIR in document order.
pub fn prompt_targets(entities: &[EntitySpan]) -> Vec<PromptTarget> {
    let mut out = Vec::new();
    if entities.iter().any(|e| e.label == EntityLabel::ObjDir) {
        out.push(PromptTarget::Objective);
    }
    let n = entities.iter().filter(|e| e.label == EntityLabel::ConstDir).count();
    out.extend((1..=n).map(PromptTarget::Constraint));
    out
}
