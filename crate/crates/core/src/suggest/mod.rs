//! Entity tagging, declaration prompts and declaration suggestions.
//!
//! [`GeneratorContract`] is the seam between prompts and whatever produces
//! IR text for them; [`RuleGenerator`] is the bundled implementation.

pub mod generator;
pub mod prompt;
pub mod tagger;
pub mod text;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::{parse_fragment, Declaration, EntityLabel, EntitySpan, IrDocument};

pub use generator::RuleGenerator;
pub use prompt::{build_prompt, prompt_targets, DeclarationPrompt, MissingEntityError, PromptKind, PromptTarget};
pub use tagger::{tag_entities, tag_with};
pub use text::tokenize;

/// Produces one IR declaration for a prompt. Implementations must be pure:
/// the same inputs give the same text.
pub trait GeneratorContract: Send + Sync {
    fn generate(
        &self,
        description: &str,
        prompt: &DeclarationPrompt,
        entities: &[EntitySpan],
    ) -> Result<String, String>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Error)]
#[error("suggestion {index} failed: {reason}")]
pub struct SuggestionFailure {
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SuggestError {
    #[error("no OBJ_DIR or CONST_DIR entity to prompt from")]
    NoPrompts,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suggestion {
    pub index: usize,
    pub prompt: Option<DeclarationPrompt>,
    /// The sentence the prompt's anchor sits in.
    pub source: String,
    pub outcome: Result<Generated, SuggestionFailure>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generated {
    pub declaration: Declaration,
    pub ir: String,
}

/// Suggestions for every prompt the entities support, using the bundled rules.
pub fn suggest_declarations(description: &str, entities: &[EntitySpan]) -> Result<Vec<Suggestion>, SuggestError> {
    suggest_with(&RuleGenerator::default(), description, entities)
}

pub fn suggest_with(
    generator: &dyn GeneratorContract,
    description: &str,
    entities: &[EntitySpan],
) -> Result<Vec<Suggestion>, SuggestError> {
    let targets = prompt_targets(entities);
    if targets.is_empty() {
        return Err(SuggestError::NoPrompts);
    }
    Ok(targets
        .into_iter()
        .enumerate()
        .map(|(index, target)| suggest_one(generator, description, entities, target, index))
        .collect())
}

pub fn suggest_one(
    generator: &dyn GeneratorContract,
    description: &str,
    entities: &[EntitySpan],
    target: PromptTarget,
    index: usize,
) -> Suggestion {
    let fail = |reason: String| SuggestionFailure { index, reason };
    let prompt = match build_prompt(entities, target) {
        Ok(p) => p,
        Err(e) => {
            let anchor = entities
                .iter()
                .find(|s| s.label == EntityLabel::ObjDir)
                .map(|s| (s.start, s.end))
                .unwrap_or((0, 0));
            return Suggestion {
                index,
                prompt: None,
                source: source_sentence(description, anchor),
                outcome: Err(fail(e.to_string())),
            };
        }
    };
    let outcome = generator
        .generate(description, &prompt, entities)
        .map_err(&fail)
        .and_then(|ir| match parse_fragment(&ir) {
            Ok(declaration) => Ok(Generated { declaration, ir }),
            Err(e) => Err(fail(format!("generated text does not parse: {e}"))),
        })
        .and_then(|g| {
            let expected = matches!(prompt.kind, PromptKind::Objective);
            if g.declaration.is_objective() == expected {
                Ok(g)
            } else {
                Err(fail("generated declaration has the wrong kind for its prompt".into()))
            }
        });
    Suggestion {
        index,
        source: source_sentence(description, prompt.anchor),
        prompt: Some(prompt),
        outcome,
    }
}

/// The sentence containing character offset `anchor.0`, whitespace collapsed.
pub fn source_sentence(description: &str, anchor: (usize, usize)) -> String {
    let (a, b) = source_span(description, anchor);
    let s: String = description.chars().skip(a).take(b - a).collect();
    crate::ir::collapse_ws(&s)
}

/// Character range of the sentence containing `anchor.0`; empty when the
/// anchor lies past the last token.
pub fn source_span(description: &str, anchor: (usize, usize)) -> (usize, usize) {
    let toks = text::tokenize(description);
    let sents = text::sentences(description, &toks);
    sents
        .iter()
        .find(|r| toks[r.start..r.end].iter().any(|t| t.end > anchor.0))
        .filter(|r| !r.is_empty())
        .map(|r| (toks[r.start].start, toks[r.end - 1].end))
        .unwrap_or((0, 0))
}

/// The successful suggestions as one document, in prompt order.
pub fn suggested_document(suggestions: &[Suggestion]) -> IrDocument {
    IrDocument::new(
        suggestions
            .iter()
            .filter_map(|s| s.outcome.as_ref().ok().map(|g| g.declaration.clone()))
            .collect(),
    )
}
