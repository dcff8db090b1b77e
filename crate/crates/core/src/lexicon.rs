//! Word lists driving the rule-based tagger.
//!
//! The on-disk format is line oriented: `[section]` headers, `#` comments,
//! and entries whose shape depends on the section (see `lexicon/default.lex`).

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::ir::{Direction, Operator};

const DEFAULT_TEXT: &str = include_str!("../lexicon/default.lex");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("lexicon line {line}: {message}")]
pub struct LexiconError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstDirEntry {
    /// Lowercase tokens.
    pub phrase: Vec<String>,
    pub operator: Operator,
    /// Needs an adjacent number to count as a constraint cue.
    pub weak: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    pub obj_dir: BTreeMap<String, Direction>,
    /// Sorted longest phrase first so greedy matching prefers long cues.
    pub const_dir: Vec<ConstDirEntry>,
    pub number_words: BTreeSet<String>,
    pub fractions: BTreeSet<String>,
    pub stopwords: BTreeSet<String>,
    pub possessives: BTreeSet<String>,
    pub verbs: BTreeSet<String>,
    pub split: BTreeSet<String>,
    pub currency: BTreeSet<String>,
}

impl Default for Lexicon {
    fn default() -> Self {
        Lexicon::parse(DEFAULT_TEXT).expect("bundled lexicon parses")
    }
}

impl Lexicon {
    /// The bundled lexicon, parsed once.
    pub fn shared() -> &'static Lexicon {
        static SHARED: std::sync::OnceLock<Lexicon> = std::sync::OnceLock::new();
        SHARED.get_or_init(Lexicon::default)
    }

    pub fn default_text() -> &'static str {
        DEFAULT_TEXT
    }

    pub fn parse(text: &str) -> Result<Lexicon, LexiconError> {
        let mut lex = Lexicon {
            obj_dir: BTreeMap::new(),
            const_dir: Vec::new(),
            number_words: BTreeSet::new(),
            fractions: BTreeSet::new(),
            stopwords: BTreeSet::new(),
            possessives: BTreeSet::new(),
            verbs: BTreeSet::new(),
            split: BTreeSet::new(),
            currency: BTreeSet::new(),
        };
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |message: String| LexiconError { line: line_no, message };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = Some(name.trim().to_string());
                continue;
            }
            let Some(sec) = section.as_deref() else {
                return Err(err("entry before any [section]".into()));
            };
            let lower = line.to_lowercase();
            match sec {
                "obj_dir" => {
                    let parts: Vec<&str> = lower.split_whitespace().collect();
                    let [word, dir] = parts[..] else {
                        return Err(err(format!("expected `word max|min`, got `{line}`")));
                    };
                    let dir = match dir {
                        "max" => Direction::Maximize,
                        "min" => Direction::Minimize,
                        other => return Err(err(format!("unknown direction `{other}`"))),
                    };
                    lex.obj_dir.insert(word.to_string(), dir);
                }
                "const_dir" => {
                    let Some((phrase, rest)) = lower.split_once('=') else {
                        return Err(err(format!("expected `phrase = ge|le [weak]`, got `{line}`")));
                    };
                    let phrase: Vec<String> = phrase.split_whitespace().map(str::to_string).collect();
                    if phrase.is_empty() {
                        return Err(err("empty phrase".into()));
                    }
                    let mut flags = rest.split_whitespace();
                    let operator = match flags.next() {
                        Some("ge") => Operator::GreaterOrEqual,
                        Some("le") => Operator::LessOrEqual,
                        other => return Err(err(format!("unknown polarity {other:?}"))),
                    };
                    let weak = match flags.next() {
                        None => false,
                        Some("weak") => true,
                        Some(other) => return Err(err(format!("unknown flag `{other}`"))),
                    };
                    lex.const_dir.push(ConstDirEntry { phrase, operator, weak });
                }
                "number_words" | "fractions" | "stopwords" | "possessives" | "verbs" | "split" | "currency" => {
                    let set = match sec {
                        "number_words" => &mut lex.number_words,
                        "fractions" => &mut lex.fractions,
                        "stopwords" => &mut lex.stopwords,
                        "possessives" => &mut lex.possessives,
                        "verbs" => &mut lex.verbs,
                        "split" => &mut lex.split,
                        _ => &mut lex.currency,
                    };
                    set.extend(lower.split_whitespace().map(str::to_string));
                }
                other => return Err(err(format!("unknown section [{other}]"))),
            }
        }
        lex.const_dir.sort_by_key(|e| std::cmp::Reverse(e.phrase.len()));
        Ok(lex)
    }

    pub fn load(path: &std::path::Path) -> Result<Lexicon, LexiconError> {
        let text = std::fs::read_to_string(path).map_err(|e| LexiconError {
            line: 0,
            message: format!("{}: {e}", path.display()),
        })?;
        Lexicon::parse(&text)
    }

    /// Polarity of a CONST_DIR surface. Unlisted phrases fall back to a
    /// keyword guess so user-drawn spans still get an operator.
    pub fn polarity(&self, const_dir: &str) -> Operator {
        let words: Vec<String> = const_dir.split_whitespace().map(str::to_lowercase).collect();
        if let Some(e) = self.const_dir.iter().find(|e| e.phrase == words) {
            return e.operator;
        }
        const GE: [&str; 8] = [
            "least", "minimum", "more", "above", "larger", "greater", "exceed", "over",
        ];
        if words.iter().any(|w| GE.contains(&w.as_str())) && !words.iter().any(|w| w == "not" || w == "no") {
            Operator::GreaterOrEqual
        } else {
            Operator::LessOrEqual
        }
    }

    pub fn is_stop(&self, w: &str) -> bool {
        self.stopwords.contains(w)
    }
}
