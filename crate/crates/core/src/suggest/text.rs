//! Tokens, sentences and clause segments, all indexed by character offset.

use std::collections::BTreeSet;
use std::ops::Range;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokKind {
    Word,
    Number,
    Symbol,
    Punct,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub start: usize,
    pub end: usize,
    pub text: String,
    pub lower: String,
    pub kind: TokKind,
}

impl Token {
    pub fn is_word(&self) -> bool {
        self.kind == TokKind::Word
    }
}

const CURRENCY: [char; 4] = ['$', '€', '£', '¥'];

pub fn tokenize(description: &str) -> Vec<Token> {
    let chars: Vec<char> = description.chars().collect();
    let n = chars.len();
    let mut out = Vec::new();
    let mut i = 0;
    let push = |out: &mut Vec<Token>, start: usize, end: usize, kind: TokKind| {
        let text: String = chars[start..end].iter().collect();
        let lower = text.to_lowercase();
        out.push(Token {
            start,
            end,
            text,
            lower,
            kind,
        });
    };
    while i < n {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || (c == '.' && i + 1 < n && chars[i + 1].is_ascii_digit()) {
            i += 1;
            while i < n {
                let d = chars[i];
                let next_digit = i + 1 < n && chars[i + 1].is_ascii_digit();
                let continues = d.is_ascii_digit()
                    || (d == ',' && thousands_group(&chars, i + 1))
                    || ((d == '.' || d == '/') && next_digit);
                if !continues {
                    break;
                }
                i += 1;
            }
            if i < n && chars[i] == '%' {
                i += 1;
            }
            push(&mut out, start, i, TokKind::Number);
        } else if c.is_alphabetic() {
            i += 1;
            while i < n {
                let d = chars[i];
                if d.is_alphanumeric() {
                    i += 1;
                } else if (d == '\'' || d == '’' || d == '-') && i + 1 < n && chars[i + 1].is_alphabetic() {
                    i += 2;
                } else {
                    break;
                }
            }
            push(&mut out, start, i, TokKind::Word);
        } else {
            i += 1;
            let kind = if CURRENCY.contains(&c) {
                TokKind::Symbol
            } else {
                TokKind::Punct
            };
            push(&mut out, start, i, kind);
        }
    }
    out
}

/// Exactly three digits starting at `at`, not followed by another digit.
fn thousands_group(chars: &[char], at: usize) -> bool {
    at + 3 <= chars.len()
        && chars[at..at + 3].iter().all(|c| c.is_ascii_digit())
        && chars.get(at + 3).is_none_or(|c| !c.is_ascii_digit())
}

/// Token ranges of sentences: a break follows `.`, `?` or `!` when the next
/// character is whitespace and the next token starts with an uppercase letter.
pub fn sentences(description: &str, toks: &[Token]) -> Vec<Range<usize>> {
    let chars: Vec<char> = description.chars().collect();
    let mut out = Vec::new();
    let mut start = 0;
    for (i, t) in toks.iter().enumerate() {
        let terminal = t.kind == TokKind::Punct && matches!(t.text.as_str(), "." | "?" | "!");
        if !terminal {
            continue;
        }
        let breaks = match toks.get(i + 1) {
            None => true,
            Some(next) => {
                chars.get(t.end).is_some_and(|c| c.is_whitespace())
                    && next.text.chars().next().is_some_and(char::is_uppercase)
            }
        };
        if breaks {
            out.push(start..i + 1);
            start = i + 1;
        }
    }
    if start < toks.len() {
        out.push(start..toks.len());
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub sentence: usize,
    pub tokens: Range<usize>,
}

/// Clause segments. Sentences split at `,`, `;`, `:`; a conjunction from
/// `split_words` also splits when the clause after it (up to the next
/// conjunction) holds a cue token. Separators belong to no segment.
pub fn segments(
    toks: &[Token],
    sentences: &[Range<usize>],
    split_words: &BTreeSet<String>,
    is_cue: impl Fn(usize) -> bool,
) -> Vec<Segment> {
    let mut out = Vec::new();
    for (s, range) in sentences.iter().enumerate() {
        let mut pieces = Vec::new();
        let mut a = range.start;
        for i in range.clone() {
            let t = &toks[i];
            if t.kind == TokKind::Punct && matches!(t.text.as_str(), "," | ";" | ":" | "." | "?" | "!") {
                pieces.push(a..i);
                a = i + 1;
            }
        }
        pieces.push(a..range.end);
        for piece in pieces {
            let is_split = |i: usize| toks[i].is_word() && split_words.contains(&toks[i].lower);
            let mut cur = piece.start;
            for i in piece.clone() {
                if i == cur || !is_split(i) {
                    continue;
                }
                let stop = (i + 1..piece.end).find(|&j| is_split(j)).unwrap_or(piece.end);
                if (i + 1..stop).any(&is_cue) {
                    out.push(Segment {
                        sentence: s,
                        tokens: cur..i,
                    });
                    cur = i + 1;
                }
            }
            if cur < piece.end {
                out.push(Segment {
                    sentence: s,
                    tokens: cur..piece.end,
                });
            }
        }
    }
    out.retain(|seg| !seg.tokens.is_empty());
    out
}

/// Segment index of every token, `None` for separators.
pub fn segment_index(segs: &[Segment], n_tokens: usize) -> Vec<Option<usize>> {
    let mut out = vec![None; n_tokens];
    for (k, seg) in segs.iter().enumerate() {
        for t in seg.tokens.clone() {
            out[t] = Some(k);
        }
    }
    out
}

/// Per-word comparison key: lowercase, one trailing plural `s` removed.
pub fn word_key(w: &str) -> String {
    crate::canonical::variable_key(w)
}
