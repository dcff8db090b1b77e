//! Lexicon and pattern entity tagger.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use crate::ir::{EntityLabel, EntitySpan, Operator};
use crate::lexicon::Lexicon;

use super::text::{segment_index, segments, sentences, tokenize, word_key, TokKind, Token};

const AFTER_WINDOW: usize = 4;
const BEFORE_WINDOW: usize = 3;
const MAX_PHRASE: usize = 4;
/// Head nouns that may open an objective name even though they are stopwords.
const NAME_HEADS: [&str; 3] = ["total", "amount", "number"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NumKind {
    Digit,
    Percent,
    /// A number word; only kept when a constraint phrase claims it.
    Cardinal,
    /// `3 times`, `twice`.
    Multiplier,
    /// `a third of`.
    Fraction,
}

#[derive(Debug, Clone)]
struct NumCand {
    tokens: Range<usize>,
    kind: NumKind,
}

impl NumCand {
    fn is_multiplier(&self) -> bool {
        matches!(self.kind, NumKind::Multiplier | NumKind::Fraction)
    }
}

#[derive(Debug, Clone)]
struct ConstCand {
    tokens: Range<usize>,
    weak: bool,
    #[allow(dead_code)]
    operator: Operator,
}

pub fn tag_entities(description: &str) -> Vec<EntitySpan> {
    tag_with(description, Lexicon::shared())
}

pub fn tag_with(description: &str, lex: &Lexicon) -> Vec<EntitySpan> {
    let toks = tokenize(description);
    if toks.is_empty() {
        return Vec::new();
    }
    let ids = identifiers(&toks, lex);
    let nums = number_candidates(&toks, &ids, lex);
    let obj_dirs: Vec<usize> = (0..toks.len())
        .filter(|&i| toks[i].is_word() && lex.obj_dir.contains_key(&toks[i].lower))
        .collect();
    let consts = const_candidates(&toks, lex, &obj_dirs);

    let sents = sentences(description, &toks);
    let mut cue = vec![false; toks.len()];
    for n in nums.iter().filter(|n| n.kind != NumKind::Cardinal) {
        cue[n.tokens.start] = true;
    }
    for c in &consts {
        cue[c.tokens.start] = true;
    }
    let segs = segments(&toks, &sents, &lex.split, |i| cue[i]);
    let seg_of = segment_index(&segs, toks.len());

    let (kept, limit_of) = claim_limits(&toks, &nums, &consts, &segs, &seg_of);

    let mut spans: Vec<(Range<usize>, EntityLabel)> = Vec::new();
    let mut taken = vec![false; toks.len()];
    let take = |r: &Range<usize>, taken: &mut Vec<bool>| r.clone().for_each(|t| taken[t] = true);
    for &o in &obj_dirs {
        spans.push((o..o + 1, EntityLabel::ObjDir));
        take(&(o..o + 1), &mut taken);
    }
    for &k in &kept {
        spans.push((consts[k].tokens.clone(), EntityLabel::ConstDir));
        take(&consts[k].tokens, &mut taken);
    }
    let limits: BTreeSet<usize> = limit_of.values().copied().collect();
    let mut params = Vec::new();
    for (i, n) in nums.iter().enumerate() {
        take(&n.tokens, &mut taken);
        if limits.contains(&i) {
            spans.push((n.tokens.clone(), EntityLabel::Limit));
        } else if n.kind != NumKind::Cardinal {
            spans.push((n.tokens.clone(), EntityLabel::Param));
            if !n.is_multiplier() {
                params.push(i);
            }
        }
    }
    let names: Vec<Range<usize>> = obj_dirs
        .iter()
        .filter_map(|&o| objective_name(&toks, o, lex, &taken))
        .collect();
    for r in &names {
        take(r, &mut taken);
        spans.push((r.clone(), EntityLabel::ObjName));
    }

    let content: Vec<bool> = (0..toks.len())
        .map(|i| {
            !taken[i]
                && (ids[i]
                    || (toks[i].is_word()
                        && !lex.is_stop(&toks[i].lower)
                        && !lex.verbs.contains(&toks[i].lower)
                        && !lex.number_words.contains(&toks[i].lower)
                        && !lex.fractions.contains(&toks[i].lower)))
        })
        .collect();
    let chunks = chunks(&content, &seg_of);
    let vars = choose_variables(
        &toks, lex, &ids, &chunks, &nums, &params, &names, &segs, &seg_of, &kept, &consts,
    );
    for r in variable_mentions(&toks, &chunks, &vars) {
        spans.push((r, EntityLabel::Var));
    }

    spans.sort_by_key(|(r, _)| r.start);
    spans
        .into_iter()
        .map(|(r, label)| EntitySpan::from_chars(description, toks[r.start].start, toks[r.end - 1].end, label))
        .collect()
}

/// Integers glued to a name (`Beam 1`) when the pair also appears capitalized.
fn identifiers(toks: &[Token], lex: &Lexicon) -> Vec<bool> {
    let plain =
        |t: &Token| t.kind == TokKind::Number && t.text.len() <= 3 && t.text.chars().all(|c| c.is_ascii_digit());
    let nameish = |t: &Token| {
        t.is_word()
            && !lex.is_stop(&t.lower)
            && !lex.verbs.contains(&t.lower)
            && !lex.obj_dir.contains_key(&t.lower)
            && !lex.const_dir.iter().any(|e| e.phrase.contains(&t.lower))
    };
    let mut named = BTreeSet::new();
    for i in 1..toks.len() {
        let w = &toks[i - 1];
        if plain(&toks[i]) && nameish(w) && w.text.chars().next().is_some_and(char::is_uppercase) {
            named.insert((w.lower.clone(), toks[i].text.clone()));
        }
    }
    (0..toks.len())
        .map(|i| i > 0 && plain(&toks[i]) && named.contains(&(toks[i - 1].lower.clone(), toks[i].text.clone())))
        .collect()
}

fn number_candidates(toks: &[Token], ids: &[bool], lex: &Lexicon) -> Vec<NumCand> {
    let lower = |i: usize| toks.get(i).map(|t| t.lower.as_str()).unwrap_or("");
    let is_card = |i: usize| {
        toks.get(i)
            .is_some_and(|t| t.is_word() && lex.number_words.contains(&t.lower))
            && !is_multiple(lower(i))
    };
    let is_frac = |i: usize| {
        toks.get(i)
            .is_some_and(|t| t.is_word() && lex.fractions.contains(&t.lower))
    };
    let mut out = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        let t = &toks[i];
        if t.kind == TokKind::Number && !ids[i] {
            let (end, kind) = if t.text.ends_with('%') {
                (i + 1, NumKind::Percent)
            } else if lower(i + 1) == "percent" {
                (i + 2, NumKind::Percent)
            } else if lower(i + 1) == "times" {
                (i + 1, NumKind::Multiplier)
            } else {
                (i + 1, NumKind::Digit)
            };
            out.push(NumCand { tokens: i..end, kind });
            i = end;
            continue;
        }
        if !t.is_word() {
            i += 1;
            continue;
        }
        let article = matches!(t.lower.as_str(), "a" | "an" | "one") || is_card(i);
        if article && is_frac(i + 1) && lower(i + 2) == "of" {
            out.push(NumCand {
                tokens: i..i + 2,
                kind: NumKind::Fraction,
            });
            i += 2;
        } else if is_frac(i) && lower(i + 1) == "of" {
            out.push(NumCand {
                tokens: i..i + 1,
                kind: NumKind::Fraction,
            });
            i += 1;
        } else if is_multiple(&t.lower) {
            let next = lower(i + 1);
            if matches!(t.lower.as_str(), "twice" | "thrice") || next == "as" || next == "the" {
                out.push(NumCand {
                    tokens: i..i + 1,
                    kind: NumKind::Multiplier,
                });
            }
            i += 1;
        } else if is_card(i) {
            let mut end = i + 1;
            while is_card(end) {
                end += 1;
            }
            let (end, kind) = match lower(end) {
                "times" => (end, NumKind::Multiplier),
                "percent" => (end + 1, NumKind::Percent),
                _ => (end, NumKind::Cardinal),
            };
            out.push(NumCand { tokens: i..end, kind });
            i = end;
        } else {
            i += 1;
        }
    }
    out
}

fn is_multiple(w: &str) -> bool {
    matches!(w, "twice" | "thrice" | "double" | "triple")
}

fn const_candidates(toks: &[Token], lex: &Lexicon, obj_dirs: &[usize]) -> Vec<ConstCand> {
    let mut out = Vec::new();
    let mut i = 0;
    'scan: while i < toks.len() {
        if !toks[i].is_word() || obj_dirs.contains(&i) {
            i += 1;
            continue;
        }
        for e in &lex.const_dir {
            let n = e.phrase.len();
            let hit = i + n <= toks.len()
                && e.phrase
                    .iter()
                    .zip(&toks[i..i + n])
                    .all(|(p, t)| t.is_word() && *p == t.lower);
            if hit {
                out.push(ConstCand {
                    tokens: i..i + n,
                    weak: e.weak,
                    operator: e.operator,
                });
                i += n;
                continue 'scan;
            }
        }
        i += 1;
    }
    out
}

/// Pairs constraint phrases with their LIMIT number. Returns the kept
/// phrases (indices into `consts`) and the claim of each kept phrase.
fn claim_limits(
    toks: &[Token],
    nums: &[NumCand],
    consts: &[ConstCand],
    segs: &[super::text::Segment],
    seg_of: &[Option<usize>],
) -> (Vec<usize>, BTreeMap<usize, usize>) {
    let starts: BTreeMap<usize, usize> = nums.iter().enumerate().map(|(k, n)| (n.tokens.start, k)).collect();
    let ends: BTreeMap<usize, usize> = nums.iter().enumerate().map(|(k, n)| (n.tokens.end, k)).collect();
    let const_start: BTreeSet<usize> = consts.iter().map(|c| c.tokens.start).collect();
    let const_end: BTreeSet<usize> = consts.iter().map(|c| c.tokens.end).collect();
    let counts = |t: usize| matches!(toks[t].kind, TokKind::Word | TokKind::Number);

    // (const, num, number follows the phrase)
    let mut claims: Vec<(usize, usize, bool)> = Vec::new();
    for (ci, c) in consts.iter().enumerate() {
        let Some(seg) = seg_of[c.tokens.start] else { continue };
        let range = &segs[seg].tokens;
        let mut seen = 0;
        let mut found = None;
        let mut blocked = false;
        for t in c.tokens.end..range.end {
            if const_start.contains(&t) {
                break;
            }
            if let Some(&k) = starts.get(&t) {
                if nums[k].is_multiplier() {
                    blocked = true;
                } else {
                    found = Some((k, true));
                }
                break;
            }
            if counts(t) {
                seen += 1;
                if seen >= AFTER_WINDOW {
                    break;
                }
            }
        }
        if found.is_none() && !blocked {
            let mut seen = 0;
            for t in (range.start..c.tokens.start).rev() {
                if const_end.contains(&(t + 1)) {
                    break;
                }
                if let Some(&k) = ends.get(&(t + 1)) {
                    if !nums[k].is_multiplier() {
                        found = Some((k, false));
                    }
                    break;
                }
                if counts(t) {
                    seen += 1;
                    if seen >= BEFORE_WINDOW {
                        break;
                    }
                }
            }
        }
        if let Some((k, after)) = found {
            claims.push((ci, k, after));
        }
    }

    let mut by_num: BTreeMap<usize, Vec<(usize, bool)>> = BTreeMap::new();
    for &(ci, k, after) in &claims {
        by_num.entry(k).or_default().push((ci, after));
    }
    let mut limit_of = BTreeMap::new();
    for (k, mut rivals) in by_num {
        // strong beats weak; among weak cues the one after the number wins
        // ("has 40000 minutes available"), among strong ones the one before.
        rivals.sort_by_key(|&(ci, after)| {
            let c = &consts[ci];
            let distance = if after {
                nums[k].tokens.start - c.tokens.end
            } else {
                c.tokens.start - nums[k].tokens.end
            };
            (c.weak, if c.weak { after } else { !after }, distance)
        });
        limit_of.insert(rivals[0].0, k);
    }
    let kept = (0..consts.len())
        .filter(|ci| !consts[*ci].weak || limit_of.contains_key(ci))
        .collect();
    (kept, limit_of)
}

fn objective_name(toks: &[Token], o: usize, lex: &Lexicon, taken: &[bool]) -> Option<Range<usize>> {
    let mut j = o + 1;
    while toks
        .get(j)
        .is_some_and(|t| matches!(t.lower.as_str(), "a" | "an" | "the") || lex.possessives.contains(&t.lower))
    {
        j += 1;
    }
    let start = j;
    while j < toks.len() && j - start < MAX_PHRASE {
        let t = &toks[j];
        let ok = t.is_word()
            && !taken[j]
            && (!lex.is_stop(&t.lower) || NAME_HEADS.contains(&t.lower.as_str()))
            && !lex.verbs.contains(&t.lower)
            && !lex.number_words.contains(&t.lower);
        if !ok {
            break;
        }
        j += 1;
    }
    (j > start).then_some(start..j)
}

/// Maximal runs of content tokens inside one segment.
fn chunks(content: &[bool], seg_of: &[Option<usize>]) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < content.len() {
        if !content[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < content.len() && content[i] && seg_of[i] == seg_of[start] {
            i += 1;
        }
        out.push(start..i);
    }
    out
}

fn phrase_key(toks: &[Token], r: Range<usize>) -> String {
    let words: Vec<&str> = toks[r].iter().map(|t| t.lower.as_str()).collect();
    crate::canonical::variable_key(&words.join(" "))
}

#[allow(clippy::too_many_arguments)]
fn choose_variables(
    toks: &[Token],
    lex: &Lexicon,
    ids: &[bool],
    chunks: &[Range<usize>],
    nums: &[NumCand],
    params: &[usize],
    names: &[Range<usize>],
    segs: &[super::text::Segment],
    seg_of: &[Option<usize>],
    kept: &[usize],
    consts: &[ConstCand],
) -> BTreeSet<String> {
    let num_end: BTreeSet<usize> = nums.iter().map(|n| n.tokens.end).collect();
    let eligible = |start: usize| {
        if start == 0 {
            return true;
        }
        let p = &toks[start - 1];
        let after_number = (p.kind == TokKind::Number && !ids[start - 1]) || num_end.contains(&start);
        !(after_number || p.lower == "per" || lex.possessives.contains(&p.lower))
    };
    let name_keys: Vec<Vec<String>> = names
        .iter()
        .map(|r| toks[r.clone()].iter().map(|t| word_key(&t.lower)).collect())
        .collect();
    let inside_name = |r: &Range<usize>| {
        let keys: Vec<String> = toks[r.clone()].iter().map(|t| word_key(&t.lower)).collect();
        name_keys
            .iter()
            .any(|n| n.windows(keys.len()).any(|w| w == keys.as_slice()))
    };

    let mut freq: BTreeMap<String, usize> = BTreeMap::new();
    for c in chunks {
        for i in c.clone() {
            for j in i + 1..=c.end.min(i + MAX_PHRASE) {
                if i == c.start && !eligible(i) {
                    continue;
                }
                *freq.entry(phrase_key(toks, i..j)).or_default() += 1;
            }
        }
    }
    let best_in = |c: &Range<usize>| -> Option<String> {
        let mut best: Option<(usize, usize, String)> = None;
        for i in c.clone() {
            for j in i + 1..=c.end.min(i + MAX_PHRASE) {
                let key = phrase_key(toks, i..j);
                if freq.get(&key).copied().unwrap_or(0) < 2 || inside_name(&(i..j)) {
                    continue;
                }
                let better = match &best {
                    None => true,
                    Some((len, start, _)) => j - i > *len || (j - i == *len && i < *start),
                };
                if better {
                    best = Some((j - i, i, key));
                }
            }
        }
        best.map(|(_, _, k)| k)
    };

    let mut vars = BTreeSet::new();
    for &p in params {
        let at = nums[p].tokens.start;
        let Some(seg) = seg_of[at] else { continue };
        let seg_start = segs[seg].tokens.start;
        let found = chunks
            .iter()
            .filter(|c| c.start >= seg_start && c.end <= at)
            .find_map(&best_in);
        if let Some(k) = found {
            vars.insert(k);
        }
    }
    if vars.is_empty() {
        // no quantities to anchor on: take the subject of each constraint
        for &k in kept {
            let at = consts[k].tokens.start;
            let Some(seg) = seg_of[at] else { continue };
            let seg_start = segs[seg].tokens.start;
            if let Some(c) = chunks.iter().rfind(|c| c.start >= seg_start && c.end <= at) {
                vars.insert(phrase_key(toks, c.clone()));
            }
        }
    }
    vars
}

fn variable_mentions(toks: &[Token], chunks: &[Range<usize>], vars: &BTreeSet<String>) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    for c in chunks {
        let mut i = c.start;
        while i < c.end {
            let hit = (i + 1..=c.end.min(i + MAX_PHRASE))
                .rev()
                .find(|&j| vars.contains(&phrase_key(toks, i..j)));
            match hit {
                Some(j) => {
                    out.push(i..j);
                    i = j;
                }
                None => i += 1,
            }
        }
    }
    out
}
