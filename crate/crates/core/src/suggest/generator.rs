//! Rule-based declaration generator.
//!
//! Every rule reads only the description and the entity spans, so spans drawn
//! by a user steer it exactly like tagged ones.

use std::collections::BTreeSet;
use std::ops::Range;
use std::sync::Arc;

use crate::canonical::variable_key;
use crate::ir::{
    collapse_ws, print_declaration, Constraint, ConstraintBody, Declaration, Direction, EntityLabel, EntitySpan,
    Objective, Operator, Quantity, Term,
};
use crate::lexicon::Lexicon;
use crate::number::NumberContext;

use super::prompt::{DeclarationPrompt, PromptKind};
use super::text::{segment_index, segments, sentences, tokenize, word_key, Segment, TokKind, Token};
use super::GeneratorContract;

const UNIT_WORDS: usize = 2;
const MIN_REMOTE_SCORE: usize = 2;
const UNIT_SCORE: usize = 2;

#[derive(Debug, Clone)]
pub struct RuleGenerator {
    lexicon: Arc<Lexicon>,
}

impl RuleGenerator {
    pub fn new(lexicon: Arc<Lexicon>) -> Self {
        RuleGenerator { lexicon }
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }
}

impl Default for RuleGenerator {
    fn default() -> Self {
        RuleGenerator::new(Arc::new(Lexicon::shared().clone()))
    }
}

impl GeneratorContract for RuleGenerator {
    fn generate(
        &self,
        description: &str,
        prompt: &DeclarationPrompt,
        entities: &[EntitySpan],
    ) -> Result<String, String> {
        let a = Analysis::new(description, entities, &self.lexicon);
        let decl = match prompt.kind {
            PromptKind::Objective => a.objective(prompt.anchor)?,
            PromptKind::Constraint => a.constraint(prompt.anchor)?,
        };
        Ok(print_declaration(&decl))
    }
}

struct Mention {
    toks: Range<usize>,
    var: usize,
}

struct Num {
    text: String,
    toks: Range<usize>,
    multiplier: bool,
    fraction: bool,
    percent: bool,
    var: Option<usize>,
    unit: BTreeSet<String>,
    keywords: BTreeSet<String>,
}

struct Analysis<'a> {
    lex: &'a Lexicon,
    toks: Vec<Token>,
    sents: Vec<Range<usize>>,
    segs: Vec<Segment>,
    seg_of: Vec<Option<usize>>,
    label_of: Vec<Option<EntityLabel>>,
    after_per: Vec<bool>,
    spans: Vec<(EntitySpan, Range<usize>)>,
    var_names: Vec<String>,
    mentions: Vec<Mention>,
    params: Vec<Num>,
    limits: Vec<Num>,
}

fn token_range(toks: &[Token], e: &EntitySpan) -> Option<Range<usize>> {
    let inside: Vec<usize> = (0..toks.len())
        .filter(|&i| toks[i].start >= e.start && toks[i].end <= e.end)
        .collect();
    let hits = if inside.is_empty() {
        (0..toks.len())
            .filter(|&i| toks[i].start < e.end && toks[i].end > e.start)
            .collect()
    } else {
        inside
    };
    Some(*hits.first()?..*hits.last()? + 1)
}

impl<'a> Analysis<'a> {
    fn new(description: &str, entities: &[EntitySpan], lex: &'a Lexicon) -> Self {
        let toks = tokenize(description);
        let mut spans: Vec<(EntitySpan, Range<usize>)> = entities
            .iter()
            .filter_map(|e| token_range(&toks, e).map(|r| (e.clone(), r)))
            .collect();
        spans.sort_by_key(|(e, _)| (e.start, e.end));
        let mut label_of = vec![None; toks.len()];
        let mut cue = vec![false; toks.len()];
        for (e, r) in &spans {
            for t in r.clone() {
                label_of[t] = Some(e.label);
            }
            if matches!(e.label, EntityLabel::Param | EntityLabel::Limit | EntityLabel::ConstDir) {
                cue[r.start] = true;
            }
        }
        let sents = sentences(description, &toks);
        let segs = segments(&toks, &sents, &lex.split, |i| cue[i]);
        let seg_of = segment_index(&segs, toks.len());
        let mut after_per = vec![false; toks.len()];
        for i in 0..toks.len() {
            if toks[i].lower == "per" {
                let mut j = i + 1;
                while j < toks.len() && toks[j].is_word() && !lex.is_stop(&toks[j].lower) {
                    after_per[j] = true;
                    j += 1;
                }
            }
        }
        let mut a = Analysis {
            lex,
            toks,
            sents,
            segs,
            seg_of,
            label_of,
            after_per,
            spans,
            var_names: Vec::new(),
            mentions: Vec::new(),
            params: Vec::new(),
            limits: Vec::new(),
        };
        a.collect_variables();
        a.collect_numbers();
        a
    }

    fn collect_variables(&mut self) {
        let mut keys: Vec<String> = Vec::new();
        for (e, r) in self.spans.iter().filter(|(e, _)| e.label == EntityLabel::Var) {
            let name = collapse_ws(&e.text);
            let key = variable_key(&name);
            let var = match keys.iter().position(|k| *k == key) {
                Some(v) => v,
                None => {
                    keys.push(key);
                    self.var_names.push(name);
                    keys.len() - 1
                }
            };
            self.mentions.push(Mention { toks: r.clone(), var });
        }
    }

    fn collect_numbers(&mut self) {
        for (e, r) in &self.spans {
            if !matches!(e.label, EntityLabel::Param | EntityLabel::Limit) {
                continue;
            }
            let next = self.toks.get(r.end).map(|t| t.lower.as_str()).unwrap_or("");
            let first = self.toks[r.start].lower.as_str();
            let fraction = next == "of"
                && self.toks[r.clone()]
                    .iter()
                    .any(|t| self.lex.fractions.contains(&t.lower));
            let multiplier = e.label == EntityLabel::Param
                && (next == "times" || matches!(first, "twice" | "thrice" | "double" | "triple") || fraction);
            let lower = e.text.to_lowercase();
            let num = Num {
                text: collapse_ws(&e.text),
                toks: r.clone(),
                multiplier,
                fraction,
                percent: lower.contains('%') || lower.contains("percent"),
                var: None,
                unit: self.unit(r),
                keywords: self.seg_of[r.start]
                    .map(|s| self.keywords(self.segs[s].tokens.clone()))
                    .unwrap_or_default(),
            };
            if e.label == EntityLabel::Param {
                self.params.push(num);
            } else {
                self.limits.push(num);
            }
        }
        for i in 0..self.params.len() {
            if !self.params[i].multiplier {
                self.params[i].var = self.associate(&self.params[i].toks);
            }
        }
    }

    /// Nearest variable before the number in its clause, else before it in
    /// the sentence, else the first one after it in the clause.
    fn associate(&self, r: &Range<usize>) -> Option<usize> {
        let seg = self.seg_of[r.start]?;
        let seg_r = &self.segs[seg].tokens;
        let sent_start = self.sents[self.segs[seg].sentence].start;
        let before = |lo: usize| {
            self.mentions
                .iter()
                .rfind(|m| m.toks.start >= lo && m.toks.end <= r.start)
                .map(|m| m.var)
        };
        before(seg_r.start).or_else(|| before(sent_start)).or_else(|| {
            self.mentions
                .iter()
                .find(|m| m.toks.start >= r.end && m.toks.end <= seg_r.end)
                .map(|m| m.var)
        })
    }

    fn is_content(&self, t: usize) -> bool {
        let tok = &self.toks[t];
        tok.is_word()
            && !self.lex.is_stop(&tok.lower)
            && !self.lex.number_words.contains(&tok.lower)
            && !self.lex.fractions.contains(&tok.lower)
    }

    /// Content words of a token range outside entity spans (objective names
    /// excepted) and outside `per ...` rate phrases.
    fn keywords(&self, r: Range<usize>) -> BTreeSet<String> {
        r.filter(|&t| {
            self.is_content(t) && !self.after_per[t] && matches!(self.label_of[t], None | Some(EntityLabel::ObjName))
        })
        .map(|t| word_key(&self.toks[t].lower))
        .collect()
    }

    /// Currency sign before the number, or up to two plain words after it.
    fn unit(&self, r: &Range<usize>) -> BTreeSet<String> {
        if r.start > 0 && self.toks[r.start - 1].kind == TokKind::Symbol {
            return BTreeSet::from([self.toks[r.start - 1].text.clone()]);
        }
        (r.end..self.toks.len())
            .take_while(|&t| self.is_content(t) && self.label_of[t].is_none())
            .take(UNIT_WORDS)
            .map(|t| word_key(&self.toks[t].lower))
            .collect()
    }

    fn anchored(&self, anchor: (usize, usize), label: EntityLabel) -> Result<&(EntitySpan, Range<usize>), String> {
        self.spans
            .iter()
            .find(|(e, _)| e.label == label && (e.start, e.end) == anchor)
            .ok_or_else(|| format!("no {} entity at {}..{}", label.tag(), anchor.0, anchor.1))
    }

    fn objective(&self, anchor: (usize, usize)) -> Result<Declaration, String> {
        let (dir, dir_r) = self.anchored(anchor, EntityLabel::ObjDir)?;
        let word = dir.text.trim().to_lowercase();
        let direction = self
            .lex
            .obj_dir
            .get(&word)
            .copied()
            .or_else(|| Direction::from_word(&word))
            .ok_or_else(|| format!("`{}` is not an objective direction", dir.text.trim()))?;
        let names: Vec<&EntitySpan> = self
            .spans
            .iter()
            .map(|(e, _)| e)
            .filter(|e| e.label == EntityLabel::ObjName)
            .collect();
        let name = names
            .iter()
            .find(|n| n.start >= dir.end)
            .or(names.first())
            .ok_or("no OBJ_NAME entity")?;
        let seg_end = self.seg_of[dir_r.start]
            .map(|s| self.segs[s].tokens.end)
            .unwrap_or(dir_r.end);
        let wanted = self.keywords(dir_r.end..seg_end);
        let mut terms = Vec::new();
        for (v, var) in self.var_names.iter().enumerate() {
            let best = self
                .params
                .iter()
                .filter(|p| p.var == Some(v))
                .enumerate()
                .max_by_key(|(i, p)| (p.keywords.intersection(&wanted).count(), std::cmp::Reverse(*i)))
                .map(|(_, p)| p);
            if let Some(p) = best {
                terms.push(term(var, p)?);
            }
        }
        if terms.is_empty() {
            return Err("no variable has a coefficient to put in the objective".into());
        }
        Ok(Declaration::Objective(Objective {
            direction,
            name: collapse_ws(&name.text),
            terms,
        }))
    }

    fn constraint(&self, anchor: (usize, usize)) -> Result<Declaration, String> {
        let (cdir, c_r) = self.anchored(anchor, EntityLabel::ConstDir)?;
        let const_dir = collapse_ws(&cdir.text);
        let operator = self.lex.polarity(&const_dir);
        let scope = self.scope(c_r);
        let in_scope = |r: &Range<usize>| r.start >= scope.start && r.end <= scope.end;

        let limit = self
            .limits
            .iter()
            .filter(|l| in_scope(&l.toks) && l.toks.start >= c_r.end)
            .min_by_key(|l| l.toks.start)
            .or_else(|| {
                self.limits
                    .iter()
                    .filter(|l| in_scope(&l.toks) && l.toks.end <= c_r.start)
                    .max_by_key(|l| l.toks.end)
            });
        let multiplier = self
            .params
            .iter()
            .filter(|p| p.multiplier && in_scope(&p.toks))
            .min_by_key(|p| (p.toks.start < c_r.end, p.toks.start));
        let scoped: Vec<&Mention> = self.mentions.iter().filter(|m| in_scope(&m.toks)).collect();
        let mut vars: Vec<usize> = Vec::new();
        for m in &scoped {
            if !vars.contains(&m.var) {
                vars.push(m.var);
            }
        }
        let body = |body: ConstraintBody| -> Result<Declaration, String> {
            Ok(Declaration::Constraint(Constraint {
                const_dir: const_dir.clone(),
                operator,
                body,
            }))
        };

        let Some(limit) = limit else {
            if vars.len() >= 2 {
                let pivot = multiplier.map(|m| m.toks.clone()).unwrap_or(c_r.clone());
                let (compared, base) = self.xby_roles(&scoped, &pivot);
                let multiplier = multiplier
                    .map(|m| quantity(&m.text, NumberContext::Param))
                    .transpose()?;
                let xy_alias = multiplier.is_none();
                return body(ConstraintBody::XbyConstraint {
                    base: self.var_names[base].clone(),
                    compared: self.var_names[compared].clone(),
                    multiplier,
                    xy_alias,
                });
            }
            if let (Some(m), [v]) = (multiplier.filter(|m| m.fraction), vars.as_slice()) {
                return body(ConstraintBody::RatioConstraint {
                    variable: self.var_names[*v].clone(),
                    limit: quantity(&m.text, NumberContext::Ratio)?,
                });
            }
            return Err(format!(
                "`{const_dir}` has no limit and fewer than two variables near it"
            ));
        };

        if limit.percent && vars.len() == 1 {
            return body(ConstraintBody::RatioConstraint {
                variable: self.var_names[vars[0]].clone(),
                limit: quantity(&limit.text, NumberContext::Ratio)?,
            });
        }
        let lim = quantity(&limit.text, NumberContext::Limit)?;

        let mut local: Vec<(usize, &Num)> = Vec::new();
        for p in self.params.iter().filter(|p| !p.multiplier && in_scope(&p.toks)) {
            if let Some(v) = p.var {
                if !local.iter().any(|(w, _)| *w == v) {
                    local.push((v, p));
                }
            }
        }
        if !local.is_empty() {
            local.sort_by_key(|(v, _)| *v);
            return body(ConstraintBody::LinearConstraint {
                limit: lim,
                terms: local
                    .iter()
                    .map(|(v, p)| term(&self.var_names[*v], p))
                    .collect::<Result<_, _>>()?,
            });
        }

        let scope_kw = self.keywords(scope.clone());
        let mut remote: Vec<(usize, &Num)> = Vec::new();
        for v in 0..self.var_names.len() {
            let best = self
                .params
                .iter()
                .filter(|p| p.var == Some(v) && !p.multiplier)
                .enumerate()
                .map(|(i, p)| {
                    let unit = if p.unit.is_disjoint(&limit.unit) { 0 } else { UNIT_SCORE };
                    (
                        unit + p.keywords.intersection(&scope_kw).count(),
                        std::cmp::Reverse(i),
                        p,
                    )
                })
                .max_by_key(|(score, i, _)| (*score, *i));
            if let Some((score, _, p)) = best {
                if score >= MIN_REMOTE_SCORE {
                    remote.push((v, p));
                }
            }
        }
        if remote.len() >= 2 {
            return body(ConstraintBody::LinearConstraint {
                limit: lim,
                terms: remote
                    .iter()
                    .map(|(v, p)| term(&self.var_names[*v], p))
                    .collect::<Result<_, _>>()?,
            });
        }

        if let [v] = vars.as_slice() {
            let variable = self.var_names[*v].clone();
            return body(match operator {
                Operator::GreaterOrEqual => ConstraintBody::LowerBound { variable, limit: lim },
                Operator::LessOrEqual => ConstraintBody::UpperBound { variable, limit: lim },
            });
        }

        if let Some((o, o_r)) = self.spans.iter().find(|(e, _)| e.label == EntityLabel::ObjDir) {
            let seg_end = self.seg_of[o_r.start]
                .map(|s| self.segs[s].tokens.end)
                .unwrap_or(o_r.end);
            if !self.keywords(o_r.end..seg_end).is_disjoint(&scope_kw) {
                if let Ok(Declaration::Objective(obj)) = self.objective((o.start, o.end)) {
                    return body(ConstraintBody::LinearConstraint {
                        limit: lim,
                        terms: obj.terms,
                    });
                }
            }
        }

        body(ConstraintBody::SumConstraint { limit: lim })
    }

    /// The clause around a CONST_DIR, cut where the next CONST_DIR of the
    /// same clause begins. Text before the first one belongs to it.
    fn scope(&self, c_r: &Range<usize>) -> Range<usize> {
        let Some(seg) = self.seg_of[c_r.start] else {
            return c_r.clone();
        };
        let seg_r = self.segs[seg].tokens.clone();
        let starts: Vec<usize> = self
            .spans
            .iter()
            .filter(|(e, r)| e.label == EntityLabel::ConstDir && r.start >= seg_r.start && r.start < seg_r.end)
            .map(|(_, r)| r.start)
            .collect();
        let lo = if starts.first() == Some(&c_r.start) {
            seg_r.start
        } else {
            c_r.start
        };
        let hi = starts.iter().copied().find(|&s| s > c_r.start).unwrap_or(seg_r.end);
        lo..hi
    }

    /// `(compared, base)` for `compared OP k * base`. "k times as many X"
    /// makes X the compared side; otherwise the variable before the pivot
    /// is compared against the one after it.
    fn xby_roles(&self, scoped: &[&Mention], pivot: &Range<usize>) -> (usize, usize) {
        let words: Vec<&str> = self.toks[pivot.end..]
            .iter()
            .take(3)
            .map(|t| t.lower.as_str())
            .collect();
        let times_as = matches!(
            words.as_slice(),
            ["times", "as", "many" | "much"] | ["times", "more", ..]
        );
        if times_as {
            if let Some(c) = scoped.iter().find(|m| m.toks.start >= pivot.end) {
                let base = scoped
                    .iter()
                    .find(|m| m.toks.start > c.toks.start && m.var != c.var)
                    .or_else(|| scoped.iter().find(|m| m.var != c.var))
                    .map(|m| m.var);
                if let Some(b) = base {
                    return (c.var, b);
                }
            }
        }
        let before = scoped.iter().rfind(|m| m.toks.end <= pivot.start);
        let after = |not: usize| scoped.iter().find(|m| m.toks.start >= pivot.end && m.var != not);
        if let Some(c) = before {
            if let Some(b) = after(c.var) {
                return (c.var, b.var);
            }
        }
        let first = scoped[0].var;
        let second = scoped.iter().find(|m| m.var != first).map(|m| m.var).unwrap_or(first);
        (first, second)
    }
}

fn quantity(text: &str, ctx: NumberContext) -> Result<Quantity, String> {
    Quantity::parse(text, ctx).map_err(|e| e.to_string())
}

fn term(var: &str, p: &Num) -> Result<Term, String> {
    Ok(Term {
        variable: var.to_string(),
        coefficient: quantity(&p.text, NumberContext::Param)?,
    })
}
