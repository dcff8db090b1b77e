//! One check per acceptance criterion. Each returns a short summary on
//! success and the first failure otherwise.

use std::path::Path;
use std::time::{Duration, Instant};

use lpwp_core::canonical::canonicalize;
use lpwp_core::copy_mix::{copy_distribution, mix, scatter, softmax, AttentionInputs, Head, MixtureInputs};
use lpwp_core::dataset::{self, appendix_corpus, import, validate_record, Domain, ProblemRecord, Split, ViolationKind};
use lpwp_core::evaluator::{accuracy, evaluate_corpus, evaluate_ir, MatchResult};
use lpwp_core::number::to_f64;
use lpwp_core::print_ir;
use lpwp_core::solver::{check_point, solve_canonical, SolveStatus};
use lpwp_core::suggest::{suggest_declarations, suggested_document, tag_entities};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use super::{accuracy_by_hand, vertex_optimum, DenseLp};

pub type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration, what: &str) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took < limit, || format!("{what} took {took:?}, budget {limit:?}"))
}

pub fn record(id: &str) -> ProblemRecord {
    appendix_corpus()
        .records
        .into_iter()
        .find(|r| r.id == id)
        .expect("fixture id")
}

pub fn golden_canonicalization() -> Outcome {
    let start = Instant::now();
    let corpus = appendix_corpus();
    ensure(corpus.records.len() == 7, || {
        format!("{} fixtures", corpus.records.len())
    })?;
    let mut worst = 0f64;
    for r in &corpus.records {
        let doc = r
            .gold_document()
            .ok_or_else(|| format!("{}: gold IR does not parse", r.id))?;
        let form = canonicalize(&doc).map_err(|e| format!("{}: {e}", r.id))?;
        let diff = form
            .max_abs_diff(&r.gold_canonical)
            .ok_or_else(|| format!("{}: shape differs from the printed table", r.id))?;
        ensure(diff <= 1e-4, || format!("{}: off by {diff}", r.id))?;
        worst = worst.max(diff);
    }
    let health = record("health_science");
    let rhs = to_f64(&health.gold_canonical.constraints[1].rhs);
    ensure(rhs == -3.0, || format!("health_science constraint_1 rhs {rhs}"))?;
    let flagged = health.notes.as_deref().is_some_and(|n| n.contains("erratum"));
    ensure(flagged, || "health_science erratum is not flagged".into())?;
    within(start, Duration::from_secs(1), "canonicalization")?;
    Ok(format!("7 tables, worst cell diff {worst:.1e}, erratum flagged"))
}

fn result(fp: usize, fn_: usize, d: usize) -> MatchResult {
    MatchResult {
        id: None,
        matched: Vec::new(),
        fp,
        fn_,
        d,
        p: 0,
    }
}

/// `(label, predicted IR, gold id, FP, FN, D)`, counted by hand from the IR.
fn ir_cases() -> Vec<(&'static str, String, &'static str, usize, usize, usize)> {
    let gold = record("resource").gold_ir;
    let blocks: Vec<String> = gold.split("\n\n").map(str::to_string).collect();
    let without_last = blocks[..3].join("\n\n");
    let limit_changed = gold.replace("<LIMIT> 5000 </LIMIT>", "<LIMIT> 6000 </LIMIT>");
    let extra = format!(
        "{gold}\n\n<DECLARATION> <CONST_DIR> at most </CONST_DIR> <LIMIT> 99 </LIMIT> <OPERATOR> LESS_OR_EQUAL </OPERATOR> <CONST_TYPE> [UPPER_BOUND] </CONST_TYPE> <VAR> adult doses </VAR> </DECLARATION>"
    );
    let flipped = gold.replace("<OBJ_DIR> maximize </OBJ_DIR>", "<OBJ_DIR> minimize </OBJ_DIR>");
    let all_wrong = [
        ("<LIMIT> 5000 </LIMIT>", "<LIMIT> 1 </LIMIT>"),
        ("<LIMIT> 10 </LIMIT>", "<LIMIT> 2 </LIMIT>"),
        ("<PARAM> three </PARAM>", "<PARAM> four </PARAM>"),
        ("<OBJ_DIR> maximize </OBJ_DIR>", "<OBJ_DIR> minimize </OBJ_DIR>"),
    ]
    .iter()
    .fold(gold.clone(), |acc, (a, b)| acc.replace(a, b));
    let over = format!("{all_wrong}\n\n{}", blocks[1].replace("5000", "7"));
    let broken_block = gold.replacen("</LIMIT>", "", 1);
    vec![
        ("identical", gold.clone(), "resource", 0, 0, 4),
        ("one constraint missing", without_last, "resource", 0, 1, 4),
        ("one limit altered", limit_changed, "resource", 1, 0, 4),
        ("one extra constraint", extra, "resource", 1, 0, 4),
        ("objective direction flipped", flipped, "resource", 1, 0, 4),
        ("unparseable document", "no tags at all".into(), "resource", 0, 4, 4),
        ("every row wrong plus one", over, "resource", 5, 0, 4),
        ("one malformed block", broken_block, "resource", 1, 0, 4),
    ]
}

pub fn metric_fidelity() -> Outcome {
    let mut cases = 0;
    // counts straight into the formula
    let table: &[(&[(usize, usize, usize)], f64)] = &[
        (&[(0, 0, 4)], 1.0),
        (&[(0, 3, 3)], 0.0),
        (&[(4, 3, 3)], 0.0),
        (&[(1, 0, 4), (0, 0, 2)], 1.0 - 1.0 / 6.0),
        (&[(2, 1, 4), (0, 0, 4)], 1.0 - 3.0 / 8.0),
        (&[(9, 0, 2), (0, 1, 3)], 1.0 - 3.0 / 5.0),
    ];
    for (problems, expected) in table {
        let results: Vec<MatchResult> = problems.iter().map(|&(fp, fn_, d)| result(fp, fn_, d)).collect();
        let got = accuracy(&results).map_err(|e| e.to_string())?;
        ensure((got - expected).abs() <= 1e-9, || {
            format!("{problems:?}: {got} != {expected}")
        })?;
        cases += 1;
    }
    let gold = record("resource").gold_document().expect("gold");
    for (label, pred, _, fp, fn_, d) in ir_cases() {
        let m = evaluate_ir(&pred, &gold).result;
        ensure((m.fp, m.fn_, m.d) == (fp, fn_, d), || {
            format!(
                "{label}: got FP={} FN={} D={}, expected {fp}/{fn_}/{d}",
                m.fp, m.fn_, m.d
            )
        })?;
        let expected = accuracy_by_hand(&[(fp, fn_, d)]);
        let got = accuracy(&[m]).map_err(|e| e.to_string())?;
        ensure((got - expected).abs() <= 1e-9, || {
            format!("{label}: {got} != {expected}")
        })?;
        cases += 1;
    }
    ensure(accuracy(&[]).is_err(), || "empty corpus accepted".into())?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10_000 {
        let k = rng.gen_range(1..=4);
        let problems: Vec<(usize, usize, usize)> = (0..k)
            .map(|_| (rng.gen_range(0..12), rng.gen_range(0..12), rng.gen_range(1..12)))
            .collect();
        let results: Vec<MatchResult> = problems.iter().map(|&(fp, fn_, d)| result(fp, fn_, d)).collect();
        let acc = accuracy(&results).map_err(|e| e.to_string())?;
        ensure((0.0..=1.0).contains(&acc), || format!("{problems:?} -> {acc}"))?;
        let expected = accuracy_by_hand(&problems);
        ensure((acc - expected).abs() <= 1e-12, || {
            format!("{problems:?}: {acc} != {expected}")
        })?;
    }
    Ok(format!("{cases} hand cases, 10000 fuzzed triples in [0,1]"))
}

pub fn solver_oracle() -> Outcome {
    let start = Instant::now();
    let mut checked = 0;
    let mut infeasible = 0;
    let mut check = |label: &str, form: &lpwp_core::CanonicalForm| -> Result<(), String> {
        let lp = DenseLp::from_form(form);
        let sol = solve_canonical(form, true).map_err(|e| format!("{label}: {e}"))?;
        // x >= 0 makes the region pointed: no vertex means no feasible point
        let Some((best, _)) = vertex_optimum(&lp) else {
            ensure(sol.status == SolveStatus::Infeasible, || {
                format!("{label}: no vertex but {:?}", sol.status)
            })?;
            infeasible += 1;
            checked += 1;
            return Ok(());
        };
        ensure(sol.status == SolveStatus::Optimal, || {
            format!("{label}: {:?}", sol.status)
        })?;
        let maximize = form
            .objective
            .as_ref()
            .is_some_and(|o| o.direction == lpwp_core::ir::Direction::Maximize);
        let reported = sol.objective.unwrap_or(f64::NAN);
        let value = if maximize { -reported } else { reported };
        ensure((value - best).abs() <= 1e-6 * (1.0 + best.abs()), || {
            format!("{label}: simplex {value}, vertices {best}")
        })?;
        let point = sol.x_exact.clone().ok_or_else(|| format!("{label}: no exact point"))?;
        let violations = check_point(form, &point).map_err(|e| e.to_string())?;
        ensure(violations.is_empty(), || {
            format!("{label}: optimum violates {violations:?}")
        })?;
        let lp_exact = lpwp_core::to_solver_form(form, true).map_err(|e| e.to_string())?;
        ensure(lpwp_core::check_feasible(&lp_exact, &sol.x, 1e-9), || {
            format!("{label}: check_feasible rejects the optimum")
        })?;
        checked += 1;
        Ok(())
    };
    for r in appendix_corpus().records {
        check(&r.id, &r.gold_canonical)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..100 {
        let form = random_form(&mut rng);
        check(&format!("random #{i}"), &form)?;
    }
    within(start, Duration::from_secs(5), "solver oracle")?;
    Ok(format!(
        "{checked} LPs agree with vertex enumeration ({infeasible} infeasible on both routes)"
    ))
}

/// A random bounded feasible minimization problem as a canonical form.
pub fn random_form(rng: &mut impl Rng) -> lpwp_core::CanonicalForm {
    let lp = super::random_lp(rng);
    let n = lp.c.len();
    let q = |v: f64| lpwp_core::number::int(v as i64);
    lpwp_core::CanonicalForm {
        variables: (0..n).map(|j| format!("x{j}")).collect(),
        objective: Some(lpwp_core::canonical::CanonicalObjective {
            direction: lpwp_core::ir::Direction::Minimize,
            coefficients: lp.c.iter().map(|&v| q(v)).collect(),
        }),
        constraints: lp
            .a
            .iter()
            .zip(&lp.b)
            .map(|(row, &b)| lpwp_core::CanonicalRow {
                coefficients: row.iter().map(|&v| q(v)).collect(),
                rhs: q(b),
                source_kind: lpwp_core::ir::ConstraintKind::LinearConstraint,
                const_dir_text: "at most".into(),
            })
            .collect(),
    }
}

#[derive(Deserialize)]
struct TwoHead {
    s_t: Vec<f64>,
    d_k: usize,
    heads: Vec<Head>,
    expected_alpha: Vec<Vec<f64>>,
    expected_p_copy: Vec<f64>,
}

fn random_simplex(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0f64) + 1e-3).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

fn random_matrix(rng: &mut impl Rng, r: usize, c: usize) -> Vec<Vec<f64>> {
    (0..r)
        .map(|_| (0..c).map(|_| rng.gen_range(-2.0..2.0)).collect())
        .collect()
}

pub fn copy_mix_numerics() -> Outcome {
    let fixture: TwoHead =
        serde_json::from_str(include_str!("../../fixtures/copy_mix_two_head.json")).map_err(|e| e.to_string())?;
    let got = copy_distribution(&AttentionInputs {
        s_t: fixture.s_t.clone(),
        d_k: fixture.d_k,
        heads: fixture.heads.clone(),
    })
    .map_err(|e| e.to_string())?;
    // the frozen numbers are recomputed here from the closed forms
    let e = std::f64::consts::FRAC_1_SQRT_2;
    let hand_alpha = [
        [1.0 / (1.0 + (-e).exp()), (-e).exp() / (1.0 + (-e).exp())],
        [1.0 / (1.0 + (2.0 * e).exp()), 1.0 / (1.0 + (-2.0 * e).exp())],
    ];
    for h in 0..2 {
        for i in 0..2 {
            for expected in [fixture.expected_alpha[h][i], hand_alpha[h][i]] {
                let d = (got.alpha[h][i] - expected).abs();
                ensure(d <= 1e-12, || format!("alpha[{h}][{i}] off by {d}"))?;
            }
        }
    }
    for i in 0..2 {
        let hand = (hand_alpha[0][i] + hand_alpha[1][i]) / 2.0;
        for expected in [fixture.expected_p_copy[i], hand] {
            let d = (got.p_copy[i] - expected).abs();
            ensure(d <= 1e-12, || format!("p_copy[{i}] off by {d}"))?;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..1000 {
        let d_s = rng.gen_range(1..5);
        let d_h = rng.gen_range(1..5);
        let d_k = rng.gen_range(1..5);
        let n_src = rng.gen_range(1..8);
        let heads: Vec<Head> = (0..rng.gen_range(1..4))
            .map(|_| Head {
                w_s: random_matrix(&mut rng, d_k, d_s),
                w_h: random_matrix(&mut rng, d_k, d_h),
                h: random_matrix(&mut rng, n_src, d_h),
            })
            .collect();
        let inp = AttentionInputs {
            s_t: (0..d_s).map(|_| rng.gen_range(-3.0..3.0)).collect(),
            d_k,
            heads,
        };
        let dist = copy_distribution(&inp).map_err(|e| format!("case {case}: {e}"))?;
        for a in dist.alpha.iter().chain(std::iter::once(&dist.p_copy)) {
            let s: f64 = a.iter().sum();
            ensure((s - 1.0).abs() <= 1e-9, || {
                format!("case {case}: attention sums to {s}")
            })?;
        }

        let scores: Vec<f64> = (0..n_src).map(|_| rng.gen_range(-20.0..20.0)).collect();
        let shift = rng.gen_range(-500.0..500.0);
        let shifted: Vec<f64> = scores.iter().map(|v| v + shift).collect();
        let (a, b) = (softmax(&scores), softmax(&shifted));
        let d = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        ensure(d <= 1e-9, || format!("case {case}: softmax moved by {d} under a shift"))?;

        let vocab = n_src + rng.gen_range(1..6);
        let ids: Vec<usize> = (0..n_src).map(|_| rng.gen_range(0..vocab)).collect();
        let p_copy = scatter(&dist.p_copy, &ids, vocab).map_err(|e| e.to_string())?;
        let p_vocab = random_simplex(&mut rng, vocab);
        let mut mask: Vec<bool> = (0..vocab).map(|_| rng.gen_bool(0.6)).collect();
        mask[ids[0]] = true;
        let at = |p_gen: f64, mask: &[bool]| {
            mix(&MixtureInputs {
                p_vocab: p_vocab.clone(),
                p_copy: p_copy.clone(),
                p_gen,
                source_mask: mask.to_vec(),
            })
            .map_err(|e| format!("case {case}: {e}"))
        };
        let p_gen = rng.gen_range(0.0..=1.0);
        let p = at(p_gen, &mask)?;
        let s: f64 = p.iter().sum();
        ensure((s - 1.0).abs() <= 1e-9, || format!("case {case}: mixture sums to {s}"))?;

        let full = vec![true; vocab];
        let gen_end = at(1.0, &full)?;
        let copy_end = at(0.0, &mask)?;
        let close = |x: &[f64], y: &[f64]| x.iter().zip(y).all(|(a, b)| (a - b).abs() <= 1e-12);
        ensure(close(&gen_end, &p_vocab), || {
            format!("case {case}: p_gen = 1 is not P_vocab")
        })?;
        ensure(close(&copy_end, &p_copy), || {
            format!("case {case}: p_gen = 0 is not P_copy")
        })?;

        let t = rng.gen_range(0.0..=1.0);
        let mid = at(t, &mask)?;
        let lo = at(0.0, &mask)?;
        let hi = at(1.0, &mask)?;
        for w in 0..vocab {
            let line = (1.0 - t) * lo[w] + t * hi[w];
            ensure((mid[w] - line).abs() <= 1e-12, || {
                format!("case {case}: mix is not affine in p_gen at {w}")
            })?;
        }
    }
    Ok("fixture to 1e-12, 1000 fuzzed instances".into())
}

pub fn pipeline() -> Outcome {
    let corpus = appendix_corpus();
    let mut items = Vec::new();
    for r in &corpus.records {
        let entities = tag_entities(&r.description);
        let suggestions = suggest_declarations(&r.description, &entities).map_err(|e| format!("{}: {e}", r.id))?;
        let doc = suggested_document(&suggestions);
        // the suggested model has to reach a canonical table on its own
        canonicalize(&doc).map_err(|e| format!("{}: {e}", r.id))?;
        let gold = r.gold_document().ok_or_else(|| format!("{}: gold IR", r.id))?;
        items.push((r.id.as_str(), print_ir(&doc), gold));
    }
    let report =
        evaluate_corpus(items.iter().map(|(id, pred, gold)| (*id, pred.as_str(), gold))).map_err(|e| e.to_string())?;
    let acc = report.accuracy;
    ensure(acc >= 0.8, || format!("accuracy {acc:.4} below 0.8"))?;
    Ok(format!("accuracy {acc:.4} on 7 problems"))
}

/// Corrupts one field of a gold IR while keeping the printed table.
fn corrupt(r: &ProblemRecord, from: &str, to: &str) -> ProblemRecord {
    assert!(r.gold_ir.contains(from), "{from:?} not in {}", r.id);
    let mut bad = r.clone();
    bad.gold_ir = r.gold_ir.replacen(from, to, 1);
    bad
}

pub fn dataset_validator() -> Outcome {
    let corpus = appendix_corpus();
    ensure(corpus.rejections.is_empty(), || format!("{:?}", corpus.rejections))?;
    ensure(corpus.records.len() == 7, || "fixture count".into())?;
    for r in &corpus.records {
        let v = validate_record(r);
        ensure(v.is_empty(), || format!("{}: {v:?}", r.id))?;
    }
    let r = record("resource");
    let cases = [
        (
            "coefficient",
            corrupt(&r, "<PARAM> 20 </PARAM>", "<PARAM> 25 </PARAM>"),
            ViolationKind::CoefficientMismatch,
        ),
        (
            "limit",
            corrupt(&r, "<LIMIT> 5000 </LIMIT>", "<LIMIT> 500 </LIMIT>"),
            ViolationKind::RhsMismatch,
        ),
        (
            "missing PARAM",
            corrupt(&r, "<PARAM> three </PARAM>", ""),
            ViolationKind::MissingRole,
        ),
    ];
    for (label, bad, kind) in &cases {
        let kinds: Vec<ViolationKind> = validate_record(bad).iter().map(|v| v.kind).collect();
        ensure(kinds.first() == Some(kind), || {
            format!("{label}: {kinds:?}, expected {kind:?} first")
        })?;
        let text = dataset::write_corpus(std::slice::from_ref(bad));
        let loaded = dataset::parse_corpus(&text).map_err(|e| e.to_string())?;
        ensure(loaded.records.is_empty() && loaded.rejections.len() == 1, || {
            format!("{label}: loader kept the record")
        })?;
    }
    let mut msg = "7 records clean, 3 corruptions rejected".to_string();
    match released_stats() {
        Some(Ok(s)) => msg.push_str(&format!("; released corpus {s}")),
        Some(Err(e)) => return Err(e),
        None => msg.push_str("; released corpus SKIP (LPWP_CORPUS unset)"),
    }
    Ok(msg)
}

/// Statistics of the released corpus under `$LPWP_CORPUS` (a directory with
/// `train.jsonl`, `dev.jsonl`, `test.jsonl`).
fn released_stats() -> Option<Result<String, String>> {
    let dir = std::env::var_os("LPWP_CORPUS")?;
    Some(released_stats_in(Path::new(&dir)))
}

fn released_stats_in(dir: &Path) -> Result<String, String> {
    let mut records = Vec::new();
    for (file, split) in [
        ("train.jsonl", Split::Train),
        ("dev.jsonl", Split::Dev),
        ("test.jsonl", Split::Test),
    ] {
        let text = std::fs::read_to_string(dir.join(file)).map_err(|e| format!("{file}: {e}"))?;
        let c = import::import_generation_jsonl(&text, Domain::Sales, Some(split)).map_err(|e| e.to_string())?;
        records.extend(c.records);
    }
    let s = dataset::stats(&records);
    let splits: Vec<usize> = [Split::Train, Split::Dev, Split::Test]
        .iter()
        .map(|k| s.split_sizes.get(k).copied().unwrap_or(0))
        .collect();
    ensure(s.problems == 1101, || format!("{} problems", s.problems))?;
    ensure(s.declarations == 4216, || format!("{} declarations", s.declarations))?;
    ensure(format!("{:.2}", s.avg_variables) == "2.08", || {
        format!("avg variables {}", s.avg_variables)
    })?;
    ensure(format!("{:.2}", s.avg_constraints) == "2.83", || {
        format!("avg constraints {}", s.avg_constraints)
    })?;
    ensure(splits == [713, 99, 289], || format!("splits {splits:?}"))?;
    Ok("1101/4216/2.08/2.83, splits 713/99/289".into())
}
