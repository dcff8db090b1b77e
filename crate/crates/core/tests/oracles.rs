//! Cross-checks against the brute-force oracles in `support`.

mod support;

use lpwp_core::canonical::CanonicalForm;
use lpwp_core::dataset::appendix_corpus;
use lpwp_core::evaluator::match_declarations;
use lpwp_core::ir::Direction;
use lpwp_core::number::{int, ratio, to_f64};
use lpwp_core::solver::{check_point, solve_canonical, FeasibilityViolation, SolveStatus};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::criteria::{random_form, record};
use support::{dot, match_table, max_matching, vertex_optimum, DenseLp};

/// A perturbed copy of `gold`: rows dropped, duplicated, shifted or
/// shuffled, columns renamed by case only.
fn perturb(gold: &CanonicalForm, rng: &mut impl Rng) -> CanonicalForm {
    let mut f = gold.clone();
    if rng.gen_bool(0.3) {
        f.variables = f.variables.iter().map(|v| v.to_uppercase()).collect();
    }
    if rng.gen_bool(0.2) {
        if let Some(o) = &mut f.objective {
            o.direction = match o.direction {
                Direction::Maximize => Direction::Minimize,
                Direction::Minimize => Direction::Maximize,
            };
        }
    }
    for _ in 0..rng.gen_range(0..3) {
        if f.constraints.is_empty() {
            break;
        }
        let i = rng.gen_range(0..f.constraints.len());
        match rng.gen_range(0..3) {
            0 => {
                f.constraints.remove(i);
            }
            1 => {
                let row = f.constraints[i].clone();
                f.constraints.push(row);
            }
            _ => f.constraints[i].rhs += ratio(1, rng.gen_range(1..4)),
        }
    }
    f.constraints.shuffle(rng);
    f
}

#[test]
fn greedy_matching_equals_optimal_assignment() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for r in appendix_corpus().records {
        let gold = &r.gold_canonical;
        for _ in 0..200 {
            let pred = perturb(gold, &mut rng);
            let m = match_declarations(&pred, gold);
            let best = max_matching(&match_table(&pred, gold));
            assert_eq!(m.matched.len(), best, "{}: {pred:?}", r.id);
            assert_eq!(
                match_declarations(gold, &pred).matched.len(),
                best,
                "{}: reversed",
                r.id
            );
            assert_eq!(m.fp, m.p - best);
            assert_eq!(m.fn_, m.d.saturating_sub(m.p));
        }
    }
}

#[test]
fn identical_forms_match_completely() {
    for r in appendix_corpus().records {
        let m = match_declarations(&r.gold_canonical, &r.gold_canonical);
        assert_eq!(m.matched.len(), m.d, "{}", r.id);
        assert_eq!((m.fp, m.fn_), (0, 0));
    }
}

#[test]
fn flower_vertex_oracle() {
    let gold = record("resource").gold_canonical;
    let (best, x) = vertex_optimum(&DenseLp::from_form(&gold)).unwrap();
    assert!((best + 1192.5).abs() < 1e-9);
    assert!((x[0] - 232.5).abs() < 1e-9 && (x[1] - 10.0).abs() < 1e-9);
}

#[test]
fn no_grid_point_beats_the_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..30 {
        let form = random_form(&mut rng);
        let lp = DenseLp::from_form(&form);
        let sol = solve_canonical(&form, true).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        let best = sol.objective.unwrap();
        let n = lp.c.len();
        let steps = if n == 2 { 41 } else { 21 };
        let mut idx = vec![0usize; n];
        loop {
            let x: Vec<f64> = idx.iter().map(|&i| 20.0 * i as f64 / (steps - 1) as f64).collect();
            if lp.feasible(&x, 0.0) {
                assert!(dot(&lp.c, &x) >= best - 1e-6, "{x:?} beats {best}");
            }
            let mut k = 0;
            while k < n && idx[k] == steps - 1 {
                idx[k] = 0;
                k += 1;
            }
            if k == n {
                break;
            }
            idx[k] += 1;
        }
    }
}

#[test]
fn solving_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..20 {
        let form = random_form(&mut rng);
        let a = solve_canonical(&form, true).unwrap();
        let b = solve_canonical(&form, true).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn check_point_examples() {
    let farming = record("farming").gold_canonical;
    assert_eq!(check_point(&farming, &[int(100), int(350)]).unwrap(), []);
    assert_eq!(check_point(&farming, &[int(0), int(0)]).unwrap(), []);
    let flower = record("resource").gold_canonical;
    let v = check_point(&flower, &[int(0), int(0)]).unwrap();
    assert_eq!(v.len(), 1);
    match &v[0] {
        FeasibilityViolation::Row { row, excess } => {
            assert_eq!(*row, 2);
            assert_eq!(to_f64(&flower.constraints[2].rhs), -10.0);
            assert_eq!(*excess, 10.0);
        }
        other => panic!("{other:?}"),
    }
    let neg = check_point(&farming, &[int(-1), int(0)]).unwrap();
    assert!(matches!(neg[..], [FeasibilityViolation::Negative { column: 0, .. }]));
    assert!(check_point(&farming, &[int(1)]).is_err());
}
