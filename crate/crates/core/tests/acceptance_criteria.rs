//! The library-level acceptance criteria, one test each.

mod support;

use support::criteria;

fn pass(outcome: criteria::Outcome) {
    match outcome {
        Ok(summary) => println!("{summary}"),
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn golden_canonicalization() {
    pass(criteria::golden_canonicalization());
}

#[test]
fn metric_fidelity() {
    pass(criteria::metric_fidelity());
}

#[test]
fn solver_matches_vertex_enumeration() {
    pass(criteria::solver_oracle());
}

#[test]
fn copy_mix_numerics() {
    pass(criteria::copy_mix_numerics());
}

#[test]
fn tag_suggest_evaluate_pipeline() {
    pass(criteria::pipeline());
}

#[test]
fn dataset_validator() {
    pass(criteria::dataset_validator());
}
