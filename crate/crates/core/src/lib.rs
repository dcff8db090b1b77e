//! Augmented LP modeling: turns LP word problems into a tagged intermediate
//! representation (IR), a canonical `a·x <= b` table, and solved solutions.
//!
//! The crate is pure: no I/O beyond the corpus loader, no threads, no clocks.
//! Everything compiles to `wasm32-unknown-unknown`.

pub mod canonical;
pub mod copy_mix;
pub mod dataset;
pub mod evaluator;
pub mod ir;
pub mod lexicon;
pub mod number;
pub mod session;
pub mod solver;
pub mod suggest;

pub use canonical::{canonicalize, to_solver_form, CanonicalForm, CanonicalRow};
pub use ir::{parse_ir, print_ir, Declaration, IrDocument};
pub use number::{normalize_number, NumberContext, Rational};
pub use solver::{check_feasible, check_point, solve, LpSolution, SolveStatus};
