//! Satisfiability for Łukasiewicz, Product and Gödel propositional fuzzy
//! logics.
//!
//! Clause sets `l <= phi <= u` are translated into mixed-integer bilinear
//! feasibility problems and decided by a certified interval
//! branch-and-prune search. Every SAT answer carries a model that was
//! re-verified — exactly over the rationals when possible, within a residual
//! tolerance otherwise — and UNSAT is only reported after a rigorous
//! interval refutation of the whole search space.
//!
//! The crate splits along the pipeline:
//!
//! - [`formula`]: AST, exact semantics, clause files and their parser.
//! - [`translate`]: the clause-set-to-MINLP translation and the
//!   constructive valuation extension.
//! - [`solver`]: the branch-and-prune search, certificates and backends.
//! - [`oracle`]: slow, trusted brute-force procedures for testing.
//! - [`interop`]: `.fmp` model files and the external-adapter protocol.
//! - [`bench`]: seeded instance generation and the CSV harness.
//! - [`cli`]: the `lpgsat` command-line tool.
//!
//! ```
//! use lpgsat::formula::parse;
//! use lpgsat::solver::{solve, SolverConfig, Verdict};
//! use lpgsat::translate::build_problem;
//!
//! let set = parse("1 <= x |l !l x <= 1").unwrap();
//! let problem = build_problem(&set);
//! let report = solve(&problem, &set, &SolverConfig::default()).unwrap();
//! assert!(matches!(report.verdict, Verdict::Sat { .. }));
//! ```

pub mod bench;
pub mod cli;
pub mod formula;
pub mod interop;
pub mod oracle;
pub mod rat;
pub mod solver;
pub mod translate;

// The guide's code blocks double as doctests so the book can never drift
// from the API. `cargo test --doc` runs them.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            mod $name {}
        };
    }
    chapter!(ch01_overview, "../../../book/src/ch01-overview.md");
    chapter!(ch02_logics, "../../../book/src/ch02-three-logics.md");
    chapter!(ch03_clause_files, "../../../book/src/ch03-clause-files.md");
    chapter!(ch04_translation, "../../../book/src/ch04-translation.md");
    chapter!(ch05_solving, "../../../book/src/ch05-solving.md");
    chapter!(ch06_oracles, "../../../book/src/ch06-oracles.md");
    chapter!(ch07_model_files, "../../../book/src/ch07-model-files.md");
    chapter!(ch08_benchmarking, "../../../book/src/ch08-benchmarking.md");
    chapter!(ch09_cli, "../../../book/src/ch09-cli.md");
}
