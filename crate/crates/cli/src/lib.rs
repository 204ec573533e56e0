//! Batch front end for `gaugeks-core`: problem-spec documents, a task
//! runner, seeded verification suites and JSONL run ledgers.

pub mod ledger;
pub mod runner;
pub mod spec;
pub mod suites;

pub use ledger::{Record, Status};
pub use runner::{run, RunOptions, RunOutcome};
pub use spec::{parse_spec, ProblemSpec, SpecError};
pub use suites::Suite;
