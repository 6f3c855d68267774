//! Benchmark problems, experiment runner, timing and validation suites.

mod experiment;
mod problems;
mod speed;
mod suites;

pub use experiment::*;
pub use problems::*;
pub use speed::*;
pub use suites::*;
