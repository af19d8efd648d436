//! Harness library behind the `wisd` binary: global planning, evaluation
//! metrics, report rendering, and the subcommand implementations.

pub mod cmd;
pub mod metrics;
pub mod plan;
pub mod report;
