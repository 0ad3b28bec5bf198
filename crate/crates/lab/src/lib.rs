//! Experiment harness for `rbnlab-core`: TOML configuration, a thread-pool
//! executor, the verification suites, CSV/JSON/raw file formats and the
//! `rbnlab` command line.
//!
//! [`harness::run`] executes one experiment kind and writes its artifacts
//! plus a self-contained `report.json`; [`harness::sweep`] repeats it along
//! one parameter axis.

pub mod config;
pub mod error;
pub mod exec;
pub mod harness;
pub mod io;
pub mod report;
pub mod suites;

pub use config::{ExperimentConfig, Kind};
pub use error::{HarnessError, Result};
pub use harness::{run, run_suites, sweep, Suite};
pub use report::{Check, ExperimentReport};
