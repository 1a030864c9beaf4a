//! IO side of the layered package manager: the on-disk store, the parallel
//! executor and its runners, and the `layerpm` command line.
//!
//! The algorithms themselves live in [`layerpm_core`], re-exported here as
//! [`core`].

pub use layerpm_core as core;

pub mod cli;
mod error;
pub mod executor;
pub mod runner;
pub mod store;

pub use error::Error;
pub use executor::{dry_run, execute, execute_locked, ExecuteOptions, ExecutionReport, Outcome, PackageOutcome};
pub use runner::{Job, RunOutput, Runner, ShellRunner};
pub use store::{Store, StoreLock};
