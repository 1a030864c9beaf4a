//! Core data model and algorithms for a layered, lazy-install package manager.
//!
//! A monolithic meta-package is described by a [`PackageMap`]: a small
//! declarative database of sub-packages, their internal dependencies, the
//! third-party code they vendor (builtins) and the system libraries they
//! expect to find (externals). From a map and a [`Request`] the resolver
//! computes the minimal closure of packages to enable; the planner turns that
//! closure plus an [`InstallState`] into layered, incremental [`BuildPlan`]s.
//!
//! Everything here is pure and allocation-only, so the crate builds with
//! `#![no_std]`. File IO, locking, process execution and the CLI live in the
//! `layerpm` companion crate.

#![no_std]

extern crate alloc;

mod digest;
mod error;
mod graph;
pub mod pkgmap;
pub mod planner;
pub mod resolver;
pub mod state;

pub use digest::sha256_hex;
pub use error::Error;
pub use pkgmap::{
    canonical_serialize, parse_map, parse_map_bytes, validate_map, Code, Diagnostic, PackageDecl,
    PackageKind, PackageMap, Severity,
};
pub use planner::{affected, package_hash, plan, plan_with, serialize_plan, BuildPlan, Reason};
pub use resolver::{
    export_dot, resolve, resolve_with_lock, topo_order, why, ExternalResolution, ExternalSource,
    Policy, Request, ResolutionReport, SystemProbe, WhyPaths,
};
pub use state::{InstallState, LockEntry, LockedSource, Lockfile, StateEntry};
