//! Incremental, layered build plans.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use sha2::{Digest, Sha256};

use crate::digest::{hex_of, sha256_hex};
use crate::graph::DepGraph;
use crate::pkgmap::{PackageDecl, PackageMap};
use crate::resolver::ResolutionReport;
use crate::state::InstallState;
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Reason {
    /// Never built.
    New,
    /// Built, but its declaration hash changed.
    Invalidated,
    /// Up to date itself, but depends on something being rebuilt.
    Dependent,
}

impl Reason {
    pub fn as_str(self) -> &'static str {
        match self {
            Reason::New => "new",
            Reason::Invalidated => "invalidated",
            Reason::Dependent => "dependent",
        }
    }
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuildPlan {
    /// Antichains in build order, each sorted by name.
    pub layers: Vec<Vec<String>>,
    pub reasons: BTreeMap<String, Reason>,
    /// Hash each planned package is recorded under once built.
    pub hashes: BTreeMap<String, String>,
    pub plan_digest: String,
}

impl BuildPlan {
    pub fn empty() -> Self {
        BuildPlan {
            layers: Vec::new(),
            reasons: BTreeMap::new(),
            hashes: BTreeMap::new(),
            plan_digest: sha256_hex(b""),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn len(&self) -> usize {
        self.reasons.len()
    }

    /// Packages in serialization order.
    pub fn packages(&self) -> impl Iterator<Item = &str> {
        self.layers.iter().flatten().map(String::as_str)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.reasons.contains_key(name)
    }
}

/// Content hash of one declaration: SHA-256 over its canonical block
/// followed by `extra` (runner-supplied inputs, usually empty).
pub fn package_hash(decl: &PackageDecl, extra: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(decl.canonical_block().as_bytes());
    h.update(extra);
    hex_of(&h.finalize())
}

/// Plans the minimal rebuild for `report` on top of `state`.
pub fn plan(
    map: &PackageMap,
    report: &ResolutionReport,
    state: &InstallState,
) -> Result<BuildPlan, Error> {
    plan_with(map, report, state, |_| Vec::new())
}

/// [`plan`] with an extra-input hook mixed into every package hash.
///
/// Planned set: enabled packages that are unbuilt (`new`) or whose recorded
/// hash differs from the current one (`invalidated`), plus every enabled
/// package downstream of those (`dependent`). `invalidated` wins over
/// `dependent` when both apply.
pub fn plan_with<F>(
    map: &PackageMap,
    report: &ResolutionReport,
    state: &InstallState,
    extra: F,
) -> Result<BuildPlan, Error>
where
    F: Fn(&PackageDecl) -> Vec<u8>,
{
    if !state.verify() {
        return Err(Error::StateCorrupt {
            file: "state.txt",
            line: 0,
            reason: "in-memory state digest does not match its entries".into(),
        });
    }

    let mut hashes = BTreeMap::new();
    let mut reasons: BTreeMap<String, Reason> = BTreeMap::new();
    for name in &report.enabled {
        let decl = map.get(name).ok_or_else(|| Error::UnknownPackage {
            name: name.clone(),
        })?;
        let current = package_hash(decl, &extra(decl));
        match state.get(name) {
            None => {
                reasons.insert(name.clone(), Reason::New);
            }
            Some(entry) if entry.hash != current => {
                reasons.insert(name.clone(), Reason::Invalidated);
            }
            Some(_) => {}
        }
        hashes.insert(name.clone(), current);
    }

    let graph = DepGraph::new(
        report.enabled.iter().map(String::as_str),
        report.edges.iter().map(|(a, b)| (a.as_str(), b.as_str())),
    );
    let downstream: Vec<String> = graph
        .reach(reasons.keys(), true)
        .into_iter()
        .map(ToString::to_string)
        .collect();
    for name in downstream {
        reasons.entry(name).or_insert(Reason::Dependent);
    }

    hashes.retain(|name, _| reasons.contains_key(name));
    let sub = DepGraph::new(
        reasons.keys().map(String::as_str),
        report.edges.iter().map(|(a, b)| (a.as_str(), b.as_str())),
    );
    let layers = sub.layers().map_err(|cycle| Error::Cycle {
        path: cycle.into_iter().map(ToString::to_string).collect(),
    })?;
    let layers: Vec<Vec<String>> = layers
        .into_iter()
        .map(|l| l.into_iter().map(ToString::to_string).collect())
        .collect();

    let mut plan = BuildPlan {
        layers,
        reasons,
        hashes,
        plan_digest: String::new(),
    };
    plan.plan_digest = sha256_hex(serialize_plan(&plan).as_bytes());
    Ok(plan)
}

/// One `LAYER<TAB>NAME<TAB>REASON` line per planned package.
pub fn serialize_plan(plan: &BuildPlan) -> String {
    let mut out = String::new();
    for (i, layer) in plan.layers.iter().enumerate() {
        for name in layer {
            let reason = plan.reasons.get(name).map_or("?", |r| r.as_str());
            out.push_str(&alloc::format!("{i}\t{name}\t{reason}\n"));
        }
    }
    out
}

/// `changed` plus everything that transitively depends on it.
pub fn affected(map: &PackageMap, changed: &BTreeSet<String>) -> Result<BTreeSet<String>, Error> {
    if let Some(name) = changed.iter().find(|n| !map.contains(n)) {
        return Err(Error::UnknownPackage { name: name.clone() });
    }
    let graph = DepGraph::new(map.names(), map.edges());
    Ok(graph
        .reach(changed, true)
        .into_iter()
        .map(ToString::to_string)
        .collect())
}
