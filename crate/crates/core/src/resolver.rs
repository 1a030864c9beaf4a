//! Request resolution: closure, ordering, external dependency policy,
//! dependency explanations and DOT export.

use alloc::borrow::ToOwned;
use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::vec;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::graph::DepGraph;
use crate::pkgmap::{is_identifier, PackageKind, PackageMap};
use crate::state::{LockedSource, Lockfile};
use crate::Error;

/// Upper bound on the number of paths [`why`] enumerates.
pub const WHY_PATH_LIMIT: usize = 1000;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Request {
    pub enable: BTreeSet<String>,
    pub disable: BTreeSet<String>,
    pub include_defaults: bool,
}

impl Request {
    pub fn enable<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Request {
            enable: names.into_iter().map(Into::into).collect(),
            ..Request::default()
        }
    }

    pub fn with_defaults(mut self, include: bool) -> Self {
        self.include_defaults = include;
        self
    }

    pub fn disabling<I, S>(mut self, names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.disable.extend(names.into_iter().map(Into::into));
        self
    }
}

/// How an external dependency may be satisfied.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Policy {
    /// Probe the host first, then fall back to an enabled builtin.
    #[default]
    SystemFirst,
    BuiltinFirst,
    /// Never fall back to builtins.
    SystemOnly,
}

impl Policy {
    pub fn as_str(self) -> &'static str {
        match self {
            Policy::SystemFirst => "system_first",
            Policy::BuiltinFirst => "builtin_first",
            Policy::SystemOnly => "system_only",
        }
    }
}

impl FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "system_first" => Ok(Policy::SystemFirst),
            "builtin_first" => Ok(Policy::BuiltinFirst),
            "system_only" => Ok(Policy::SystemOnly),
            other => Err(format!(
                "unknown policy `{other}` (expected system_first, builtin_first or system_only)"
            )),
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ExternalSource {
    System,
    Builtin,
    Missing,
}

impl ExternalSource {
    pub fn as_str(self) -> &'static str {
        match self {
            ExternalSource::System => "system",
            ExternalSource::Builtin => "builtin",
            ExternalSource::Missing => "missing",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalResolution {
    pub name: String,
    pub source: ExternalSource,
    /// Probe entry text for `system`, providing package for `builtin`.
    pub provenance: String,
}

/// The set of externals the host system provides, with where each was found.
///
/// File format: one external per line, `NAME<TAB>provenance`. Blank lines and
/// lines starting with `#` are skipped; the provenance may be omitted.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SystemProbe {
    available: BTreeMap<String, String>,
}

impl SystemProbe {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self, Error> {
        let mut probe = SystemProbe::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, provenance) = line.split_once('\t').unwrap_or((line, ""));
            let name = name.trim();
            if !is_identifier(name) {
                return Err(Error::ProbeSyntax {
                    line: i + 1,
                    reason: format!("malformed external name `{name}`"),
                });
            }
            probe.insert(name, provenance.trim());
        }
        Ok(probe)
    }

    pub fn insert(&mut self, name: impl Into<String>, provenance: impl Into<String>) {
        self.available.insert(name.into(), provenance.into());
    }

    pub fn remove(&mut self, name: &str) -> Option<String> {
        self.available.remove(name)
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.available.get(name).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.available.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ResolutionReport {
    /// Explicit enables plus core packages plus defaults when asked for.
    pub requested: BTreeSet<String>,
    /// Transitive dependency closure of `requested`.
    pub enabled: BTreeSet<String>,
    /// Dependencies first; ties broken by name.
    pub order: Vec<String>,
    /// `(dependent, dependency)` pairs inside `enabled`.
    pub edges: BTreeSet<(String, String)>,
    pub externals: BTreeMap<String, ExternalResolution>,
}

impl ResolutionReport {
    /// Line-oriented canonical form used for `--porcelain` output.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for name in &self.requested {
            out.push_str(&format!("requested\t{name}\n"));
        }
        for name in &self.enabled {
            out.push_str(&format!("enabled\t{name}\n"));
        }
        for (i, name) in self.order.iter().enumerate() {
            out.push_str(&format!("order\t{i}\t{name}\n"));
        }
        for (from, to) in &self.edges {
            out.push_str(&format!("edge\t{from}\t{to}\n"));
        }
        for ext in self.externals.values() {
            out.push_str(&format!(
                "external\t{}\t{}\t{}\n",
                ext.name,
                ext.source.as_str(),
                ext.provenance
            ));
        }
        out
    }

    pub fn missing_externals(&self) -> Vec<String> {
        self.externals
            .values()
            .filter(|e| e.source == ExternalSource::Missing)
            .map(|e| e.name.clone())
            .collect()
    }
}

/// Resolves a request with fresh probing.
pub fn resolve(
    map: &PackageMap,
    req: &Request,
    probe: &SystemProbe,
    policy: Policy,
) -> Result<ResolutionReport, Error> {
    resolve_inner(map, req, probe, policy, None)
}

/// Like [`resolve`], but externals pinned in `lock` keep their locked source
/// as long as it is still satisfiable. A pin that no longer holds is an
/// `E_LOCK_CONFLICT`; unpinned externals are resolved by `policy`.
pub fn resolve_with_lock(
    map: &PackageMap,
    req: &Request,
    probe: &SystemProbe,
    policy: Policy,
    lock: &Lockfile,
) -> Result<ResolutionReport, Error> {
    resolve_inner(map, req, probe, policy, Some(lock))
}

fn resolve_inner(
    map: &PackageMap,
    req: &Request,
    probe: &SystemProbe,
    policy: Policy,
    lock: Option<&Lockfile>,
) -> Result<ResolutionReport, Error> {
    if let Some(name) = req.enable.iter().chain(&req.disable).find(|n| !map.contains(n)) {
        return Err(Error::UnknownPackage { name: name.clone() });
    }
    if let Some(name) = req.enable.intersection(&req.disable).next() {
        return Err(Error::DisabledRequired {
            name: name.clone(),
            path: Vec::from([name.clone()]),
        });
    }

    let mut requested: BTreeSet<String> = req.enable.clone();
    for decl in map.iter() {
        if decl.kind == PackageKind::Core || (req.include_defaults && decl.default) {
            requested.insert(decl.name.clone());
        }
    }

    // Breadth-first from the requested set, remembering how each package was
    // reached so a disable conflict can name the path.
    let mut parent: BTreeMap<&str, Option<&str>> = BTreeMap::new();
    let mut queue: VecDeque<&str> = VecDeque::new();
    for name in &requested {
        parent.insert(name.as_str(), None);
        queue.push_back(name.as_str());
    }
    while let Some(name) = queue.pop_front() {
        let Some(decl) = map.get(name) else { continue };
        for dep in &decl.deps {
            if !parent.contains_key(dep.as_str()) {
                parent.insert(dep.as_str(), Some(name));
                queue.push_back(dep.as_str());
            }
        }
    }

    if let Some(blocked) = req.disable.iter().find(|d| parent.contains_key(d.as_str())) {
        let mut path = Vec::from([blocked.clone()]);
        let mut cur = blocked.as_str();
        while let Some(Some(up)) = parent.get(cur) {
            path.push((*up).to_string());
            cur = up;
        }
        path.reverse();
        return Err(Error::DisabledRequired {
            name: blocked.clone(),
            path,
        });
    }

    let enabled: BTreeSet<String> = parent.keys().map(|n| (*n).to_string()).collect();
    let edges: BTreeSet<(String, String)> = enabled
        .iter()
        .filter_map(|n| map.get(n))
        .flat_map(|p| p.deps.iter().map(move |d| (p.name.clone(), d.clone())))
        .collect();
    let order = topo_order(&enabled, &edges)?;

    // builtin name -> smallest enabled package vendoring it
    let mut providers: BTreeMap<&str, &str> = BTreeMap::new();
    for decl in enabled.iter().filter_map(|n| map.get(n)) {
        for builtin in &decl.builtins {
            providers.entry(builtin.as_str()).or_insert(decl.name.as_str());
        }
    }

    let wanted: BTreeSet<&str> = enabled
        .iter()
        .filter_map(|n| map.get(n))
        .flat_map(|p| p.externals.iter().map(String::as_str))
        .collect();
    let mut externals = BTreeMap::new();
    for name in wanted {
        let pinned = lock.and_then(|l| l.get(name));
        let resolution = match pinned {
            Some(entry) => locked_resolution(name, entry, probe, &providers)?,
            None => fresh_resolution(name, probe, &providers, policy),
        };
        externals.insert(name.to_string(), resolution);
    }

    let report = ResolutionReport {
        requested,
        enabled,
        order,
        edges,
        externals,
    };
    let missing = report.missing_externals();
    if missing.is_empty() {
        Ok(report)
    } else {
        Err(Error::MissingExternal {
            missing,
            report: Box::new(report),
        })
    }
}

fn fresh_resolution(
    name: &str,
    probe: &SystemProbe,
    providers: &BTreeMap<&str, &str>,
    policy: Policy,
) -> ExternalResolution {
    let system = || probe.get(name).map(|p| (ExternalSource::System, p.to_owned()));
    let builtin = || {
        providers
            .get(name)
            .map(|p| (ExternalSource::Builtin, (*p).to_owned()))
    };
    let found = match policy {
        Policy::SystemFirst => system().or_else(builtin),
        Policy::BuiltinFirst => builtin().or_else(system),
        Policy::SystemOnly => system(),
    };
    let (source, provenance) = found.unwrap_or((ExternalSource::Missing, String::new()));
    ExternalResolution {
        name: name.to_owned(),
        source,
        provenance,
    }
}

fn locked_resolution(
    name: &str,
    entry: &crate::state::LockEntry,
    probe: &SystemProbe,
    providers: &BTreeMap<&str, &str>,
) -> Result<ExternalResolution, Error> {
    let conflict = |reason: &str| Error::LockConflict {
        name: name.to_owned(),
        locked: entry.source.as_str().to_owned(),
        reason: reason.to_owned(),
    };
    match entry.source {
        LockedSource::System => {
            if probe.get(name).is_none() {
                return Err(conflict("the system probe no longer provides it"));
            }
            Ok(ExternalResolution {
                name: name.to_owned(),
                source: ExternalSource::System,
                provenance: entry.provenance.clone(),
            })
        }
        LockedSource::Builtin => match providers.get(name) {
            Some(provider) => Ok(ExternalResolution {
                name: name.to_owned(),
                source: ExternalSource::Builtin,
                provenance: (*provider).to_owned(),
            }),
            None => Err(conflict("no enabled package vendors it")),
        },
    }
}

/// Dependency-respecting order of `enabled`: Kahn's algorithm taking the
/// lexicographically smallest ready package each step. Edges are
/// `(dependent, dependency)`; edges leaving `enabled` are ignored.
pub fn topo_order(
    enabled: &BTreeSet<String>,
    edges: &BTreeSet<(String, String)>,
) -> Result<Vec<String>, Error> {
    let graph = DepGraph::new(
        enabled.iter().map(String::as_str),
        edges.iter().map(|(a, b)| (a.as_str(), b.as_str())),
    );
    match graph.topo_order() {
        Ok(order) => Ok(order.into_iter().map(str::to_owned).collect()),
        Err(cycle) => Err(Error::Cycle {
            path: cycle.into_iter().map(str::to_owned).collect(),
        }),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WhyPaths {
    /// Each path starts at a requested package and ends at the target.
    pub paths: Vec<Vec<String>>,
    /// Set when enumeration stopped at [`WHY_PATH_LIMIT`].
    pub truncated: bool,
}

/// Explains why `target` is enabled: every simple dependency path from a
/// top-level requested package to `target`, sorted.
///
/// A requested package counts as top-level unless it is itself reachable
/// from another requested package; `core` pulled in by `tmva` is explained
/// through `tmva` rather than by its own implicit request.
pub fn why(report: &ResolutionReport, target: &str) -> Result<WhyPaths, Error> {
    if !report.enabled.contains(target) {
        return Err(Error::NotEnabled {
            name: target.to_owned(),
        });
    }
    let graph = DepGraph::new(
        report.enabled.iter().map(String::as_str),
        report.edges.iter().map(|(a, b)| (a.as_str(), b.as_str())),
    );
    let requested: Vec<usize> = report
        .requested
        .iter()
        .filter_map(|r| graph.index(r))
        .collect();
    let mut reached_from_other = vec![false; report.enabled.len()];
    for &r in &requested {
        let below = graph.reach_idx(graph.deps_idx(r).iter().copied(), false);
        for (i, hit) in below.into_iter().enumerate() {
            reached_from_other[i] |= hit && i != r;
        }
    }

    // Only walk through nodes that can still reach the target.
    let target = graph.index(target).expect("enabled package is a node");
    let useful = graph.reach_idx([target], true);

    let mut out = WhyPaths::default();
    let mut stack = Vec::new();
    let mut on_stack = vec![false; report.enabled.len()];
    for root in requested {
        if reached_from_other[root] || !useful[root] {
            continue;
        }
        let mut walker = Walk {
            graph: &graph,
            target,
            useful: &useful,
            stack: &mut stack,
            on_stack: &mut on_stack,
            out: &mut out,
        };
        walker.visit(root);
        if out.truncated {
            break;
        }
    }
    out.paths.sort();
    Ok(out)
}

struct Walk<'g, 'a> {
    graph: &'g DepGraph<'a>,
    target: usize,
    useful: &'g [bool],
    stack: &'g mut Vec<usize>,
    on_stack: &'g mut [bool],
    out: &'g mut WhyPaths,
}

impl Walk<'_, '_> {
    fn visit(&mut self, node: usize) {
        if self.out.paths.len() >= WHY_PATH_LIMIT {
            self.out.truncated = true;
            return;
        }
        self.stack.push(node);
        self.on_stack[node] = true;
        if node == self.target {
            let path = self.stack.iter().map(|&i| self.graph.name(i).to_owned()).collect();
            self.out.paths.push(path);
        } else {
            for &dep in self.graph.deps_idx(node) {
                if self.useful[dep] && !self.on_stack[dep] {
                    self.visit(dep);
                    if self.out.truncated {
                        break;
                    }
                }
            }
        }
        self.on_stack[node] = false;
        self.stack.pop();
    }
}

/// Graphviz DOT for the enabled subgraph. Edges point from dependent to
/// dependency; requested packages are drawn bold.
pub fn export_dot(report: &ResolutionReport) -> String {
    let mut out = String::from("digraph packages {\n");
    for name in &report.enabled {
        if report.requested.contains(name) {
            out.push_str(&format!("  \"{name}\" [style=bold];\n"));
        } else {
            out.push_str(&format!("  \"{name}\";\n"));
        }
    }
    for (from, to) in &report.edges {
        out.push_str(&format!("  \"{from}\" -> \"{to}\";\n"));
    }
    out.push_str("}\n");
    out
}
