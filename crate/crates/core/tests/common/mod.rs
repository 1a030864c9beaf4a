//! Test-only oracles. Nothing here calls into the crate's graph code.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use layerpm_core::{PackageDecl, PackageKind, PackageMap};
use rand::Rng;

pub const DESK: &str = include_str!("../data/desk.txt");

pub fn desk() -> PackageMap {
    layerpm_core::parse_map(DESK).expect("desk fixture parses")
}

pub fn set(names: &[&str]) -> BTreeSet<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Dep edges recovered by scanning manifest lines, no parser involved.
pub fn line_scan_edges(text: &str) -> BTreeSet<(String, String)> {
    let mut current = String::new();
    let mut edges = BTreeSet::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap().trim();
        if let Some(rest) = line.strip_prefix("package ") {
            current = rest.split_whitespace().next().unwrap().to_string();
        } else if let Some(rest) = line.strip_prefix("deps:") {
            for dep in rest.split(',').map(str::trim).filter(|d| !d.is_empty()) {
                edges.insert((current.clone(), dep.to_string()));
            }
        }
    }
    edges
}

/// Dense index graph: `deps[i]` lists the nodes `i` depends on.
#[derive(Debug, Clone)]
pub struct RawGraph {
    pub names: Vec<String>,
    pub deps: Vec<Vec<usize>>,
}

impl RawGraph {
    pub fn index(&self, name: &str) -> usize {
        self.names.iter().position(|n| n == name).unwrap()
    }

    /// Warshall transitive closure: `reach[i][j]` iff j is reachable from i
    /// along dep edges (reflexive).
    #[allow(clippy::needless_range_loop)]
    pub fn closure_matrix(&self) -> Vec<Vec<bool>> {
        let n = self.names.len();
        let mut reach = vec![vec![false; n]; n];
        for i in 0..n {
            reach[i][i] = true;
            for &d in &self.deps[i] {
                reach[i][d] = true;
            }
        }
        for k in 0..n {
            for i in 0..n {
                if reach[i][k] {
                    for j in 0..n {
                        if reach[k][j] {
                            reach[i][j] = true;
                        }
                    }
                }
            }
        }
        reach
    }

    pub fn reachable_from(&self, roots: &BTreeSet<String>) -> BTreeSet<String> {
        let m = self.closure_matrix();
        let mut out = BTreeSet::new();
        for r in roots {
            let i = self.index(r);
            for (j, &ok) in m[i].iter().enumerate() {
                if ok {
                    out.insert(self.names[j].clone());
                }
            }
        }
        out
    }

    /// Packages that can reach any of `changed` (reverse reachability).
    pub fn reverse_reachable(&self, changed: &BTreeSet<String>) -> BTreeSet<String> {
        let m = self.closure_matrix();
        let mut out = BTreeSet::new();
        for (i, row) in m.iter().enumerate() {
            if changed.iter().any(|c| row[self.index(c)]) {
                out.insert(self.names[i].clone());
            }
        }
        out
    }

    pub fn from_map(map: &PackageMap) -> Self {
        let names: Vec<String> = map.names().map(str::to_string).collect();
        let deps = map
            .iter()
            .map(|d| {
                d.deps
                    .iter()
                    .map(|x| names.iter().position(|n| n == x).unwrap())
                    .collect()
            })
            .collect();
        RawGraph { names, deps }
    }

    /// Every elementary cycle, each rotated to start at its smallest member,
    /// found by brute-force DFS from every start node.
    pub fn all_simple_cycles(&self) -> BTreeSet<Vec<String>> {
        let mut out = BTreeSet::new();
        let n = self.names.len();
        for start in 0..n {
            let mut stack = vec![start];
            self.cycles_from(start, &mut stack, &mut out);
        }
        out
    }

    fn cycles_from(&self, start: usize, stack: &mut Vec<usize>, out: &mut BTreeSet<Vec<String>>) {
        let v = *stack.last().unwrap();
        for &w in &self.deps[v] {
            if w == start {
                let mut cyc: Vec<String> = stack.iter().map(|&i| self.names[i].clone()).collect();
                let min = (0..cyc.len()).min_by_key(|&i| cyc[i].clone()).unwrap();
                cyc.rotate_left(min);
                let first = cyc[0].clone();
                cyc.push(first);
                out.insert(cyc);
            } else if !stack.contains(&w) {
                stack.push(w);
                self.cycles_from(start, stack, out);
                stack.pop();
            }
        }
    }
}

/// Random DAG over `n` nodes named `p000`...; node i may depend on any j < i
/// with probability `density`. Names are shuffled against the index order so
/// lexicographic order and topological order disagree.
pub fn random_dag<R: Rng>(rng: &mut R, n: usize, density: f64) -> RawGraph {
    let mut labels: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        labels.swap(i, j);
    }
    let names: Vec<String> = labels.iter().map(|l| format!("p{l:03}")).collect();
    let deps = (0..n)
        .map(|i| (0..i).filter(|_| rng.gen_bool(density)).collect())
        .collect();
    RawGraph { names, deps }
}

/// Turns a raw graph into a map; `core_nodes` become kind=core.
pub fn map_of(graph: &RawGraph, core_nodes: &BTreeSet<usize>) -> PackageMap {
    let decls = graph.names.iter().enumerate().map(|(i, name)| {
        let kind = if core_nodes.contains(&i) {
            PackageKind::Core
        } else {
            PackageKind::Feature
        };
        PackageDecl::new(name.clone(), kind)
            .with_deps(graph.deps[i].iter().map(|&d| graph.names[d].clone()))
    });
    PackageMap::from_decls(decls).unwrap()
}

pub fn edges_of(map: &PackageMap) -> BTreeMap<String, BTreeSet<String>> {
    map.iter().map(|d| (d.name.clone(), d.deps.clone())).collect()
}
