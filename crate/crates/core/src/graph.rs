//! Small deterministic graph kernels shared by the validator, resolver and
//! planner. Nodes are package names; an edge `(p, d)` means `p` depends on `d`.
//! All iteration goes through ordered collections so results never depend on
//! hashing or insertion order.

use alloc::collections::{BTreeSet, BinaryHeap, VecDeque};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;

/// Nodes are stored sorted, so comparing indices is comparing names.
pub(crate) struct DepGraph<'a> {
    nodes: Vec<&'a str>,
    deps: Vec<Vec<usize>>,
    rev: Vec<Vec<usize>>,
}

impl<'a> DepGraph<'a> {
    /// Edges touching a node outside `nodes` are dropped.
    pub fn new<N, E>(nodes: N, edges: E) -> Self
    where
        N: IntoIterator<Item = &'a str>,
        E: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut nodes: Vec<&str> = nodes.into_iter().collect();
        nodes.sort_unstable();
        nodes.dedup();
        let mut deps = vec![Vec::new(); nodes.len()];
        // Edge lists usually arrive grouped by source; remember the last one.
        let mut last: Option<(&str, Option<usize>)> = None;
        for (from, to) in edges {
            let f = match last {
                Some((name, idx)) if name == from => idx,
                _ => {
                    let idx = nodes.binary_search(&from).ok();
                    last = Some((from, idx));
                    idx
                }
            };
            if let (Some(f), Ok(t)) = (f, nodes.binary_search(&to)) {
                deps[f].push(t);
            }
        }
        let mut rev = vec![Vec::new(); nodes.len()];
        for (f, out) in deps.iter_mut().enumerate() {
            out.sort_unstable();
            out.dedup();
            for &t in out.iter() {
                rev[t].push(f);
            }
        }
        DepGraph { nodes, deps, rev }
    }

    pub fn index(&self, node: &str) -> Option<usize> {
        self.nodes.binary_search(&node).ok()
    }

    pub fn name(&self, i: usize) -> &'a str {
        self.nodes[i]
    }

    /// Dependencies of node `i`, ascending.
    pub fn deps_idx(&self, i: usize) -> &[usize] {
        &self.deps[i]
    }

    /// Kahn's algorithm, smallest ready name first.
    pub fn topo_order(&self) -> Result<Vec<&'a str>, Vec<&'a str>> {
        let mut pending: Vec<usize> = self.deps.iter().map(Vec::len).collect();
        let mut ready: BinaryHeap<Reverse<usize>> = pending
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == 0)
            .map(|(i, _)| Reverse(i))
            .collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(Reverse(node)) = ready.pop() {
            order.push(self.nodes[node]);
            for &dependent in &self.rev[node] {
                pending[dependent] -= 1;
                if pending[dependent] == 0 {
                    ready.push(Reverse(dependent));
                }
            }
        }
        if order.len() == self.nodes.len() {
            Ok(order)
        } else {
            Err(self.some_cycle().unwrap_or_default())
        }
    }

    /// Kahn layering: every layer is the full set of nodes whose deps all sit
    /// in earlier layers. Layers are sorted by name.
    pub fn layers(&self) -> Result<Vec<Vec<&'a str>>, Vec<&'a str>> {
        let mut pending: Vec<usize> = self.deps.iter().map(Vec::len).collect();
        let mut current: Vec<usize> = (0..self.nodes.len()).filter(|&i| pending[i] == 0).collect();
        let mut layers = Vec::new();
        let mut placed = 0;
        while !current.is_empty() {
            let mut next = Vec::new();
            for &node in &current {
                for &dependent in &self.rev[node] {
                    pending[dependent] -= 1;
                    if pending[dependent] == 0 {
                        next.push(dependent);
                    }
                }
            }
            next.sort_unstable();
            placed += current.len();
            layers.push(current.iter().map(|&i| self.nodes[i]).collect());
            current = next;
        }
        if placed == self.nodes.len() {
            Ok(layers)
        } else {
            Err(self.some_cycle().unwrap_or_default())
        }
    }

    /// Strongly connected components that contain a cycle (size > 1, or a
    /// self loop), each sorted, listed by smallest member.
    pub fn cyclic_components(&self) -> Vec<Vec<&'a str>> {
        let nodes = &self.nodes;
        let adj = &self.deps;

        // Iterative Tarjan.
        const UNSEEN: usize = usize::MAX;
        let n = nodes.len();
        let mut index = vec![UNSEEN; n];
        let mut low = vec![0; n];
        let mut on_stack = vec![false; n];
        let mut stack = Vec::new();
        let mut next_index = 0;
        let mut out = Vec::new();

        for root in 0..n {
            if index[root] != UNSEEN {
                continue;
            }
            let mut call: Vec<(usize, usize)> = vec![(root, 0)];
            index[root] = next_index;
            low[root] = next_index;
            next_index += 1;
            stack.push(root);
            on_stack[root] = true;

            while let Some(&mut (v, ref mut edge)) = call.last_mut() {
                if *edge < adj[v].len() {
                    let w = adj[v][*edge];
                    *edge += 1;
                    if index[w] == UNSEEN {
                        index[w] = next_index;
                        low[w] = next_index;
                        next_index += 1;
                        stack.push(w);
                        on_stack[w] = true;
                        call.push((w, 0));
                    } else if on_stack[w] {
                        low[v] = low[v].min(index[w]);
                    }
                    continue;
                }
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut component = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w] = false;
                        component.push(nodes[w]);
                        if w == v {
                            break;
                        }
                    }
                    let self_loop = component.len() == 1 && adj[v].contains(&v);
                    if component.len() > 1 || self_loop {
                        component.sort_unstable();
                        out.push(component);
                    }
                }
            }
        }
        out.sort();
        out
    }

    /// Shortest cycle through the smallest member of `component`, returned
    /// closed (first node repeated at the end). Neighbours are explored in
    /// name order, so the choice among equally short cycles is stable.
    pub fn cycle_in(&self, component: &[&'a str]) -> Vec<&'a str> {
        let mut member = vec![false; self.nodes.len()];
        for n in component {
            if let Some(i) = self.index(n) {
                member[i] = true;
            }
        }
        let start = self.index(component[0]).expect("component member is a node");
        const NONE: usize = usize::MAX;
        let mut parent = vec![NONE; self.nodes.len()];
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &w in &self.deps[v] {
                if !member[w] {
                    continue;
                }
                if w == start {
                    let mut path = vec![self.nodes[start]];
                    let mut cur = v;
                    while cur != start {
                        path.push(self.nodes[cur]);
                        cur = parent[cur];
                    }
                    path.push(self.nodes[start]);
                    let end = path.len() - 1;
                    path[1..end].reverse();
                    return path;
                }
                if parent[w] == NONE {
                    parent[w] = v;
                    queue.push_back(w);
                }
            }
        }
        vec![self.nodes[start], self.nodes[start]]
    }

    pub fn some_cycle(&self) -> Option<Vec<&'a str>> {
        self.cyclic_components()
            .first()
            .map(|component| self.cycle_in(component))
    }

    /// Node indices reachable from `roots` following dependencies
    /// (`upward == false`) or dependents (`upward == true`), roots included.
    pub fn reach_idx(&self, roots: impl IntoIterator<Item = usize>, upward: bool) -> Vec<bool> {
        let adjacency = if upward { &self.rev } else { &self.deps };
        let mut seen = vec![false; self.nodes.len()];
        let mut todo: Vec<usize> = roots.into_iter().collect();
        while let Some(n) = todo.pop() {
            if !seen[n] {
                seen[n] = true;
                todo.extend(adjacency[n].iter().copied().filter(|&m| !seen[m]));
            }
        }
        seen
    }

    /// Names reachable from `roots`; unknown roots are ignored.
    pub fn reach<I>(&self, roots: I, upward: bool) -> BTreeSet<&'a str>
    where
        I: IntoIterator,
        I::Item: AsRef<str>,
    {
        let roots: Vec<usize> = roots
            .into_iter()
            .filter_map(|r| self.index(r.as_ref()))
            .collect();
        self.reach_idx(roots, upward)
            .iter()
            .enumerate()
            .filter(|(_, &s)| s)
            .map(|(i, _)| self.nodes[i])
            .collect()
    }
}
