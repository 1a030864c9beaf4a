use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{is_identifier, is_library_name, Code, Diagnostic, PackageKind, PackageMap};
use crate::graph::DepGraph;

/// Checks every map invariant. An empty result means the map is valid:
/// names are well formed, every dep target exists and the dependency
/// relation is acyclic.
///
/// Each cyclic strongly connected component yields one `E_CYCLE`, naming a
/// shortest cycle through its lexicographically smallest member.
pub fn validate_map(map: &PackageMap) -> Vec<Diagnostic> {
    let mut diags = Vec::new();

    for decl in map.iter() {
        let line = decl.line;
        if !is_identifier(&decl.name) {
            diags.push(Diagnostic::error(
                Code::Syntax,
                format!("malformed package name `{}`", decl.name),
                line,
            ));
        }
        if decl.kind == PackageKind::Core && !decl.default {
            diags.push(Diagnostic::error(
                Code::Invalid,
                format!("core package `{}` cannot be `default: off`", decl.name),
                line,
            ));
        }
        if decl.libraries.iter().any(|l| !is_library_name(l)) {
            diags.push(Diagnostic::error(
                Code::Syntax,
                format!("package `{}` has a malformed library name", decl.name),
                line,
            ));
        }
        let mut libs: Vec<&String> = decl.libraries.iter().collect();
        libs.sort();
        if libs.windows(2).any(|w| w[0] == w[1]) {
            diags.push(Diagnostic::error(
                Code::Dup,
                format!("package `{}` lists a library twice", decl.name),
                line,
            ));
        }
        let bad_ident = decl
            .deps
            .iter()
            .chain(&decl.builtins)
            .chain(&decl.externals)
            .find(|n| !is_identifier(n));
        if let Some(bad) = bad_ident {
            diags.push(Diagnostic::error(
                Code::Syntax,
                format!("malformed identifier `{bad}` in package `{}`", decl.name),
                line,
            ));
        }
        if decl.deps.contains(&decl.name) {
            diags.push(Diagnostic::error(
                Code::SelfDep,
                format!("package `{}` depends on itself", decl.name),
                line,
            ));
        }
        for dep in decl.deps.iter().filter(|d| !map.contains(d)) {
            diags.push(Diagnostic::error(
                Code::UnknownDep,
                format!("package `{}` depends on unknown package `{dep}`", decl.name),
                line,
            ));
        }
    }

    let graph = DepGraph::new(map.names(), map.edges());
    for component in graph.cyclic_components() {
        let cycle = graph.cycle_in(&component);
        let line = map.get(cycle[0]).map_or(0, |d| d.line);
        diags.push(Diagnostic::error(
            Code::Cycle,
            format!("dependency cycle: {}", cycle.join(" -> ")),
            line,
        ));
    }
    diags
}
