mod common;

use std::collections::BTreeSet;

use common::{desk, map_of, random_dag, set, RawGraph};
use layerpm_core::{
    export_dot, parse_map, resolve, topo_order, why, ExternalSource, PackageMap, Policy, Request,
    SystemProbe,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn probe_with_gsl() -> SystemProbe {
    let mut p = SystemProbe::new();
    p.insert("gsl", "pkg-config gsl 2.7");
    p
}

fn resolve_desk(enable: &[&str]) -> layerpm_core::ResolutionReport {
    resolve(&desk(), &Request::enable(enable.iter().copied()), &probe_with_gsl(), Policy::SystemFirst)
        .unwrap()
}

/// Every ordering of `nodes` that respects `edges`, by brute force.
fn all_topological_orders(nodes: &BTreeSet<String>, edges: &BTreeSet<(String, String)>) -> Vec<Vec<String>> {
    fn permute(rest: &mut Vec<String>, cur: &mut Vec<String>, out: &mut Vec<Vec<String>>) {
        if rest.is_empty() {
            out.push(cur.clone());
            return;
        }
        for i in 0..rest.len() {
            let x = rest.remove(i);
            cur.push(x.clone());
            permute(rest, cur, out);
            cur.pop();
            rest.insert(i, x);
        }
    }
    let mut all = Vec::new();
    permute(&mut nodes.iter().cloned().collect(), &mut Vec::new(), &mut all);
    all.into_iter()
        .filter(|order| {
            edges.iter().all(|(p, d)| {
                let ip = order.iter().position(|x| x == p).unwrap();
                let id = order.iter().position(|x| x == d).unwrap();
                id < ip
            })
        })
        .collect()
}

#[test]
fn layering_chain() {
    let r = resolve_desk(&["mathmore"]);
    assert_eq!(r.enabled, set(&["core", "mathcore", "mathmore"]));
    assert_eq!(r.order, ["core", "mathcore", "mathmore"]);
    assert_eq!(r.externals["gsl"].source, ExternalSource::System);
    assert_eq!(r.externals["gsl"].provenance, "pkg-config gsl 2.7");
}

#[test]
fn tmva_enables_only_its_closure() {
    let map = desk();
    let r = resolve_desk(&["tmva"]);
    let oracle = RawGraph::from_map(&map).reachable_from(&set(&["tmva", "core"]));
    assert_eq!(r.enabled, oracle);
    assert_eq!(r.enabled, set(&["core", "io", "mathcore", "tmva"]));
    assert!(!r.enabled.contains("graf") && !r.enabled.contains("mathmore"));
}

#[test]
fn empty_request_is_core_only() {
    let r = resolve_desk(&[]);
    assert_eq!(r.enabled, set(&["core"]));
    assert_eq!(r.order, ["core"]);
    assert_eq!(r.requested, set(&["core"]));
}

#[test]
fn defaults_exclude_default_off_packages() {
    let req = Request::enable(["tmva"]).with_defaults(true);
    let r = resolve(&desk(), &req, &SystemProbe::new(), Policy::SystemFirst).unwrap();
    assert_eq!(r.enabled, set(&["core", "io", "mathcore", "tmva"]));
}

#[test]
fn missing_external_keeps_report() {
    let err = resolve(&desk(), &Request::enable(["mathmore"]), &SystemProbe::new(), Policy::SystemFirst)
        .unwrap_err();
    assert_eq!(err.code(), "E_MISSING_EXTERNAL");
    let layerpm_core::Error::MissingExternal { missing, report } = err else { unreachable!() };
    assert_eq!(missing, ["gsl"]);
    assert_eq!(report.externals["gsl"].source, ExternalSource::Missing);
    assert!(!report.enabled.contains("io"));
}

#[test]
fn policies_over_probe_and_builtins() {
    let text = format!(
        "{}\npackage gslsrc {{\n  builtins: gsl\n}}\n",
        common::DESK
    );
    let map = parse_map(&text).unwrap();
    let req = Request::enable(["mathmore", "gslsrc"]);
    let cases = [
        (Policy::SystemFirst, true, ExternalSource::System),
        (Policy::SystemFirst, false, ExternalSource::Builtin),
        (Policy::BuiltinFirst, true, ExternalSource::Builtin),
        (Policy::BuiltinFirst, false, ExternalSource::Builtin),
        (Policy::SystemOnly, true, ExternalSource::System),
    ];
    for (policy, has_gsl, expected) in cases {
        let probe = if has_gsl { probe_with_gsl() } else { SystemProbe::new() };
        let r = resolve(&map, &req, &probe, policy).unwrap();
        assert_eq!(r.externals["gsl"].source, expected, "{policy} {has_gsl}");
        if expected == ExternalSource::Builtin {
            assert_eq!(r.externals["gsl"].provenance, "gslsrc");
        }
    }
    let err = resolve(&map, &req, &SystemProbe::new(), Policy::SystemOnly).unwrap_err();
    assert_eq!(err.code(), "E_MISSING_EXTERNAL");

    // A vendoring package that is not enabled cannot provide the builtin.
    let err = resolve(&map, &Request::enable(["mathmore"]), &SystemProbe::new(), Policy::BuiltinFirst)
        .unwrap_err();
    assert_eq!(err.code(), "E_MISSING_EXTERNAL");
}

#[test]
fn request_errors() {
    let map = desk();
    let probe = probe_with_gsl();
    let err = resolve(&map, &Request::enable(["nosuch"]), &probe, Policy::SystemFirst).unwrap_err();
    assert_eq!(err.code(), "E_UNKNOWN_PKG");

    let req = Request::enable(["tmva"]).disabling(["io"]);
    let err = resolve(&map, &req, &probe, Policy::SystemFirst).unwrap_err();
    assert_eq!(err.code(), "E_DISABLED_REQUIRED");
    assert_eq!(err.to_string(), "package `io` is disabled but required: tmva -> io");

    let req = Request::enable(["tmva"]).disabling(["tmva"]);
    assert_eq!(resolve(&map, &req, &probe, Policy::SystemFirst).unwrap_err().code(), "E_DISABLED_REQUIRED");
}

#[test]
fn topo_order_examples() {
    let edges: BTreeSet<(String, String)> = [("io", "core"), ("mathcore", "core")]
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
    let nodes = set(&["core", "io", "mathcore"]);
    let valid = all_topological_orders(&nodes, &edges);
    assert_eq!(valid.len(), 2);
    assert_eq!(topo_order(&nodes, &edges).unwrap(), *valid.iter().min().unwrap());
    assert_eq!(topo_order(&nodes, &edges).unwrap(), ["core", "io", "mathcore"]);
    assert_eq!(topo_order(&set(&["core"]), &BTreeSet::new()).unwrap(), ["core"]);

    let r = resolve_desk(&["tmva", "mathmore", "graf"]);
    let valid = all_topological_orders(&r.enabled, &r.edges);
    let greedy = valid.iter().min().unwrap();
    assert_eq!(&r.order, greedy);
    assert_eq!(r.order, ["core", "graf", "io", "mathcore", "mathmore", "tmva"]);
}

#[test]
fn topo_order_rejects_cycles() {
    let edges: BTreeSet<(String, String)> = [("a", "b"), ("b", "a")]
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
    let err = topo_order(&set(&["a", "b"]), &edges).unwrap_err();
    assert_eq!(err.code(), "E_CYCLE");
    assert_eq!(err.to_string(), "dependency cycle: a -> b -> a");
}

/// Exhaustive simple paths from `from` to `to` over the map's dep edges.
fn oracle_paths(map: &PackageMap, from: &str, to: &str) -> Vec<Vec<String>> {
    fn go(map: &PackageMap, node: &str, to: &str, path: &mut Vec<String>, out: &mut Vec<Vec<String>>) {
        path.push(node.to_string());
        if node == to {
            out.push(path.clone());
        } else {
            for d in &map.get(node).unwrap().deps {
                if !path.contains(d) {
                    go(map, d, to, path, out);
                }
            }
        }
        path.pop();
    }
    let mut out = Vec::new();
    go(map, from, to, &mut Vec::new(), &mut out);
    out
}

#[test]
fn why_examples() {
    let map = desk();
    let r = resolve_desk(&["tmva"]);
    let paths = why(&r, "core").unwrap();
    let mut expected = oracle_paths(&map, "tmva", "core");
    expected.sort();
    assert_eq!(paths.paths, expected);
    assert_eq!(
        paths.paths,
        [vec!["tmva", "io", "core"], vec!["tmva", "mathcore", "core"]]
    );
    assert!(!paths.truncated);

    let r = resolve_desk(&["core"]);
    assert_eq!(why(&r, "core").unwrap().paths, [vec!["core"]]);

    let r = resolve_desk(&["tmva"]);
    assert_eq!(why(&r, "graf").unwrap_err().code(), "E_NOT_ENABLED");
}

#[test]
fn why_truncates_on_path_explosion() {
    // Ladder of diamonds: 2^12 paths from top to bottom.
    let mut text = String::from("package n0 { kind: core }\n");
    for i in 1..=12 {
        let prev = format!("n{}", i - 1);
        text.push_str(&format!("package a{i} {{ deps: {prev} }}\npackage b{i} {{ deps: {prev} }}\n"));
        text.push_str(&format!("package n{i} {{ deps: a{i}, b{i} }}\n"));
    }
    let map = parse_map(&text).unwrap();
    let r = resolve(&map, &Request::enable(["n12"]), &SystemProbe::new(), Policy::SystemFirst).unwrap();
    let paths = why(&r, "n0").unwrap();
    assert!(paths.truncated);
    assert_eq!(paths.paths.len(), 1000);
}

#[test]
fn dot_examples() {
    assert_eq!(export_dot(&Default::default()), "digraph packages {\n}\n");

    let r = resolve_desk(&["mathmore"]);
    assert_eq!(
        export_dot(&r),
        "digraph packages {\n  \"core\" [style=bold];\n  \"mathcore\";\n  \"mathmore\" [style=bold];\n  \
         \"mathcore\" -> \"core\";\n  \"mathmore\" -> \"mathcore\";\n}\n"
    );

    let r = resolve_desk(&["tmva"]);
    let dot = export_dot(&r);
    let nodes = dot.lines().filter(|l| l.ends_with(';') && !l.contains("->")).count();
    let edges = dot.lines().filter(|l| l.contains("->")).count();
    let oracle_edges: usize = r.enabled.iter().map(|n| desk().get(n).unwrap().deps.len()).sum();
    assert_eq!((nodes, edges), (4, oracle_edges));
    assert_eq!(edges, 4);
    assert!(dot.contains("\"tmva\" [style=bold];"));
}

fn random_case(seed: u64) -> (RawGraph, PackageMap, BTreeSet<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=50);
    let density = rng.gen_range(0.0..=0.3);
    let graph = random_dag(&mut rng, n, density);
    let cores: BTreeSet<usize> = (0..n).filter(|_| rng.gen_bool(0.05)).collect();
    let map = map_of(&graph, &cores);
    let requested: BTreeSet<String> = graph
        .names
        .iter()
        .filter(|_| rng.gen_bool(0.1))
        .cloned()
        .collect();
    (graph, map, requested)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn closure_is_sound_complete_and_minimal(seed in any::<u64>()) {
        let (graph, map, enable) = random_case(seed);
        let r = resolve(&map, &Request { enable: enable.clone(), ..Default::default() }, &SystemProbe::new(), Policy::SystemFirst).unwrap();
        let mut roots = enable.clone();
        roots.extend(map.iter().filter(|d| d.kind == layerpm_core::PackageKind::Core).map(|d| d.name.clone()));
        prop_assert_eq!(&r.requested, &roots);
        prop_assert_eq!(&r.enabled, &graph.reachable_from(&roots));

        // Minimality: dropping any non-requested member breaks dep completeness.
        for victim in r.enabled.difference(&r.requested) {
            let rest: BTreeSet<&String> = r.enabled.iter().filter(|n| *n != victim).collect();
            let complete = rest.iter().all(|p| map.get(p).unwrap().deps.iter().all(|d| rest.contains(d)));
            prop_assert!(!complete, "{} removable", victim);
        }

        // Order validity.
        prop_assert_eq!(r.order.len(), r.enabled.len());
        for (p, d) in &r.edges {
            let ip = r.order.iter().position(|x| x == p).unwrap();
            let id = r.order.iter().position(|x| x == d).unwrap();
            prop_assert!(id < ip);
        }

        // Determinism.
        let again = resolve(&map, &Request { enable, ..Default::default() }, &SystemProbe::new(), Policy::SystemFirst).unwrap();
        prop_assert_eq!(r.to_text(), again.to_text());
    }

    #[test]
    fn disables_outside_closure_change_nothing(seed in any::<u64>()) {
        let (_, map, enable) = random_case(seed);
        let base = Request { enable: enable.clone(), ..Default::default() };
        let r = resolve(&map, &base, &SystemProbe::new(), Policy::SystemFirst).unwrap();
        let outside: BTreeSet<String> = map.names().filter(|n| !r.enabled.contains(*n)).map(str::to_string).collect();
        let with_disable = Request { disable: outside, ..base };
        let r2 = resolve(&map, &with_disable, &SystemProbe::new(), Policy::SystemFirst).unwrap();
        prop_assert_eq!(r.to_text(), r2.to_text());
    }

    #[test]
    fn probe_growth_only_changes_external_sources(extra in prop::collection::btree_set("[a-z]{1,4}", 0..6)) {
        let text = format!("{}\npackage gslsrc {{\n  builtins: gsl\n}}\n", common::DESK);
        let map = parse_map(&text).unwrap();
        let req = Request::enable(["mathmore", "tmva", "gslsrc"]);
        let small = SystemProbe::new();
        let mut big = probe_with_gsl();
        for e in &extra {
            big.insert(e.clone(), "probe");
        }
        for policy in [Policy::SystemFirst, Policy::BuiltinFirst] {
            let a = resolve(&map, &req, &small, policy).unwrap();
            let b = resolve(&map, &req, &big, policy).unwrap();
            prop_assert_eq!(&a.enabled, &b.enabled);
            prop_assert_eq!(&a.order, &b.order);
            prop_assert_eq!(&a.edges, &b.edges);
        }
    }
}
