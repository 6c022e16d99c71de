mod common;

use std::collections::{BTreeSet, HashMap};

use common::{brute_force_minimum, candidates, generated, is_one_minimal, load_fixture, FAMILIES};
use depkit::corpus::{Corpus, ItemKind};
use depkit::extract::{compare_methods, decompose, min_edges, minimize_all, minimize_env, trace_extract};
use depkit::generate::Family;
use depkit::graph::{kind_table, DepGraph};
use proptest::prelude::*;

fn edge_sets(edges: &[depkit::corpus::DepEdge]) -> HashMap<String, BTreeSet<String>> {
    let mut m: HashMap<String, BTreeSet<String>> = HashMap::new();
    for e in edges {
        m.entry(e.from.clone()).or_default().insert(e.to.clone());
    }
    m
}

fn check_corpus(c: &Corpus) {
    let trace = trace_extract(c, 1).unwrap();
    let traced = edge_sets(&trace.edges);
    for m in decompose(c.items()) {
        let plain = minimize_env(c, &m, None).unwrap();
        assert!(c.check_item(&m.item, &plain.minimal_env, false).verdict.is_accepted(), "{}", m.item.name);
        assert!(plain.minimal_env.is_sublist_of(&m.candidate_env));
        assert!(is_one_minimal(c, &m, &plain.minimal_env), "{}", m.item.name);
        let seeded = minimize_env(c, &m, Some(&trace.edges)).unwrap();
        assert_eq!(seeded.minimal_env, plain.minimal_env);
        assert!(seeded.oracle_calls <= plain.oracle_calls);
        let names: BTreeSet<String> = plain.minimal_env.names().map(|(_, n)| n.to_string()).collect();
        assert!(names.is_subset(traced.get(&m.item.name).unwrap_or(&BTreeSet::new())));
        let n = candidates(c, &m).len();
        if n <= 12 {
            assert_eq!(plain.minimal_env, brute_force_minimum(c, &m), "{}", m.item.name);
        }
        let k = plain.minimal_env.len() as f64;
        let bound = 4.0 * k * (n.max(1) as f64).log2() + n as f64;
        assert!(plain.oracle_calls as f64 <= bound, "{}: {} calls, n={n} k={k}", m.item.name, plain.oracle_calls);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn minimization_properties(family in 0usize..5, items in 1usize..=40, seed in any::<u64>()) {
        check_corpus(&generated(FAMILIES[family], items, seed));
    }

    #[test]
    fn small_corpora_match_brute_force(items in 1usize..=13, seed in any::<u64>()) {
        check_corpus(&generated(Family::Mixed, items, seed));
    }
}

#[test]
fn fixtures_satisfy_properties() {
    for name in ["library", "redundant-hint", "opaque-chain", "rewrites/input"] {
        check_corpus(&load_fixture(name));
    }
}

#[test]
fn library_has_23_microarticles() {
    assert_eq!(decompose(load_fixture("library").items()).len(), 23);
}

#[test]
fn redundant_hint_comparison() {
    let c = load_fixture("redundant-hint");
    let trace = trace_extract(&c, 1).unwrap();
    let mins = minimize_all(&c, None, 1).unwrap();
    let t = mins.iter().find(|r| r.item == "t").unwrap();
    assert_eq!(t.minimal_env.definitions, vec!["f"]);
    assert_eq!(t.minimal_env.hints, vec!["h1"]);
    let cmp = compare_methods(&trace.edges, &mins).unwrap();
    for row in &cmp {
        assert!(row.min_only.is_empty());
        let expected: BTreeSet<String> = if row.item == "t" { ["h2".to_string()].into() } else { BTreeSet::new() };
        assert_eq!(row.trace_only, expected);
    }

    let by_min = kind_table(&DepGraph::items(&c, &min_edges(&c, &mins)).unwrap()).unwrap();
    let by_trace = kind_table(&DepGraph::items(&c, &trace.edges).unwrap()).unwrap();
    assert_eq!(by_min[&ItemKind::Hint].to_count, 1);
    assert_eq!(by_trace[&ItemKind::Hint].to_count, 2);
}

#[test]
fn automation_free_corpora_agree() {
    for family in [Family::Chain, Family::Diamond, Family::Symbols] {
        for seed in 0..10 {
            let c = generated(family, 40, seed);
            let trace = trace_extract(&c, 1).unwrap();
            let mins = minimize_all(&c, None, 1).unwrap();
            assert_eq!(edge_sets(&trace.edges), edge_sets(&min_edges(&c, &mins)));
            assert!(compare_methods(&trace.edges, &mins).unwrap().iter().all(|r| r.trace_only.is_empty()));
        }
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let c = generated(Family::Mixed, 120, 9);
    let one = minimize_all(&c, None, 1).unwrap();
    let eight = minimize_all(&c, None, 8).unwrap();
    assert_eq!(one, eight);
    assert_eq!(trace_extract(&c, 1).unwrap(), trace_extract(&c, 8).unwrap());
}

#[test]
fn event_stream_matches_edges() {
    let c = load_fixture("library");
    let t = trace_extract(&c, 1).unwrap();
    assert_eq!(t.events.len(), c.len());
    assert_eq!(t.events[0], "dependencies: (empty list)");
    let total: usize = t.events.iter().map(|l| l.split_whitespace().count() - 1).sum::<usize>()
        - t.events.iter().filter(|l| l.ends_with("(empty list)")).count() * 2;
    assert_eq!(total, t.edges.len());
}
