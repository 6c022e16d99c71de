//! Per-item dependency extraction.
//!
//! Two methods are offered. Trace capture runs the checker once per item in
//! trace mode and records every resolution it makes. Minimization packages
//! each item with everything before it (a microarticle) and shrinks that
//! environment against the checker until nothing more can be dropped.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, DepEdge, Environment, Item, ItemKind, Origin, RejectReason, Verdict, Visibility};
use crate::pool::ordered_map;

/// Kinds are minimized one after the other in this order.
pub const KIND_ORDER: [ItemKind; 5] =
    [ItemKind::Theorem, ItemKind::Definition, ItemKind::Reservation, ItemKind::Notation, ItemKind::Hint];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExtractError {
    #[error("`{item}` does not verify under its candidate environment ({reason})")]
    NotVerifiable { item: String, reason: RejectReason },
    #[error("corpus mismatch: {0}")]
    CorpusMismatch(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Microarticle {
    pub item: Item,
    /// Every item that precedes `item` in corpus order.
    pub candidate_env: Environment,
}

/// One microarticle per item, in corpus order.
pub fn decompose(items: &[Item]) -> Vec<Microarticle> {
    let mut env = Environment::default();
    let mut out = Vec::with_capacity(items.len());
    for item in items {
        out.push(Microarticle { item: item.clone(), candidate_env: env.clone() });
        env.push(item);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinimizationResult {
    pub item: String,
    pub minimal_env: Environment,
    /// Checker queries spent shrinking the environment. Verifying the
    /// starting environment is not counted.
    pub oracle_calls: usize,
    pub removed: BTreeMap<ItemKind, usize>,
}

/// Shrinks one per-kind candidate list.
///
/// Chunks of half the list, then a quarter, and so on down to single
/// elements are tried for removal, latest chunk first; a removal is kept
/// whenever the rest still verifies. The single-element round leaves the
/// list 1-minimal for a monotone oracle. Trying late chunks first means that
/// when several elements could serve, the earliest one survives.
fn reduce(mut keep: Vec<usize>, calls: &mut usize, verifies: &mut dyn FnMut(&[usize]) -> bool) -> Vec<usize> {
    if keep.is_empty() {
        return keep;
    }
    let mut chunk = keep.len().div_ceil(2);
    loop {
        let mut end = keep.len();
        while end > 0 && !keep.is_empty() {
            let start = end.saturating_sub(chunk);
            let candidate: Vec<usize> = keep[..start].iter().chain(&keep[end..]).copied().collect();
            *calls += 1;
            if verifies(&candidate) {
                keep = candidate;
            }
            end = start;
        }
        if chunk == 1 || keep.is_empty() {
            break;
        }
        chunk = chunk.div_ceil(2);
    }
    keep
}

struct Lists {
    by_kind: BTreeMap<ItemKind, Vec<usize>>,
}

impl Lists {
    fn scope(&self, size: usize, replace: Option<(ItemKind, &[usize])>) -> FixedBitSet {
        let mut scope = FixedBitSet::with_capacity(size);
        for (kind, list) in &self.by_kind {
            let list = match replace {
                Some((k, l)) if k == *kind => l,
                _ => list,
            };
            for &i in list {
                scope.insert(i);
            }
        }
        scope
    }
}

/// Computes the minimal environment of one microarticle.
///
/// With a seed (typically the item's trace) the seed-restricted environment
/// is tried first; when it verifies the search stays inside it. Results are
/// the same with or without a seed.
pub fn minimize_env(
    corpus: &Corpus,
    m: &Microarticle,
    seed: Option<&[DepEdge]>,
) -> Result<MinimizationResult, ExtractError> {
    let n = corpus.len();
    let mut lists = Lists { by_kind: BTreeMap::new() };
    for kind in KIND_ORDER {
        let idx: Vec<usize> = m
            .candidate_env
            .list(kind)
            .iter()
            .filter_map(|name| corpus.index_of(name).filter(|&i| corpus.items()[i].kind == kind))
            .collect();
        lists.by_kind.insert(kind, idx);
    }
    let original: BTreeMap<ItemKind, usize> = lists.by_kind.iter().map(|(k, v)| (*k, v.len())).collect();
    let check = |scope: &FixedBitSet| corpus.check_in_scope(&m.item, scope, false).verdict;

    let mut started = false;
    if let Some(seed) = seed {
        let targets: HashSet<&str> = seed.iter().filter(|e| e.from == m.item.name).map(|e| e.to.as_str()).collect();
        let restricted = Lists {
            by_kind: lists
                .by_kind
                .iter()
                .map(|(k, v)| {
                    (*k, v.iter().copied().filter(|&i| targets.contains(corpus.items()[i].name.as_str())).collect())
                })
                .collect(),
        };
        if check(&restricted.scope(n, None)).is_accepted() {
            lists = restricted;
            started = true;
        }
    }
    if !started {
        if let Verdict::Rejected(reason) = check(&lists.scope(n, None)) {
            return Err(ExtractError::NotVerifiable { item: m.item.name.clone(), reason });
        }
    }

    let mut calls = 0;
    for kind in KIND_ORDER {
        let current = lists.by_kind[&kind].clone();
        let reduced = {
            let lists = &lists;
            let mut verifies = |cand: &[usize]| check(&lists.scope(n, Some((kind, cand)))).is_accepted();
            reduce(current, &mut calls, &mut verifies)
        };
        lists.by_kind.insert(kind, reduced);
    }

    let mut minimal_env = Environment::default();
    let mut removed = BTreeMap::new();
    for kind in ItemKind::ALL {
        let list = &lists.by_kind[&kind];
        *minimal_env.list_mut(kind) = list.iter().map(|&i| corpus.items()[i].name.clone()).collect();
        removed.insert(kind, original[&kind] - list.len());
    }
    Ok(MinimizationResult { item: m.item.name.clone(), minimal_env, oracle_calls: calls, removed })
}

/// Minimizes every microarticle of the corpus on up to `jobs` threads.
pub fn minimize_all(
    corpus: &Corpus,
    seed: Option<&[DepEdge]>,
    jobs: usize,
) -> Result<Vec<MinimizationResult>, ExtractError> {
    let articles = decompose(corpus.items());
    let seeds: HashMap<&str, Vec<DepEdge>> = match seed {
        Some(edges) => {
            let mut map: HashMap<&str, Vec<DepEdge>> = HashMap::new();
            for e in edges {
                map.entry(e.from.as_str()).or_default().push(e.clone());
            }
            map
        }
        None => HashMap::new(),
    };
    let results = ordered_map(jobs, &articles, |m| {
        let s = seed.map(|_| seeds.get(m.item.name.as_str()).map(Vec::as_slice).unwrap_or(&[]));
        minimize_env(corpus, m, s)
    });
    results.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceExtraction {
    pub edges: Vec<DepEdge>,
    /// One `dependencies: ...` line per item, in corpus order.
    pub events: Vec<String>,
}

pub fn event_line(targets: &[&str]) -> String {
    if targets.is_empty() {
        "dependencies: (empty list)".to_string()
    } else {
        format!("dependencies: {}", targets.join(" "))
    }
}

/// Checks every item under its full candidate environment in trace mode.
pub fn trace_extract(corpus: &Corpus, jobs: usize) -> Result<TraceExtraction, ExtractError> {
    let articles = decompose(corpus.items());
    let traces = ordered_map(jobs, &articles, |m| {
        let out = corpus.check_item(&m.item, &m.candidate_env, true);
        match out.verdict {
            Verdict::Accepted => Ok(out.trace),
            Verdict::Rejected(reason) => Err(ExtractError::NotVerifiable { item: m.item.name.clone(), reason }),
        }
    });
    let mut edges = Vec::new();
    let mut events = Vec::with_capacity(traces.len());
    for trace in traces {
        let trace = trace?;
        events.push(event_line(&trace.iter().map(|e| e.to.as_str()).collect::<Vec<_>>()));
        edges.extend(trace);
    }
    Ok(TraceExtraction { edges, events })
}

/// Edges from each item to the members of its minimal environment.
pub fn min_edges(corpus: &Corpus, results: &[MinimizationResult]) -> Vec<DepEdge> {
    let mut out = Vec::new();
    for r in results {
        let Some(item) = corpus.get(&r.item) else { continue };
        let mut targets: Vec<usize> = r.minimal_env.names().filter_map(|(_, n)| corpus.index_of(n)).collect();
        targets.sort_unstable();
        for t in targets {
            let target = &corpus.items()[t];
            let vis = if item.mentions(&target.name) { Visibility::Explicit } else { Visibility::Implicit };
            let mut edge = DepEdge::new(&item.name, &target.name, vis, target.opacity);
            edge.origins.insert(Origin::Minimized);
            out.push(edge);
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodComparison {
    pub item: String,
    pub trace_only: BTreeSet<String>,
    pub min_only: BTreeSet<String>,
    pub common: BTreeSet<String>,
}

/// Per-item set differences between traced and minimized dependencies.
pub fn compare_methods(
    trace_edges: &[DepEdge],
    results: &[MinimizationResult],
) -> Result<Vec<MethodComparison>, ExtractError> {
    let items: HashSet<&str> = results.iter().map(|r| r.item.as_str()).collect();
    let mut traced: HashMap<&str, BTreeSet<String>> = HashMap::new();
    for e in trace_edges {
        if !items.contains(e.from.as_str()) {
            return Err(ExtractError::CorpusMismatch(format!("traced item `{}` has no minimization result", e.from)));
        }
        traced.entry(e.from.as_str()).or_default().insert(e.to.clone());
    }
    Ok(results
        .iter()
        .map(|r| {
            let minimized: BTreeSet<String> = r.minimal_env.names().map(|(_, n)| n.to_string()).collect();
            let trace = traced.remove(r.item.as_str()).unwrap_or_default();
            MethodComparison {
                item: r.item.clone(),
                trace_only: trace.difference(&minimized).cloned().collect(),
                min_only: minimized.difference(&trace).cloned().collect(),
                common: trace.intersection(&minimized).cloned().collect(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_source;

    fn corpus(src: &str) -> Corpus {
        Corpus::new(parse_source("t.art", src).unwrap()).unwrap()
    }

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    /// Every subset of the candidate environment, smallest first and then
    /// lexicographically by corpus position; the first accepted one wins.
    fn exhaustive(c: &Corpus, m: &Microarticle) -> Environment {
        let cands: Vec<usize> = m.candidate_env.names().filter_map(|(_, n)| c.index_of(n)).collect();
        let mut cands = cands;
        cands.sort_unstable();
        let mut subsets: Vec<Vec<usize>> = (0u32..1 << cands.len())
            .map(|mask| cands.iter().enumerate().filter(|(b, _)| mask & (1 << b) != 0).map(|(_, &i)| i).collect())
            .collect();
        subsets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        for s in subsets {
            let mut env = Environment::default();
            for i in s {
                env.push(&c.items()[i]);
            }
            if c.check_item(&m.item, &env, false).verdict.is_accepted() {
                return env;
            }
        }
        panic!("not verifiable");
    }

    #[test]
    fn decompose_prefixes() {
        let c = corpus("def a := lit; def b := a; thm t : uses b;");
        let ms = decompose(c.items());
        assert_eq!(ms.len(), 3);
        assert!(ms[0].candidate_env.is_empty());
        assert_eq!(ms[2].candidate_env.definitions, names(&["a", "b"]));
        let one = decompose(&c.items()[..1]);
        assert!(one[0].candidate_env.is_empty());
    }

    #[test]
    fn vacuous_item_minimizes_to_empty() {
        let c = corpus("def a := lit; def b := lit; thm t : ;");
        let ms = decompose(c.items());
        let r = minimize_env(&c, &ms[2], None).unwrap();
        assert!(r.minimal_env.is_empty());
        assert_eq!(r.removed[&ItemKind::Definition], 2);
    }

    #[test]
    fn redundant_hints_keep_the_earliest() {
        let c = corpus("def f := lit; def g := lit; hint h1 uses f; hint h2 uses f; thm t : uses f by auto;");
        let ms = decompose(c.items());
        let r = minimize_env(&c, &ms[4], None).unwrap();
        assert_eq!(r.minimal_env.definitions, names(&["f"]));
        assert_eq!(r.minimal_env.hints, names(&["h1"]));
        assert_eq!(r.minimal_env, exhaustive(&c, &ms[4]));
    }

    #[test]
    fn not_verifiable_reports_reason() {
        let c = corpus("thm t : uses f; def f := lit;");
        let ms = decompose(c.items());
        assert_eq!(
            minimize_env(&c, &ms[0], None).unwrap_err(),
            ExtractError::NotVerifiable { item: "t".into(), reason: RejectReason::UnresolvedSymbol }
        );
        assert!(trace_extract(&c, 1).is_err());
    }

    #[test]
    fn seeded_and_unseeded_agree() {
        let c = corpus(
            "def f := lit; def g := lit; def k := g; hint h1 uses f; hint h2 uses g f; reserve x : k; \
             thm a : uses f var x by auto; thm b : uses a uses g by a;",
        );
        let tr = trace_extract(&c, 1).unwrap();
        for m in decompose(c.items()) {
            let plain = minimize_env(&c, &m, None).unwrap();
            let seeded = minimize_env(&c, &m, Some(&tr.edges)).unwrap();
            assert_eq!(plain.minimal_env, seeded.minimal_env);
            assert!(seeded.oracle_calls <= plain.oracle_calls, "{}", m.item.name);
            assert_eq!(plain.minimal_env, exhaustive(&c, &m));
        }
    }

    #[test]
    fn bad_seed_falls_back_to_full_environment() {
        let c = corpus("def f := lit; thm t : uses f;");
        let ms = decompose(c.items());
        let wrong = [DepEdge::new("t", "nothing", Visibility::Explicit, crate::corpus::Opacity::Opaque)];
        let r = minimize_env(&c, &ms[1], Some(&wrong)).unwrap();
        assert_eq!(r.minimal_env.definitions, names(&["f"]));
    }

    #[test]
    fn trace_events() {
        let c = corpus("def a := lit; thm b : uses a by a;");
        let tr = trace_extract(&c, 1).unwrap();
        assert_eq!(tr.events, vec!["dependencies: (empty list)", "dependencies: a"]);
        assert_eq!(tr.edges.len(), 1);
        assert_eq!((tr.edges[0].from.as_str(), tr.edges[0].to.as_str()), ("b", "a"));
        assert_eq!(tr.edges[0].visibility, Visibility::Explicit);
    }

    #[test]
    fn comparison_of_methods() {
        let c = corpus("def f := lit; def g := lit; hint h1 uses f; hint h2 uses f; thm t : uses f by auto;");
        let tr = trace_extract(&c, 1).unwrap();
        let mins = minimize_all(&c, None, 1).unwrap();
        let cmp = compare_methods(&tr.edges, &mins).unwrap();
        let t = cmp.iter().find(|r| r.item == "t").unwrap();
        assert_eq!(t.trace_only, ["h2".to_string()].into());
        assert_eq!(t.common, ["f".to_string(), "h1".to_string()].into());
        assert!(t.min_only.is_empty());

        assert!(compare_methods(&[], &[]).unwrap().is_empty());
        assert!(matches!(compare_methods(&tr.edges, &mins[..1]), Err(ExtractError::CorpusMismatch(_))));
    }

    #[test]
    fn reduce_call_counts() {
        // Nothing needed: two calls clear any list.
        let mut calls = 0;
        let out = reduce((0..16).collect(), &mut calls, &mut |_| true);
        assert!(out.is_empty());
        assert_eq!(calls, 2);
        // Everything needed: every level fails on every chunk.
        let mut calls = 0;
        let out = reduce((0..4).collect(), &mut calls, &mut |c| c.len() == 4);
        assert_eq!(out, vec![0, 1, 2, 3]);
        assert_eq!(calls, 2 + 4);
    }
}
