//! Dependency graphs at item and file granularity, and their statistics.
//!
//! Nodes are kept in corpus order, which for well-formed input is also a
//! topological order (dependencies first). File graphs weigh every node by
//! the number of items it holds; their statistics are stated over items, as
//! if every item of a file depended on every earlier item of its own file
//! and on every item of every file its file depends on.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::fmt::Write as _;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, DepEdge, ItemKind, Opacity, Origin, Visibility};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Item,
    File,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("unknown item `{0}`")]
    UnknownItem(String),
    #[error("dependency cycle through `{0}`")]
    CycleDetected(String),
    #[error("operation needs an item-granularity graph")]
    NeedsItemGranularity,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub name: String,
    /// `None` for file nodes and for items known only from edge lists.
    pub kind: Option<ItemKind>,
    pub opacity: Opacity,
    pub file: String,
    /// Items represented by the node, in corpus order; `[name]` for items.
    pub members: Vec<String>,
}

impl Node {
    pub fn weight(&self) -> usize {
        self.members.len()
    }
}

/// An immutable acyclic dependency graph.
#[derive(Debug, Clone)]
pub struct DepGraph {
    granularity: Granularity,
    nodes: Vec<Node>,
    /// Sorted by (source, target) node index, one edge per pair.
    edges: Vec<DepEdge>,
    index: HashMap<String, usize>,
    /// Per node: `(dependency, edge index)`, ascending.
    deps: Vec<Vec<(usize, usize)>>,
    rdeps: Vec<Vec<usize>>,
    /// Dependencies before dependents; smallest index first among ready nodes.
    topo: Vec<usize>,
    topo_pos: Vec<usize>,
}

fn merge_edge(into: &mut DepEdge, other: &DepEdge) {
    if other.visibility == Visibility::Explicit {
        into.visibility = Visibility::Explicit;
    }
    if other.opacity == Opacity::Transparent {
        into.opacity = Opacity::Transparent;
    }
    into.origins.extend(other.origins.iter().copied());
}

impl DepGraph {
    fn assemble(granularity: Granularity, nodes: Vec<Node>, edges: &[DepEdge]) -> Result<Self, GraphError> {
        let index: HashMap<String, usize> = nodes.iter().enumerate().map(|(i, n)| (n.name.clone(), i)).collect();
        let lookup = |name: &str| index.get(name).copied().ok_or_else(|| GraphError::UnknownItem(name.to_string()));
        let mut merged: BTreeMap<(usize, usize), DepEdge> = BTreeMap::new();
        for e in edges {
            let key = (lookup(&e.from)?, lookup(&e.to)?);
            if key.0 == key.1 {
                return Err(GraphError::CycleDetected(e.from.clone()));
            }
            match merged.get_mut(&key) {
                Some(existing) => merge_edge(existing, e),
                None => {
                    merged.insert(key, e.clone());
                }
            }
        }
        let n = nodes.len();
        let mut deps = vec![Vec::new(); n];
        let mut rdeps = vec![Vec::new(); n];
        for (ei, &(from, to)) in merged.keys().enumerate() {
            deps[from].push((to, ei));
            rdeps[to].push(from);
        }
        let mut pending: Vec<usize> = deps.iter().map(Vec::len).collect();
        let mut ready: BinaryHeap<Reverse<usize>> = (0..n).filter(|&i| pending[i] == 0).map(Reverse).collect();
        let mut topo = Vec::with_capacity(n);
        while let Some(Reverse(v)) = ready.pop() {
            topo.push(v);
            for &d in &rdeps[v] {
                pending[d] -= 1;
                if pending[d] == 0 {
                    ready.push(Reverse(d));
                }
            }
        }
        if topo.len() < n {
            let stuck = (0..n).find(|&i| pending[i] > 0).unwrap_or(0);
            return Err(GraphError::CycleDetected(nodes[stuck].name.clone()));
        }
        let mut topo_pos = vec![0; n];
        for (p, &v) in topo.iter().enumerate() {
            topo_pos[v] = p;
        }
        Ok(DepGraph { granularity, nodes, edges: merged.into_values().collect(), index, deps, rdeps, topo, topo_pos })
    }

    /// Item graph over every corpus item, with nodes in corpus order.
    pub fn items(corpus: &Corpus, edges: &[DepEdge]) -> Result<Self, GraphError> {
        let nodes = corpus
            .items()
            .iter()
            .map(|i| Node {
                name: i.name.clone(),
                kind: Some(i.kind),
                opacity: i.opacity,
                file: i.source_file.clone(),
                members: vec![i.name.clone()],
            })
            .collect();
        Self::assemble(Granularity::Item, nodes, edges)
    }

    /// Item graph whose nodes are the edge endpoints, in order of first
    /// appearance. Kinds and files are unknown.
    pub fn from_edges(edges: &[DepEdge]) -> Result<Self, GraphError> {
        let mut nodes: Vec<Node> = Vec::new();
        let mut seen: HashMap<&str, usize> = HashMap::new();
        for e in edges {
            for (name, opacity) in [(&e.to, Some(e.opacity)), (&e.from, None)] {
                match seen.get(name.as_str()) {
                    Some(&i) => {
                        if let Some(o) = opacity {
                            nodes[i].opacity = o;
                        }
                    }
                    None => {
                        seen.insert(name, nodes.len());
                        nodes.push(Node {
                            name: name.clone(),
                            kind: None,
                            opacity: opacity.unwrap_or(Opacity::Transparent),
                            file: String::new(),
                            members: vec![name.clone()],
                        });
                    }
                }
            }
        }
        Self::assemble(Granularity::Item, nodes, edges)
    }

    /// Condenses an item graph into its file graph, dropping same-file edges.
    pub fn project(&self) -> Result<Self, GraphError> {
        if self.granularity != Granularity::Item {
            return Err(GraphError::NeedsItemGranularity);
        }
        let mut files: BTreeMap<&str, Node> = BTreeMap::new();
        for n in &self.nodes {
            files
                .entry(n.file.as_str())
                .or_insert_with(|| Node {
                    name: n.file.clone(),
                    kind: None,
                    opacity: Opacity::Transparent,
                    file: n.file.clone(),
                    members: Vec::new(),
                })
                .members
                .push(n.name.clone());
        }
        let edges: Vec<DepEdge> = self
            .edges
            .iter()
            .filter_map(|e| {
                let (a, b) = (&self.nodes[self.index[&e.from]].file, &self.nodes[self.index[&e.to]].file);
                (a != b).then(|| {
                    let mut fe = DepEdge::new(a, b, e.visibility, e.opacity);
                    fe.origins = e.origins.clone();
                    fe
                })
            })
            .collect();
        Self::assemble(Granularity::File, files.into_values().collect(), &edges)
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[DepEdge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn dependencies(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.deps[v].iter().map(|&(u, _)| u)
    }

    pub fn dependents(&self, v: usize) -> &[usize] {
        &self.rdeps[v]
    }

    pub fn topo_order(&self) -> &[usize] {
        &self.topo
    }

    pub fn topo_position(&self, v: usize) -> usize {
        self.topo_pos[v]
    }

    /// Expands a file graph into the item relation its statistics describe.
    pub fn expand_items(&self) -> DepGraph {
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        for f in &self.nodes {
            for (j, m) in f.members.iter().enumerate() {
                nodes.push(Node {
                    name: m.clone(),
                    kind: None,
                    opacity: Opacity::Transparent,
                    file: f.file.clone(),
                    members: vec![m.clone()],
                });
                for earlier in &f.members[..j] {
                    edges.push(DepEdge::new(m, earlier, Visibility::Implicit, Opacity::Transparent));
                }
                for g in self.dependencies(self.index[&f.name]) {
                    for t in &self.nodes[g].members {
                        edges.push(DepEdge::new(m, t, Visibility::Implicit, Opacity::Transparent));
                    }
                }
            }
        }
        Self::assemble(Granularity::Item, nodes, &edges).expect("expansion of an acyclic graph is acyclic")
    }

    /// Forward reachability per node, plus reachability along transparent
    /// edges only.
    fn reach_sets(&self) -> (Vec<FixedBitSet>, Vec<FixedBitSet>) {
        let n = self.len();
        let mut all = vec![FixedBitSet::new(); n];
        let mut transparent = vec![FixedBitSet::new(); n];
        for &v in &self.topo {
            let mut r = FixedBitSet::with_capacity(n);
            let mut t = FixedBitSet::with_capacity(n);
            for &(u, ei) in &self.deps[v] {
                r.insert(u);
                r.union_with(&all[u]);
                if self.edges[ei].opacity == Opacity::Transparent {
                    t.insert(u);
                    t.union_with(&transparent[u]);
                }
            }
            all[v] = r;
            transparent[v] = t;
        }
        (all, transparent)
    }

    fn dfs(&self, start: usize, forward: bool, seen: &mut FixedBitSet) {
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            let next: Vec<usize> = if forward { self.dependencies(v).collect() } else { self.rdeps[v].clone() };
            for u in next {
                if !seen.put(u) {
                    stack.push(u);
                }
            }
        }
    }

    /// Every transitive dependency of `v`, excluding `v`.
    pub fn reach_of(&self, v: usize) -> FixedBitSet {
        let mut seen = FixedBitSet::with_capacity(self.len());
        self.dfs(v, true, &mut seen);
        seen
    }

    /// Every transitive dependent of `v`, excluding `v`.
    pub fn reverse_reach_of(&self, v: usize) -> FixedBitSet {
        let mut seen = FixedBitSet::with_capacity(self.len());
        self.dfs(v, false, &mut seen);
        seen
    }
}

fn pairs(w: usize) -> u64 {
    let w = w as u64;
    w * w.saturating_sub(1) / 2
}

/// Builds the graph of `edges` over `corpus` at the requested granularity.
pub fn build_graph(corpus: &Corpus, edges: &[DepEdge], granularity: Granularity) -> Result<DepGraph, GraphError> {
    let g = DepGraph::items(corpus, edges)?;
    match granularity {
        Granularity::Item => Ok(g),
        Granularity::File => g.project(),
    }
}

/// The reachability relation. Edges already present are kept; new edges are
/// implicit, and transparent exactly when some witnessing path consists of
/// transparent edges only.
pub fn transitive_closure(g: &DepGraph) -> DepGraph {
    let (all, transparent) = g.reach_sets();
    let mut edges = Vec::new();
    for (v, reach) in all.iter().enumerate() {
        let direct: HashMap<usize, usize> = g.deps[v].iter().copied().collect();
        for w in reach.ones() {
            match direct.get(&w) {
                Some(&ei) => edges.push(g.edges[ei].clone()),
                None => {
                    let opacity = if transparent[v].contains(w) { Opacity::Transparent } else { Opacity::Opaque };
                    let mut e = DepEdge::new(&g.nodes[v].name, &g.nodes[w].name, Visibility::Implicit, opacity);
                    e.origins.insert(Origin::Closure);
                    edges.push(e);
                }
            }
        }
    }
    DepGraph::assemble(g.granularity, g.nodes.clone(), &edges).expect("closure of an acyclic graph is acyclic")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub items: u64,
    pub deps: u64,
    pub tdeps: u64,
    pub p: f64,
    pub arl: f64,
    pub mrl: f64,
}

impl GraphStats {
    /// Derives the percentages and averages from raw counts.
    pub fn from_totals(items: u64, deps: u64, tdeps: u64, reverse_counts: &[u64]) -> Self {
        let p = if items >= 2 { 100.0 * tdeps as f64 / pairs(items as usize) as f64 } else { 0.0 };
        let arl = if items >= 1 { tdeps as f64 / items as f64 } else { 0.0 };
        GraphStats { items, deps, tdeps, p, arl, mrl: median(reverse_counts) }
    }

    /// Aligned two-column table with one row per statistic.
    pub fn table(&self, label: &str) -> String {
        let rows = [
            ("Items", self.items.to_string()),
            ("Deps", self.deps.to_string()),
            ("TDeps", self.tdeps.to_string()),
            ("P(%)", format!("{:.1}", self.p)),
            ("ARL", format!("{:.1}", self.arl)),
            ("MRL", format!("{:.1}", self.mrl)),
        ];
        let width = rows.iter().map(|r| r.1.len()).max().unwrap_or(0).max(label.len());
        let mut out = format!("{:<6} {:>width$}\n", "", label);
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<6} {v:>width$}");
        }
        out
    }
}

/// Median; the mean of the two middle values for an even count.
pub fn median(values: &[u64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_unstable();
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid] as f64
    } else {
        (v[mid - 1] + v[mid]) as f64 / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReachStrategy {
    /// Bitsets when they fit in [`BITSET_BUDGET_BYTES`], DFS otherwise.
    Auto,
    Bitset,
    Dfs,
}

/// Memory allowed for the per-node reachability bitsets.
pub const BITSET_BUDGET_BYTES: usize = 1 << 30;

struct Counts {
    deps: u64,
    tdeps: u64,
    /// Per item, in node then member order.
    reverse: Vec<u64>,
}

fn counts(g: &DepGraph, strategy: ReachStrategy) -> Counts {
    let n = g.len();
    let w: Vec<u64> = g.nodes.iter().map(|x| x.weight() as u64).collect();
    let use_bitsets = match strategy {
        ReachStrategy::Auto => n.saturating_mul(n) / 8 <= BITSET_BUDGET_BYTES,
        ReachStrategy::Bitset => true,
        ReachStrategy::Dfs => false,
    };
    let mut deps = 0;
    let mut tdeps = 0;
    let mut rev_weight = vec![0u64; n];
    if use_bitsets {
        let (all, _) = g.reach_sets();
        for v in 0..n {
            for u in all[v].ones() {
                tdeps += w[v] * w[u];
                rev_weight[u] += w[v];
            }
        }
    } else {
        for v in 0..n {
            tdeps += g.reach_of(v).ones().map(|u| w[v] * w[u]).sum::<u64>();
            rev_weight[v] = g.reverse_reach_of(v).ones().map(|u| w[u]).sum();
        }
    }
    for v in 0..n {
        deps += pairs(w[v] as usize) + g.dependencies(v).map(|u| w[v] * w[u]).sum::<u64>();
        tdeps += pairs(w[v] as usize);
    }
    let mut reverse = Vec::new();
    for v in 0..n {
        for j in 0..w[v] {
            reverse.push(w[v] - 1 - j + rev_weight[v]);
        }
    }
    Counts { deps, tdeps, reverse }
}

pub fn stats(g: &DepGraph) -> GraphStats {
    stats_with(g, ReachStrategy::Auto)
}

pub fn stats_with(g: &DepGraph, strategy: ReachStrategy) -> GraphStats {
    let c = counts(g, strategy);
    GraphStats::from_totals(c.reverse.len() as u64, c.deps, c.tdeps, &c.reverse)
}

/// Transitive reverse-dependent count of every item, by item name.
pub fn reverse_counts(g: &DepGraph) -> Vec<(String, u64)> {
    let c = counts(g, ReachStrategy::Auto);
    g.nodes.iter().flat_map(|n| n.members.iter().cloned()).zip(c.reverse).collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KindCounts {
    pub from_count: u64,
    pub to_count: u64,
}

/// Direct edges by the kind of their source and of their target.
pub fn kind_table(g: &DepGraph) -> Result<BTreeMap<ItemKind, KindCounts>, GraphError> {
    if g.granularity != Granularity::Item {
        return Err(GraphError::NeedsItemGranularity);
    }
    let mut table: BTreeMap<ItemKind, KindCounts> =
        ItemKind::ALL.into_iter().map(|k| (k, KindCounts::default())).collect();
    for (v, list) in g.deps.iter().enumerate() {
        for &(u, _) in list {
            if let Some(k) = g.nodes[v].kind {
                table.entry(k).or_default().from_count += 1;
            }
            if let Some(k) = g.nodes[u].kind {
                table.entry(k).or_default().to_count += 1;
            }
        }
    }
    Ok(table)
}

/// `(t, number of items with at most t transitive reverse dependents)` for
/// every distinct count `t`, ascending.
pub fn reverse_cumulative(g: &DepGraph) -> Vec<(u64, u64)> {
    let mut counts: Vec<u64> = reverse_counts(g).into_iter().map(|(_, c)| c).collect();
    counts.sort_unstable();
    let mut out: Vec<(u64, u64)> = Vec::new();
    for (i, c) in counts.iter().enumerate() {
        match out.last_mut() {
            Some(last) if last.0 == *c => last.1 = i as u64 + 1,
            _ => out.push((*c, i as u64 + 1)),
        }
    }
    out
}

pub fn cumulative_csv(rows: &[(u64, u64)]) -> String {
    let mut out = String::from("threshold,items\n");
    for (t, n) in rows {
        let _ = writeln!(out, "{t},{n}");
    }
    out
}

/// `target` and everything it transitively needs, dependencies first.
pub fn load_set(g: &DepGraph, target: &str) -> Result<Vec<String>, GraphError> {
    let v = g.index_of(target).ok_or_else(|| GraphError::UnknownItem(target.to_string()))?;
    let mut set: Vec<usize> = g.reach_of(v).ones().collect();
    set.push(v);
    set.sort_by_key(|&u| g.topo_pos[u]);
    Ok(set.into_iter().map(|u| g.nodes[u].name.clone()).collect())
}

fn dot_id(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Graphviz rendering; implicit edges are dashed, opaque targets boxed.
pub fn to_dot(g: &DepGraph) -> String {
    let mut out = String::from("digraph deps {\n  rankdir=BT;\n");
    for n in &g.nodes {
        let shape = if n.opacity == Opacity::Opaque && g.granularity == Granularity::Item { "box" } else { "ellipse" };
        let _ = writeln!(out, "  {} [shape={shape}];", dot_id(&n.name));
    }
    for e in &g.edges {
        let style = match e.visibility {
            Visibility::Explicit => "solid",
            Visibility::Implicit => "dashed",
        };
        let _ = writeln!(out, "  {} -> {} [style={style}];", dot_id(&e.from), dot_id(&e.to));
    }
    out.push_str("}\n");
    out
}
