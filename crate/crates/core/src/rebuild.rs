//! Incremental re-verification after edits.
//!
//! A plan lists what must be checked again after a set of changes: the
//! changed items and their transitive dependents, or at file granularity
//! every item of every affected file. A body-only change to an opaque item
//! cannot affect its dependents, so with opacity honored the traversal stops
//! there.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Environment, Opacity, Verdict};
use crate::extract::{decompose, minimize_env, ExtractError};
use crate::graph::{median, DepGraph, Granularity, GraphError};
use crate::pool::ordered_map;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeKind {
    BodyOnly,
    StatementOrType,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RebuildError {
    #[error("empty change set")]
    EmptyChangeSet,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChangeSet {
    changes: BTreeMap<String, ChangeKind>,
}

impl ChangeSet {
    pub fn new(changes: impl IntoIterator<Item = (String, ChangeKind)>) -> Result<Self, RebuildError> {
        let changes: BTreeMap<String, ChangeKind> = changes.into_iter().collect();
        if changes.is_empty() {
            return Err(RebuildError::EmptyChangeSet);
        }
        Ok(ChangeSet { changes })
    }

    pub fn single(name: &str, kind: ChangeKind) -> Self {
        ChangeSet { changes: BTreeMap::from([(name.to_string(), kind)]) }
    }

    pub fn changes(&self) -> &BTreeMap<String, ChangeKind> {
        &self.changes
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RebuildPlan {
    /// Dependencies before dependents.
    pub to_recheck: Vec<String>,
    pub skipped_opaque: BTreeSet<String>,
    pub granularity: Granularity,
    pub cost: usize,
}

/// Plans the re-checks for `changes` over the item graph `g`. At file
/// granularity opacity plays no part.
pub fn plan(
    g: &DepGraph,
    changes: &ChangeSet,
    granularity: Granularity,
    honor_opacity: bool,
) -> Result<RebuildPlan, RebuildError> {
    if g.granularity() != Granularity::Item {
        return Err(GraphError::NeedsItemGranularity.into());
    }
    let mut changed = Vec::new();
    for (name, kind) in &changes.changes {
        let v = g.index_of(name).ok_or_else(|| GraphError::UnknownItem(name.clone()))?;
        changed.push((v, *kind));
    }
    let n = g.len();
    let mut recheck = fixedbitset::FixedBitSet::with_capacity(n);
    let mut skipped = fixedbitset::FixedBitSet::with_capacity(n);
    match granularity {
        Granularity::Item => {
            for &(v, kind) in &changed {
                recheck.insert(v);
                let stops = honor_opacity && kind == ChangeKind::BodyOnly && g.nodes()[v].opacity == Opacity::Opaque;
                let reach = g.reverse_reach_of(v);
                if stops {
                    skipped.union_with(&reach);
                } else {
                    recheck.union_with(&reach);
                }
            }
            skipped.difference_with(&recheck);
        }
        Granularity::File => {
            let fg = g.project()?;
            let mut files = fixedbitset::FixedBitSet::with_capacity(fg.len());
            for &(v, _) in &changed {
                let f = fg.index_of(&g.nodes()[v].file).expect("projection keeps every file");
                files.insert(f);
                files.union_with(&fg.reverse_reach_of(f));
            }
            for f in files.ones() {
                for m in &fg.nodes()[f].members {
                    recheck.insert(g.index_of(m).expect("file members are graph nodes"));
                }
            }
        }
    }
    let mut order: Vec<usize> = recheck.ones().collect();
    order.sort_by_key(|&v| g.topo_position(v));
    let names = |set: &mut dyn Iterator<Item = usize>| set.map(|v| g.nodes()[v].name.clone()).collect::<Vec<_>>();
    let to_recheck = names(&mut order.into_iter());
    Ok(RebuildPlan {
        cost: to_recheck.len(),
        skipped_opaque: names(&mut skipped.ones()).into_iter().collect(),
        to_recheck,
        granularity,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub item: String,
    /// A checker reason code, or `Missing` for items no longer in the corpus.
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionReport {
    pub passed: Vec<String>,
    pub failed: Vec<Failure>,
    pub verified_count: usize,
}

/// Checks every planned item of `corpus`, in plan order.
///
/// An item is checked under its stored environment (names no longer in the
/// corpus dropped), or under everything before it when none is stored. With
/// `reminimize` the environment is recomputed from scratch instead.
pub fn execute(
    plan: &RebuildPlan,
    corpus: &Corpus,
    stored: &HashMap<String, Environment>,
    reminimize: bool,
    jobs: usize,
) -> ExecutionReport {
    let outcomes = ordered_map(jobs, &plan.to_recheck, |name| -> Result<(), String> {
        let idx = corpus.index_of(name).ok_or_else(|| "Missing".to_string())?;
        let item = &corpus.items()[idx];
        if reminimize {
            let m = decompose(&corpus.items()[..=idx]).pop().expect("prefix is nonempty");
            return match minimize_env(corpus, &m, None) {
                Ok(_) => Ok(()),
                Err(ExtractError::NotVerifiable { reason, .. }) => Err(reason.to_string()),
                Err(e) => Err(e.to_string()),
            };
        }
        let env = stored.get(name).cloned().unwrap_or_else(|| corpus.prefix_env(idx));
        match corpus.check_item(item, &env, false).verdict {
            Verdict::Accepted => Ok(()),
            Verdict::Rejected(reason) => Err(reason.to_string()),
        }
    });
    let mut report = ExecutionReport::default();
    for (name, outcome) in plan.to_recheck.iter().zip(outcomes) {
        match outcome {
            Ok(()) => report.passed.push(name.clone()),
            Err(reason) => report.failed.push(Failure { item: name.clone(), reason }),
        }
    }
    report.verified_count = report.passed.len();
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sampling {
    /// `samples` uniform draws with replacement.
    Random { samples: usize, seed: u64 },
    /// Every item exactly once.
    Exhaustive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupReport {
    pub samples: usize,
    /// Summed plan costs over all draws.
    pub item_total: u64,
    pub file_total: u64,
    pub item_mean: f64,
    pub file_mean: f64,
    pub ratio: f64,
    pub item_median: f64,
    pub file_median: f64,
}

/// The drawn item indices, reproducible from the seed.
pub fn draws(n: usize, sampling: Sampling) -> Vec<usize> {
    match sampling {
        Sampling::Exhaustive => (0..n).collect(),
        Sampling::Random { samples, seed } => {
            if n == 0 {
                return Vec::new();
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..samples).map(|_| rng.gen_range(0..n)).collect()
        }
    }
}

/// Plan costs of single-item statement changes at both granularities.
pub fn speedup_report(g: &DepGraph, sampling: Sampling) -> Result<SpeedupReport, RebuildError> {
    if g.granularity() != Granularity::Item {
        return Err(GraphError::NeedsItemGranularity.into());
    }
    let fg = g.project()?;
    let file_cost: Vec<u64> = (0..fg.len())
        .map(|f| {
            let w = |i: usize| fg.nodes()[i].weight() as u64;
            w(f) + fg.reverse_reach_of(f).ones().map(w).sum::<u64>()
        })
        .collect();
    let picks = draws(g.len(), sampling);
    let mut item_costs = Vec::with_capacity(picks.len());
    let mut file_costs = Vec::with_capacity(picks.len());
    let mut item_cache: HashMap<usize, u64> = HashMap::new();
    for &v in &picks {
        let c = *item_cache.entry(v).or_insert_with(|| g.reverse_reach_of(v).count_ones(..) as u64 + 1);
        item_costs.push(c);
        file_costs.push(file_cost[fg.index_of(&g.nodes()[v].file).expect("projection keeps every file")]);
    }
    let item_total: u64 = item_costs.iter().sum();
    let file_total: u64 = file_costs.iter().sum();
    let mean = |t: u64| if picks.is_empty() { 0.0 } else { t as f64 / picks.len() as f64 };
    let (item_mean, file_mean) = (mean(item_total), mean(file_total));
    Ok(SpeedupReport {
        samples: picks.len(),
        item_total,
        file_total,
        item_mean,
        file_mean,
        ratio: if item_total == 0 { 0.0 } else { file_total as f64 / item_total as f64 },
        item_median: median(&item_costs),
        file_median: median(&file_costs),
    })
}
