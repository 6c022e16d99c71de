//! Naive Bayes premise ranking trained on extracted dependencies.
//!
//! Features of an item are its statement symbols. Training walks the corpus
//! in order, so a model trained up to position `i` has seen only items
//! `0..i`:
//!
//! ```text
//! score(p) = ln(P + a) + sum over features f of w * (ln(C(f, p) + a) - ln(P + a * |V|))
//! ```
//!
//! where `P` counts the items that depended on `p`, `C(f, p)` those of them
//! having feature `f`, and `V` is the feature vocabulary seen so far.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, DepEdge, Item, ItemKind, Visibility};

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("corpus mismatch: {0}")]
    CorpusMismatch(String),
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnConfig {
    /// Laplace smoothing constant.
    pub alpha: f64,
    /// Weight of each feature term.
    pub weight: f64,
    /// Train on explicit dependencies only.
    pub explicit_only: bool,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig { alpha: 1.0, weight: 1.0, explicit_only: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub item: String,
    pub features: BTreeSet<String>,
}

pub fn features(item: &Item) -> FeatureVector {
    FeatureVector { item: item.name.clone(), features: item.statement_symbols.clone() }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BayesModel {
    pub prior: BTreeMap<String, u64>,
    /// Premise to feature to count.
    pub cooccurrence: BTreeMap<String, BTreeMap<String, u64>>,
    pub vocab: BTreeSet<String>,
    /// Number of corpus items consumed.
    pub horizon: usize,
}

impl BayesModel {
    /// Adds one training example and advances the horizon.
    pub fn update(&mut self, features: &BTreeSet<String>, deps: &BTreeSet<String>) {
        for p in deps {
            *self.prior.entry(p.clone()).or_default() += 1;
            let row = self.cooccurrence.entry(p.clone()).or_default();
            for f in features {
                *row.entry(f.clone()).or_default() += 1;
            }
        }
        self.vocab.extend(features.iter().cloned());
        self.horizon += 1;
    }

    pub fn score(&self, premise: &str, features: &BTreeSet<String>, config: &LearnConfig) -> f64 {
        config.alpha.ln() + self.relative_score(premise, features, config)
    }

    /// The score minus ln alpha, from count/alpha ratios only. Scaling every
    /// count and alpha by the same integer leaves each ratio, and so this
    /// value, bit-identical; ranking by it is exactly scale invariant.
    fn relative_score(&self, premise: &str, features: &BTreeSet<String>, config: &LearnConfig) -> f64 {
        let a = config.alpha;
        let prior = self.prior.get(premise).copied().unwrap_or(0) as f64 / a;
        let row = self.cooccurrence.get(premise);
        let norm = (prior + self.vocab.len().max(1) as f64).ln();
        let mut s = prior.ln_1p();
        for f in features {
            let c = row.and_then(|r| r.get(f)).copied().unwrap_or(0) as f64 / a;
            s += config.weight * (c.ln_1p() - norm);
        }
        s
    }
}

/// Dependency targets per source item.
pub fn dependency_sets(
    deps: &[DepEdge],
    corpus: &Corpus,
    explicit_only: bool,
) -> Result<HashMap<String, BTreeSet<String>>, LearnError> {
    let mut out: HashMap<String, BTreeSet<String>> = HashMap::new();
    for e in deps {
        for end in [&e.from, &e.to] {
            if corpus.index_of(end).is_none() {
                return Err(LearnError::CorpusMismatch(format!("edge endpoint `{end}` is not in the corpus")));
            }
        }
        if explicit_only && e.visibility != Visibility::Explicit {
            continue;
        }
        out.entry(e.from.clone()).or_default().insert(e.to.clone());
    }
    Ok(out)
}

/// Trains on items `0..upto`.
pub fn train(deps: &[DepEdge], corpus: &Corpus, upto: usize, config: &LearnConfig) -> Result<BayesModel, LearnError> {
    if upto > corpus.len() {
        return Err(LearnError::CorpusMismatch(format!("horizon {upto} exceeds corpus size {}", corpus.len())));
    }
    let sets = dependency_sets(deps, corpus, config.explicit_only)?;
    let empty = BTreeSet::new();
    let mut model = BayesModel::default();
    for item in &corpus.items()[..upto] {
        model.update(&item.statement_symbols, sets.get(&item.name).unwrap_or(&empty));
    }
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPremises {
    pub conjecture: String,
    pub ranking: Vec<(String, f64)>,
}

/// Scores `candidates`; higher first, ties to the earlier item.
pub fn rank(
    model: &BayesModel,
    conjecture: &FeatureVector,
    candidates: &[&Item],
    config: &LearnConfig,
) -> RankedPremises {
    let mut scored: Vec<(&Item, f64)> =
        candidates.iter().map(|c| (*c, model.relative_score(&c.name, &conjecture.features, config))).collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.order_key().cmp(&b.0.order_key())));
    let shift = config.alpha.ln();
    RankedPremises {
        conjecture: conjecture.item.clone(),
        ranking: scored.into_iter().map(|(i, s)| (i.name.clone(), shift + s)).collect(),
    }
}

struct Query {
    index: usize,
    ranking: RankedPremises,
    truth: BTreeSet<String>,
}

/// Ranks every theorem accepted by `pick` against all earlier items, with a
/// model trained on exactly those earlier items.
fn chronological(
    deps: &[DepEdge],
    corpus: &Corpus,
    config: &LearnConfig,
    pick: impl Fn(&Item, &BTreeSet<String>) -> bool,
) -> Result<Vec<Query>, LearnError> {
    let sets = dependency_sets(deps, corpus, config.explicit_only)?;
    let empty = BTreeSet::new();
    let mut model = BayesModel::default();
    let mut out = Vec::new();
    let items = corpus.items();
    for (i, item) in items.iter().enumerate() {
        let truth = sets.get(&item.name).unwrap_or(&empty);
        if item.kind == ItemKind::Theorem && pick(item, truth) {
            let cands: Vec<&Item> = items[..i].iter().collect();
            let ranking = rank(&model, &features(item), &cands, config);
            out.push(Query { index: i, ranking, truth: truth.clone() });
        }
        model.update(&item.statement_symbols, truth);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallAtK {
    pub k: usize,
    pub recall: f64,
    pub baseline_recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChronoReport {
    pub evaluated: usize,
    pub per_k: Vec<RecallAtK>,
    /// Mean 1-based position of true premises in the full ranking.
    pub mean_rank: f64,
    pub baseline_mean_rank: f64,
}

fn recall(order: &[&str], truth: &BTreeSet<String>, k: usize) -> f64 {
    let hit = order.iter().take(k).filter(|n| truth.contains(**n)).count();
    hit as f64 / truth.len() as f64
}

/// Chronological evaluation over theorems with at least one dependency,
/// next to a uniformly shuffled baseline drawn from `seed`.
pub fn evaluate_chrono(
    deps: &[DepEdge],
    corpus: &Corpus,
    k_values: &[usize],
    config: &LearnConfig,
    seed: u64,
) -> Result<ChronoReport, LearnError> {
    let queries = chronological(deps, corpus, config, |_, truth| !truth.is_empty())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sums = vec![(0.0, 0.0); k_values.len()];
    let (mut rank_sum, mut base_rank_sum, mut ranked) = (0.0, 0.0, 0usize);
    for q in &queries {
        let learned: Vec<&str> = q.ranking.ranking.iter().map(|(n, _)| n.as_str()).collect();
        let mut baseline = corpus.items()[..q.index].iter().map(|i| i.name.as_str()).collect::<Vec<_>>();
        baseline.shuffle(&mut rng);
        for (slot, &k) in sums.iter_mut().zip(k_values) {
            slot.0 += recall(&learned, &q.truth, k);
            slot.1 += recall(&baseline, &q.truth, k);
        }
        let position = |order: &[&str]| -> HashMap<String, usize> {
            order.iter().enumerate().map(|(i, n)| (n.to_string(), i + 1)).collect()
        };
        let (lp, bp) = (position(&learned), position(&baseline));
        for t in &q.truth {
            if let (Some(a), Some(b)) = (lp.get(t), bp.get(t)) {
                rank_sum += *a as f64;
                base_rank_sum += *b as f64;
                ranked += 1;
            }
        }
    }
    let n = queries.len().max(1) as f64;
    let m = ranked.max(1) as f64;
    Ok(ChronoReport {
        evaluated: queries.len(),
        per_k: k_values
            .iter()
            .zip(sums)
            .map(|(&k, (r, b))| RecallAtK { k, recall: r / n, baseline_recall: b / n })
            .collect(),
        mean_rank: rank_sum / m,
        baseline_mean_rank: base_rank_sum / m,
    })
}

fn file_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' }).collect()
}

/// Writes one problem file per theorem into `dir`: a `conjecture NAME` line
/// followed by `premise NAME KIND` lines for the top `k` ranked premises.
pub fn export_problems(
    deps: &[DepEdge],
    corpus: &Corpus,
    k: usize,
    config: &LearnConfig,
    dir: &Path,
) -> Result<Vec<PathBuf>, LearnError> {
    let io_err = |p: &Path, e: std::io::Error| LearnError::Io { path: p.display().to_string(), message: e.to_string() };
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let queries = chronological(deps, corpus, config, |_, _| true)?;
    let mut written = Vec::with_capacity(queries.len());
    for q in queries {
        let mut text = format!("conjecture {}\n", q.ranking.conjecture);
        for (name, _) in q.ranking.ranking.iter().take(k) {
            let kind = corpus.get(name).map_or("unknown", |i| i.kind.as_str());
            text.push_str(&format!("premise {name} {kind}\n"));
        }
        let path = dir.join(format!("{:06}-{}.problem", q.index, file_stem(&q.ranking.conjecture)));
        fs::write(&path, text).map_err(|e| io_err(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_source, Opacity};

    fn set(v: &[&str]) -> BTreeSet<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn edge(from: &str, to: &str) -> DepEdge {
        DepEdge::new(from, to, Visibility::Explicit, Opacity::Transparent)
    }

    fn corpus(src: &str) -> Corpus {
        Corpus::new(parse_source("a.art", src).unwrap()).unwrap()
    }

    #[test]
    fn single_update() {
        let c = corpus("def f := lit; def d := lit; def e := lit; thm t : uses f;");
        let deps = [edge("t", "d")];
        assert_eq!(train(&deps, &c, 0, &LearnConfig::default()).unwrap(), BayesModel::default());
        let m = train(&deps, &c, 4, &LearnConfig::default()).unwrap();
        assert_eq!(m.prior, BTreeMap::from([("d".to_string(), 1)]));
        assert_eq!(m.cooccurrence["d"]["f"], 1);
        assert!(train(&deps, &c, 5, &LearnConfig::default()).is_err());
        assert!(train(&[edge("t", "zz")], &c, 1, &LearnConfig::default()).is_err());
    }

    #[test]
    fn hand_computed_scores() {
        let mut m = BayesModel::default();
        m.update(&set(&["f"]), &set(&["d"]));
        let cfg = LearnConfig::default();
        let fv = set(&["f"]);
        // d: ln 2 + ln 2 - ln 2; e: ln 1 + ln 1 - ln 1.
        assert!((m.score("d", &fv, &cfg) - 2f64.ln()).abs() < 1e-12);
        assert!(m.score("e", &fv, &cfg).abs() < 1e-12);
        let c = corpus("def d := lit; def e := lit; thm q : uses d;");
        let items: Vec<&Item> = vec![c.get("e").unwrap(), c.get("d").unwrap()];
        let r = rank(&m, &FeatureVector { item: "q".into(), features: fv }, &items, &cfg);
        assert_eq!(r.ranking[0].0, "d");
        let rev: Vec<&Item> = items.iter().rev().copied().collect();
        assert_eq!(rank(&m, &features(c.get("q").unwrap()), &rev, &cfg).conjecture, "q");
    }

    #[test]
    fn ties_go_to_earlier_items() {
        let c = corpus("def a := lit; def b := lit; def x := lit;");
        let m = BayesModel::default();
        let fv = FeatureVector { item: "x".into(), features: BTreeSet::new() };
        let r = rank(&m, &fv, &[c.get("b").unwrap(), c.get("a").unwrap()], &LearnConfig::default());
        assert_eq!(r.ranking.iter().map(|p| p.0.as_str()).collect::<Vec<_>>(), vec!["a", "b"]);
    }

    #[test]
    fn symbol_matched_recall() {
        let mut src = String::new();
        for i in 0..5 {
            src.push_str(&format!("def d{i} := lit;\n"));
        }
        let mut deps = Vec::new();
        for j in 0..20 {
            let d = j % 5;
            src.push_str(&format!("thm t{j} : uses d{d};\n"));
            deps.push(edge(&format!("t{j}"), &format!("d{d}")));
        }
        let c = corpus(&src);
        let r = evaluate_chrono(&deps, &c, &[1, 100], &LearnConfig::default(), 42).unwrap();
        assert_eq!(r.evaluated, 20);
        assert_eq!(r.per_k[1].recall, 1.0);
        assert_eq!(r.per_k[1].baseline_recall, 1.0);
        // t0 wins the all-zero tie as d0 is earliest; t1..t4 need a definition
        // never seen as a premise and lose to d0; every later theorem hits.
        assert_eq!(r.per_k[0].recall, 16.0 / 20.0);
    }

    #[test]
    fn export_format() {
        let c = corpus("def d := lit; thm t : uses d; thm u : ;");
        let dir = tempfile::tempdir().unwrap();
        let files = export_problems(&[edge("t", "d")], &c, 0, &LearnConfig::default(), dir.path()).unwrap();
        assert_eq!(files.len(), 2);
        assert_eq!(fs::read_to_string(&files[0]).unwrap(), "conjecture t\n");
        let files = export_problems(&[edge("t", "d")], &c, 10, &LearnConfig::default(), dir.path()).unwrap();
        assert_eq!(fs::read_to_string(&files[0]).unwrap(), "conjecture t\npremise d definition\n");
    }
}
