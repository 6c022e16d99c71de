#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use depkit::corpus::{parse_corpus, print_file, Corpus, Environment, Item, Verdict};
use depkit::extract::Microarticle;
use depkit::generate::{generate, parse_generated, Family, GenConfig};
use depkit::normalize::normalize;

pub const FAMILIES: [Family; 5] = [Family::Chain, Family::Diamond, Family::Hints, Family::Symbols, Family::Mixed];

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn load_fixture(name: &str) -> Corpus {
    Corpus::new(normalize(parse_corpus(&fixture(name)).unwrap()).unwrap().items).unwrap()
}

pub fn generated(family: Family, items: usize, seed: u64) -> Corpus {
    let files = generate(&GenConfig::new(family, items, seed));
    Corpus::new(normalize(parse_generated(&files).unwrap()).unwrap().items).unwrap()
}

fn env_of(c: &Corpus, set: &[usize]) -> Environment {
    let mut env = Environment::default();
    for &i in set {
        env.push(&c.items()[i]);
    }
    env
}

/// Corpus indices of a microarticle's candidates, ascending.
pub fn candidates(c: &Corpus, m: &Microarticle) -> Vec<usize> {
    let mut v: Vec<usize> = m.candidate_env.names().map(|(_, n)| c.index_of(n).unwrap()).collect();
    v.sort_unstable();
    v
}

/// Enumerates every subset of the candidates, keeps the accepted ones that
/// have no accepted proper subset, and returns the smallest of those,
/// breaking ties by the lexicographically smallest sorted index list.
pub fn brute_force_minimum(c: &Corpus, m: &Microarticle) -> Environment {
    let cands = candidates(c, m);
    assert!(cands.len() <= 16, "brute force is exponential");
    let accepted: Vec<u32> = (0u32..1 << cands.len())
        .filter(|mask| {
            let set: Vec<usize> = (0..cands.len()).filter(|b| mask & (1 << b) != 0).map(|b| cands[b]).collect();
            c.check_item(&m.item, &env_of(c, &set), false).verdict.is_accepted()
        })
        .collect();
    let accepted_set: BTreeSet<u32> = accepted.iter().copied().collect();
    let minimal: Vec<Vec<usize>> = accepted
        .iter()
        .filter(|&&mask| {
            (0..cands.len())
                .filter(|b| mask & (1 << b) != 0)
                .all(|b| !has_accepted_subset(mask & !(1 << b), &accepted_set))
        })
        .map(|&mask| (0..cands.len()).filter(|b| mask & (1 << b) != 0).map(|b| cands[b]).collect())
        .collect();
    let best = minimal
        .into_iter()
        .min_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)))
        .expect("the full environment is accepted");
    env_of(c, &best)
}

/// Whether `mask` or any of its subsets is accepted.
fn has_accepted_subset(mask: u32, accepted: &BTreeSet<u32>) -> bool {
    let mut sub = mask;
    loop {
        if accepted.contains(&sub) {
            return true;
        }
        if sub == 0 {
            return false;
        }
        sub = (sub - 1) & mask;
    }
}

/// Every single-element removal from `env` is rejected.
pub fn is_one_minimal(c: &Corpus, m: &Microarticle, env: &Environment) -> bool {
    let names: Vec<(depkit::corpus::ItemKind, String)> = env.names().map(|(k, n)| (k, n.to_string())).collect();
    names.iter().all(|(kind, name)| {
        let mut smaller = env.clone();
        smaller.list_mut(*kind).retain(|n| n != name);
        !c.check_item(&m.item, &smaller, false).verdict.is_accepted()
    })
}

/// Per source node, every node reachable from it, by breadth-first search
/// over `(from, to)` index pairs.
pub fn brute_reach(n: usize, edges: &[(usize, usize)]) -> Vec<BTreeSet<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
    }
    (0..n)
        .map(|s| {
            let mut seen = BTreeSet::new();
            let mut queue = std::collections::VecDeque::from([s]);
            while let Some(v) = queue.pop_front() {
                for &u in &adj[v] {
                    if seen.insert(u) {
                        queue.push_back(u);
                    }
                }
            }
            seen
        })
        .collect()
}

/// Edges as corpus index pairs.
pub fn index_pairs(c: &Corpus, edges: &[depkit::corpus::DepEdge]) -> Vec<(usize, usize)> {
    edges.iter().map(|e| (c.index_of(&e.from).unwrap(), c.index_of(&e.to).unwrap())).collect()
}

/// Minimized edges of a corpus.
pub fn min_deps(c: &Corpus) -> Vec<depkit::corpus::DepEdge> {
    depkit::extract::min_edges(c, &depkit::extract::minimize_all(c, None, 1).unwrap())
}

pub fn verdicts(c: &Corpus) -> HashMap<String, Verdict> {
    c.items()
        .iter()
        .enumerate()
        .map(|(i, item)| (item.name.clone(), c.check_item(item, &c.prefix_env(i), false).verdict))
        .collect()
}

/// Each original item against the items it became: accepted iff all of
/// them are, otherwise the first rejection among them.
pub fn preserved(items: Vec<Item>) -> Result<(), String> {
    let before = Corpus::new(items.clone()).unwrap();
    let normalized = normalize(items).unwrap();
    let after = Corpus::new(normalized.items.clone()).unwrap();
    let (old, new) = (verdicts(&before), verdicts(&after));
    for item in before.items() {
        let descendants: Vec<String> = match normalized.renames.get(&item.name) {
            Some(label) => vec![label.clone()],
            None => item.provided_names().into_iter().map(str::to_string).collect(),
        };
        let combined = descendants.iter().map(|d| new[d]).find(|v| !v.is_accepted()).unwrap_or(Verdict::Accepted);
        if combined != old[&item.name] {
            return Err(format!("{}: {:?} became {:?}", item.name, old[&item.name], combined));
        }
    }
    let again = normalize(normalized.items.clone()).unwrap();
    if print_file(&again.items) != print_file(&normalized.items) {
        return Err("not idempotent".into());
    }
    Ok(())
}

pub fn depkit(cwd: &Path, args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_depkit")).current_dir(cwd).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap(), String::from_utf8(out.stderr).unwrap())
}

pub fn ok(cwd: &Path, args: &[&str]) -> String {
    let (code, out, err) = depkit(cwd, args);
    assert_eq!(code, 0, "{args:?}: {err}");
    out
}

/// Every file under `dir`, by relative path.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// Runs every experiment invocation in `cwd` and returns the concatenated
/// standard output.
pub fn pipeline(cwd: &Path, jobs: &str) -> String {
    let lib = fixture("library");
    let lib = lib.to_str().unwrap();
    let runs: Vec<Vec<&str>> = vec![
        vec!["gen", "--family", "mixed", "--items", "200", "--seed", "42", "-o", "gen"],
        vec!["gen", "--family", "symbols", "--items", "300", "--seed", "42", "-o", "sym"],
        vec!["normalize", lib, "norm"],
        vec!["extract", "--mode", "both", lib, "-o", "lib.jsonl", "--events", "lib.events", "--compare", "cmp.json"],
        vec!["extract", "--mode", "minimize", "gen", "-o", "gen.jsonl"],
        vec!["extract", "--mode", "trace", "gen", "-o", "gen-trace.jsonl"],
        vec!["extract", "sym", "-o", "sym.jsonl"],
        vec!["stats", "lib.jsonl", "--corpus", lib, "--kinds", "-o", "stats-item.json"],
        vec!["stats", "lib.jsonl", "--corpus", lib, "--granularity", "file", "-o", "stats-file.json"],
        vec!["stats", "gen.jsonl", "--corpus", "gen", "--method", "min"],
        vec!["totals", "--items", "9553", "--tdeps", "34974804"],
        vec!["export", "lib.jsonl", "--dot", "lib.dot"],
        vec!["cumulative", "gen.jsonl", "--corpus", "gen", "--csv", "cum.csv"],
        vec![
            "simulate",
            "--deps",
            "gen.jsonl",
            "--corpus",
            "gen",
            "--change",
            "d1:body",
            "--opacity",
            "-o",
            "sim.json",
        ],
        vec![
            "simulate",
            "--deps",
            "lib.jsonl",
            "--corpus",
            lib,
            "--change",
            "carrier",
            "--granularity",
            "file",
            "--execute",
            "norm",
            "-o",
            "sim-file.json",
        ],
        vec!["speedup", "--deps", "gen.jsonl", "--corpus", "gen", "-o", "speed.json"],
        vec!["speedup", "--deps", "gen.jsonl", "--corpus", "gen", "--exhaustive", "-o", "speed-all.json"],
        vec!["learn", "eval", "--deps", "sym.jsonl", "--corpus", "sym", "-o", "learn.json"],
        vec!["learn", "export", "--deps", "sym.jsonl", "--corpus", "sym", "-o", "problems"],
    ];
    let mut stdout = String::new();
    for args in runs {
        let mut full = vec!["--jobs", jobs];
        full.extend(args);
        stdout.push_str(&ok(cwd, &full));
    }
    stdout
}
