//! The `depkit` command line.
//!
//! Exit codes: 0 on success, 1 on domain errors, 2 on usage errors. Data goes
//! to files or `out`, diagnostics to `err`.

use std::collections::BTreeMap;
use std::error::Error;
use std::ffi::OsString;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::corpus::{parse_corpus, print_file, Corpus, DepEdge, ItemKind};
use crate::extract::{compare_methods, min_edges, minimize_all, trace_extract};
use crate::generate::{generate, write_corpus, Family, GenConfig};
use crate::graph::{
    build_graph, cumulative_csv, kind_table, reverse_cumulative, stats, to_dot, Granularity, GraphStats, KindCounts,
};
use crate::io::{environments, read_records, select, write_records, EdgeRecord, Method};
use crate::learn::{evaluate_chrono, export_problems, LearnConfig};
use crate::normalize::{by_file, normalize};
use crate::rebuild::{execute, plan, speedup_report, ChangeKind, ChangeSet, Sampling};

type Res<T> = Result<T, Box<dyn Error>>;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(name = "depkit", version, about = "Fine-grained dependency extraction and analysis for .art corpora")]
struct Cli {
    /// Worker threads; output does not depend on it.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    jobs: u32,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rewrite a corpus so that every dependency is individually removable.
    Normalize {
        input: PathBuf,
        /// Receives the rewritten files and `report.json`.
        output: PathBuf,
    },
    /// Extract per-item dependencies into a JSON-lines edge file.
    Extract {
        dir: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Both)]
        mode: Mode,
        #[arg(short, long)]
        output: PathBuf,
        /// Trace event stream, one line per item.
        #[arg(long)]
        events: Option<PathBuf>,
        /// Per-item comparison of the two methods (JSON); needs `--mode both`.
        #[arg(long)]
        compare: Option<PathBuf>,
        /// Use the corpus as written, without normalizing it first.
        #[arg(long)]
        raw: bool,
    },
    /// Graph statistics as an aligned table, and optionally JSON.
    Stats {
        deps: PathBuf,
        #[command(flatten)]
        graph: GraphArgs,
        /// Also print per-kind direct edge counts.
        #[arg(long)]
        kinds: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Derive percentages and averages from published totals.
    Totals {
        #[arg(long)]
        items: u64,
        #[arg(long)]
        tdeps: u64,
        #[arg(long, default_value_t = 0)]
        deps: u64,
    },
    /// Write the graph in Graphviz format.
    Export {
        deps: PathBuf,
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        dot: PathBuf,
    },
    /// Cumulative transitive reverse-dependency counts as CSV.
    Cumulative {
        deps: PathBuf,
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        csv: PathBuf,
    },
    /// Plan (and optionally run) the re-checks caused by edits.
    Simulate {
        #[arg(long)]
        deps: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// `name`, `name:body` or `name:stmt` (the default); repeatable.
        #[arg(long = "change", required = true)]
        changes: Vec<String>,
        /// Stop at body-only changes of opaque items.
        #[arg(long)]
        opacity: bool,
        #[arg(long, value_enum, default_value_t = Granularity::Item)]
        granularity: Granularity,
        #[arg(long, value_enum)]
        method: Option<Method>,
        /// Check the plan against this (edited) corpus.
        #[arg(long)]
        execute: Option<PathBuf>,
        /// Recompute environments instead of using the stored ones.
        #[arg(long, requires = "execute")]
        reminimize: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Mean and median re-check costs of random single-item changes.
    Speedup {
        #[arg(long)]
        deps: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        /// Change every item once instead of sampling.
        #[arg(long)]
        exhaustive: bool,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, value_enum)]
        method: Option<Method>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Premise ranking from extracted dependencies.
    Learn {
        #[command(subcommand)]
        command: LearnCommand,
    },
    /// Write a synthetic corpus.
    Gen {
        #[arg(long, value_enum, default_value_t = Family::Mixed)]
        family: Family,
        #[arg(long)]
        items: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        items_per_file: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum LearnCommand {
    /// Chronological recall against a seeded random baseline.
    Eval {
        #[command(flatten)]
        learn: LearnArgs,
        /// Comma-separated cutoffs.
        #[arg(long, value_delimiter = ',', default_value = "1,10,50")]
        k: Vec<usize>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// One premise-list problem file per theorem.
    Export {
        #[command(flatten)]
        learn: LearnArgs,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Debug, Args)]
struct LearnArgs {
    #[arg(long)]
    deps: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_enum)]
    method: Option<Method>,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    weight: f64,
    #[arg(long)]
    explicit_only: bool,
}

#[derive(Debug, Args)]
struct GraphArgs {
    /// Corpus the edges were extracted from; required for file granularity.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Granularity::Item)]
    granularity: Granularity,
    /// Which edges to use when the file holds both; minimized by default.
    #[arg(long, value_enum)]
    method: Option<Method>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Trace,
    Minimize,
    Both,
}

/// Parses and runs one invocation.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let stream: &mut dyn Write = if code == 0 { out } else { err };
            let _ = write!(stream, "{}", e.render());
            return if code == 0 { 0 } else { 2 };
        }
    };
    match dispatch(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn io_context(path: &Path, e: std::io::Error) -> String {
    format!("{}: {e}", path.display())
}

fn write_file(path: &Path, data: &[u8]) -> Res<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_context(parent, e))?;
    }
    fs::write(path, data).map_err(|e| io_context(path, e))?;
    Ok(())
}

fn json<T: Serialize>(value: &T) -> Res<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn emit(out: &mut dyn Write, path: Option<&Path>, text: &str) -> Res<()> {
    match path {
        Some(p) => write_file(p, text.as_bytes()),
        None => Ok(out.write_all(text.as_bytes())?),
    }
}

/// Parses and normalizes a corpus directory.
pub fn load_corpus(dir: &Path, normalized: bool) -> Res<Corpus> {
    let items = parse_corpus(dir)?;
    let items = if normalized { normalize(items)?.items } else { items };
    Ok(Corpus::new(items)?)
}

fn load_edges(path: &Path, method: Option<Method>) -> Res<Vec<DepEdge>> {
    let file = fs::File::open(path).map_err(|e| io_context(path, e))?;
    let records = read_records(&mut BufReader::new(file))?;
    Ok(select(&records, method))
}

fn graph_from(args: &GraphArgs, deps: &Path) -> Res<crate::graph::DepGraph> {
    let edges = load_edges(deps, args.method)?;
    match &args.corpus {
        Some(dir) => Ok(build_graph(&load_corpus(dir, true)?, &edges, args.granularity)?),
        None if args.granularity == Granularity::Item => Ok(crate::graph::DepGraph::from_edges(&edges)?),
        None => Err("file granularity needs --corpus".into()),
    }
}

fn parse_change(arg: &str) -> Res<(String, ChangeKind)> {
    let (name, kind) = match arg.rsplit_once(':') {
        Some((n, "body")) => (n, ChangeKind::BodyOnly),
        Some((n, "stmt")) => (n, ChangeKind::StatementOrType),
        Some((_, other)) => return Err(format!("unknown change kind `{other}` (expected body or stmt)").into()),
        None => (arg, ChangeKind::StatementOrType),
    };
    Ok((name.to_string(), kind))
}

#[derive(Serialize)]
struct StatsOutput {
    granularity: Granularity,
    stats: GraphStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    kinds: Option<BTreeMap<ItemKind, KindCounts>>,
}

#[derive(Serialize)]
struct SimulateOutput {
    plan: crate::rebuild::RebuildPlan,
    #[serde(skip_serializing_if = "Option::is_none")]
    execution: Option<crate::rebuild::ExecutionReport>,
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Res<()> {
    let jobs = cli.jobs as usize;
    match cli.command {
        Command::Normalize { input, output } => {
            let normalized = normalize(parse_corpus(&input)?)?;
            Corpus::new(normalized.items.clone())?;
            for (file, items) in by_file(&normalized.items) {
                write_file(&output.join(file), print_file(items).as_bytes())?;
            }
            write_file(&output.join("report.json"), json(&normalized.reports)?.as_bytes())
        }
        Command::Extract { dir, mode, output, events, compare, raw } => {
            let corpus = load_corpus(&dir, !raw)?;
            let mut records = Vec::new();
            let trace = match mode {
                Mode::Trace | Mode::Both => Some(trace_extract(&corpus, jobs)?),
                Mode::Minimize => None,
            };
            if let Some(t) = &trace {
                records.extend(t.edges.iter().map(|e| EdgeRecord::new(e, Method::Trace)));
                if let Some(path) = &events {
                    write_file(path, (t.events.join("\n") + "\n").as_bytes())?;
                }
            } else if events.is_some() {
                return Err("--events needs a trace (--mode trace or both)".into());
            }
            if mode != Mode::Trace {
                let results = minimize_all(&corpus, trace.as_ref().map(|t| t.edges.as_slice()), jobs)?;
                records.extend(min_edges(&corpus, &results).iter().map(|e| EdgeRecord::new(e, Method::Min)));
                if let (Some(path), Some(t)) = (&compare, &trace) {
                    write_file(path, json(&compare_methods(&t.edges, &results)?)?.as_bytes())?;
                }
            }
            if compare.is_some() && mode != Mode::Both {
                return Err("--compare needs --mode both".into());
            }
            let mut buf = Vec::new();
            write_records(&mut buf, &records)?;
            write_file(&output, &buf)
        }
        Command::Stats { deps, graph, kinds, output } => {
            let g = graph_from(&graph, &deps)?;
            let s = stats(&g);
            let kinds = if kinds && g.granularity() == Granularity::Item { Some(kind_table(&g)?) } else { None };
            let mut table = s.table(match g.granularity() {
                Granularity::Item => "item",
                Granularity::File => "file",
            });
            if let Some(k) = &kinds {
                table.push_str(&format!("\n{:<12} {:>8} {:>8}\n", "kind", "from", "to"));
                for (kind, c) in k {
                    table.push_str(&format!("{:<12} {:>8} {:>8}\n", kind.as_str(), c.from_count, c.to_count));
                }
            }
            out.write_all(table.as_bytes())?;
            if let Some(path) = output {
                write_file(&path, json(&StatsOutput { granularity: g.granularity(), stats: s, kinds })?.as_bytes())?;
            }
            Ok(())
        }
        Command::Totals { items, tdeps, deps } => {
            let s = GraphStats::from_totals(items, deps, tdeps, &[]);
            out.write_all(format!("P(%) {:.1}\nARL  {:.1}\n", s.p, s.arl).as_bytes())?;
            Ok(())
        }
        Command::Export { deps, graph, dot } => write_file(&dot, to_dot(&graph_from(&graph, &deps)?).as_bytes()),
        Command::Cumulative { deps, graph, csv } => {
            write_file(&csv, cumulative_csv(&reverse_cumulative(&graph_from(&graph, &deps)?)).as_bytes())
        }
        Command::Simulate {
            deps,
            corpus,
            changes,
            opacity,
            granularity,
            method,
            execute: edited,
            reminimize,
            output,
        } => {
            let edges = load_edges(&deps, method)?;
            let before = load_corpus(&corpus, true)?;
            let g = build_graph(&before, &edges, Granularity::Item)?;
            let set = ChangeSet::new(changes.iter().map(|c| parse_change(c)).collect::<Res<Vec<_>>>()?)?;
            let p = plan(&g, &set, granularity, opacity)?;
            let execution = match edited {
                Some(dir) => {
                    let after = load_corpus(&dir, true)?;
                    let mut stored = environments(&after, &edges);
                    for item in before.items() {
                        stored.entry(item.name.clone()).or_default();
                    }
                    Some(execute(&p, &after, &stored, reminimize, jobs))
                }
                None => None,
            };
            emit(out, output.as_deref(), &json(&SimulateOutput { plan: p, execution })?)
        }
        Command::Speedup { deps, corpus, samples, exhaustive, seed, method, output } => {
            let c = load_corpus(&corpus, true)?;
            let g = build_graph(&c, &load_edges(&deps, method)?, Granularity::Item)?;
            let sampling = if exhaustive { Sampling::Exhaustive } else { Sampling::Random { samples, seed } };
            emit(out, output.as_deref(), &json(&speedup_report(&g, sampling)?)?)
        }
        Command::Learn { command } => match command {
            LearnCommand::Eval { learn, k, seed, output } => {
                let (c, edges, cfg) = learn_inputs(&learn)?;
                emit(out, output.as_deref(), &json(&evaluate_chrono(&edges, &c, &k, &cfg, seed)?)?)
            }
            LearnCommand::Export { learn, k, output } => {
                let (c, edges, cfg) = learn_inputs(&learn)?;
                let files = export_problems(&edges, &c, k, &cfg, &output)?;
                writeln!(out, "{} problems written to {}", files.len(), output.display())?;
                Ok(())
            }
        },
        Command::Gen { family, items, seed, items_per_file, output } => {
            let files = generate(&GenConfig { family, items, seed, items_per_file });
            write_corpus(&output, &files).map_err(|e| io_context(&output, e))?;
            Ok(())
        }
    }
}

fn learn_inputs(args: &LearnArgs) -> Res<(Corpus, Vec<DepEdge>, LearnConfig)> {
    let c = load_corpus(&args.corpus, true)?;
    let edges = load_edges(&args.deps, args.method)?;
    let cfg = LearnConfig { alpha: args.alpha, weight: args.weight, explicit_only: args.explicit_only };
    if cfg.alpha.is_nan() || cfg.alpha <= 0.0 {
        return Err("--alpha must be positive".into());
    }
    Ok((c, edges, cfg))
}
