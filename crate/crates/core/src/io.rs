//! JSON-lines edge files.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, DepEdge, Environment, Opacity, Visibility};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Trace,
    Min,
}

/// One line of an edge file. Field order is the serialized order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub from: String,
    pub to: String,
    pub vis: Visibility,
    pub opacity: Opacity,
    pub method: Method,
}

impl EdgeRecord {
    pub fn new(edge: &DepEdge, method: Method) -> Self {
        EdgeRecord { from: edge.from.clone(), to: edge.to.clone(), vis: edge.visibility, opacity: edge.opacity, method }
    }

    pub fn edge(&self) -> DepEdge {
        DepEdge::new(&self.from, &self.to, self.vis, self.opacity)
    }
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub fn write_records(out: &mut dyn Write, records: &[EdgeRecord]) -> Result<(), IoError> {
    for r in records {
        serde_json::to_writer(&mut *out, r).map_err(|e| IoError::Io(e.into()))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads records, skipping blank lines.
pub fn read_records(input: &mut dyn BufRead) -> Result<Vec<EdgeRecord>, IoError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| IoError::Parse { line: i + 1, message: e.to_string() })?);
    }
    Ok(out)
}

/// Edges of one method. With `None`, minimized edges are preferred when the
/// file holds both methods.
pub fn select(records: &[EdgeRecord], method: Option<Method>) -> Vec<DepEdge> {
    let method = method.unwrap_or_else(|| {
        if records.iter().any(|r| r.method == Method::Min) {
            Method::Min
        } else {
            Method::Trace
        }
    });
    records.iter().filter(|r| r.method == method).map(EdgeRecord::edge).collect()
}

/// Per source item, the environment made of its edge targets that still
/// exist in `corpus`, in corpus order.
pub fn environments(corpus: &Corpus, edges: &[DepEdge]) -> HashMap<String, Environment> {
    let mut targets: HashMap<&str, Vec<usize>> = HashMap::new();
    for e in edges {
        let list = targets.entry(e.from.as_str()).or_default();
        if let Some(t) = corpus.index_of(&e.to) {
            list.push(t);
        }
    }
    targets
        .into_iter()
        .map(|(from, mut list)| {
            list.sort_unstable();
            list.dedup();
            let mut env = Environment::default();
            for t in list {
                env.push(&corpus.items()[t]);
            }
            (from.to_string(), env)
        })
        .collect()
}
