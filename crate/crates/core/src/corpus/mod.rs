//! The micro-article language: items, environments, parser and checker.
//!
//! A corpus is a directory of `.art` files. Each file is a sequence of
//! `;`-terminated statements, each statement one [`Item`]. Items may only
//! refer to items appearing earlier in corpus order, which is lexicographic
//! by file path and then by position inside the file.

mod check;
mod parse;
mod print;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use check::{CheckOutcome, RejectReason, Verdict};
pub use parse::{parse_corpus, parse_file, parse_source, BUILTINS, CORPUS_EXTENSION};
pub use print::{print_file, print_item};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ItemKind {
    Definition,
    Theorem,
    Notation,
    Hint,
    Reservation,
}

impl ItemKind {
    pub const ALL: [ItemKind; 5] =
        [ItemKind::Definition, ItemKind::Theorem, ItemKind::Notation, ItemKind::Hint, ItemKind::Reservation];

    pub fn as_str(self) -> &'static str {
        match self {
            ItemKind::Definition => "definition",
            ItemKind::Theorem => "theorem",
            ItemKind::Notation => "notation",
            ItemKind::Hint => "hint",
            ItemKind::Reservation => "reservation",
        }
    }
}

impl fmt::Display for ItemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Opacity {
    Opaque,
    Transparent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Visibility {
    Explicit,
    Implicit,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Justification {
    None,
    ByRefs(Vec<String>),
    Auto,
}

/// One clause of a theorem statement, kept in source order for printing.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Clause {
    Uses(String),
    Var(String),
}

/// Marks a statement written with a leading `then`.
///
/// `previous` names the statement immediately before it in the same file,
/// or is `None` when the `then` opens the file.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ThenLink {
    pub previous: Option<String>,
}

/// Surface form of an item, used for printing and rewriting.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Form {
    Def {
        types: Vec<String>,
        body: Vec<String>,
    },
    /// A `defblock`; every member is a standalone definition item.
    Block {
        members: Vec<Item>,
    },
    Thm {
        clauses: Vec<Clause>,
    },
    Notation {
        target: String,
    },
    Hint {
        symbols: Vec<String>,
    },
    /// `(variable, type)` segments of one `reserve` statement.
    Reserve {
        segments: Vec<(String, String)>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Item {
    pub name: String,
    pub kind: ItemKind,
    pub statement_symbols: BTreeSet<String>,
    pub justification: Justification,
    pub body_symbols: BTreeSet<String>,
    pub opacity: Opacity,
    pub source_file: String,
    pub index_in_file: usize,
    /// Free variable markers (`var x`) of a theorem statement.
    pub vars: BTreeSet<String>,
    /// Notation tokens used anywhere in the item.
    pub notations: BTreeSet<String>,
    /// Theorem written without a label; `name` is then a placeholder.
    pub anonymous: bool,
    /// Whether the opacity was spelled out with a keyword.
    pub opacity_keyword: bool,
    pub link: Option<ThenLink>,
    pub form: Form,
}

impl Item {
    /// Position in corpus order.
    pub fn order_key(&self) -> (&str, usize) {
        (&self.source_file, self.index_in_file)
    }

    /// Every name that this item makes available to later items: its own
    /// name, block member names and reserved variables.
    pub fn provided_names(&self) -> Vec<&str> {
        let mut names = vec![self.name.as_str()];
        match &self.form {
            Form::Block { members } => {
                names.clear();
                names.extend(members.iter().map(|m| m.name.as_str()));
            }
            Form::Reserve { segments } => {
                names.clear();
                names.extend(segments.iter().map(|(v, _)| v.as_str()));
            }
            _ => {}
        }
        names
    }

    /// Identifiers that appear literally in the item's text.
    pub fn mentions(&self, name: &str) -> bool {
        self.statement_symbols.contains(name)
            || self.body_symbols.contains(name)
            || self.vars.contains(name)
            || self.notations.contains(name)
            || match &self.justification {
                Justification::ByRefs(refs) => refs.iter().any(|r| r == name),
                _ => false,
            }
    }

    /// Rebuilds the derived symbol sets from `form`.
    pub(crate) fn refresh_symbols(&mut self) {
        let mut statement = BTreeSet::new();
        let mut body = BTreeSet::new();
        let mut vars = BTreeSet::new();
        let mut notations = BTreeSet::new();
        let sort = |tok: &str, into: &mut BTreeSet<String>, notations: &mut BTreeSet<String>| {
            if parse::is_operator(tok) {
                notations.insert(tok.to_string());
            } else if !BUILTINS.contains(&tok) {
                into.insert(tok.to_string());
            }
        };
        match &mut self.form {
            Form::Def { types, body: b } => {
                for t in types.iter() {
                    sort(t, &mut statement, &mut notations);
                }
                for t in b.iter() {
                    sort(t, &mut body, &mut notations);
                }
            }
            Form::Block { members } => {
                for m in members.iter_mut() {
                    m.refresh_symbols();
                    statement.extend(m.statement_symbols.iter().cloned());
                    body.extend(m.body_symbols.iter().cloned());
                    notations.extend(m.notations.iter().cloned());
                }
            }
            Form::Thm { clauses } => {
                for c in clauses.iter() {
                    match c {
                        Clause::Uses(t) => sort(t, &mut statement, &mut notations),
                        Clause::Var(v) => {
                            vars.insert(v.clone());
                        }
                    }
                }
            }
            Form::Notation { target } => sort(target, &mut statement, &mut notations),
            Form::Hint { symbols } => {
                for t in symbols.iter() {
                    sort(t, &mut statement, &mut notations);
                }
            }
            Form::Reserve { segments } => {
                for (_, ty) in segments.iter() {
                    sort(ty, &mut statement, &mut notations);
                }
            }
        }
        self.statement_symbols = statement;
        self.body_symbols = body;
        self.vars = vars;
        self.notations = notations;
    }
}

/// Per-kind ordered lists of item names available while checking an item.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Environment {
    pub definitions: Vec<String>,
    pub theorems: Vec<String>,
    pub notations: Vec<String>,
    pub hints: Vec<String>,
    pub reservations: Vec<String>,
}

impl Environment {
    pub fn list(&self, kind: ItemKind) -> &Vec<String> {
        match kind {
            ItemKind::Definition => &self.definitions,
            ItemKind::Theorem => &self.theorems,
            ItemKind::Notation => &self.notations,
            ItemKind::Hint => &self.hints,
            ItemKind::Reservation => &self.reservations,
        }
    }

    pub fn list_mut(&mut self, kind: ItemKind) -> &mut Vec<String> {
        match kind {
            ItemKind::Definition => &mut self.definitions,
            ItemKind::Theorem => &mut self.theorems,
            ItemKind::Notation => &mut self.notations,
            ItemKind::Hint => &mut self.hints,
            ItemKind::Reservation => &mut self.reservations,
        }
    }

    /// Appends `item` to the list of its kind unless already present.
    pub fn push(&mut self, item: &Item) {
        let list = self.list_mut(item.kind);
        if !list.iter().any(|n| n == &item.name) {
            list.push(item.name.clone());
        }
    }

    pub fn len(&self) -> usize {
        ItemKind::ALL.iter().map(|k| self.list(*k).len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, kind: ItemKind, name: &str) -> bool {
        self.list(kind).iter().any(|n| n == name)
    }

    /// True when every list of `self` is an order-preserving sublist of the
    /// corresponding list of `other`.
    pub fn is_sublist_of(&self, other: &Environment) -> bool {
        ItemKind::ALL.iter().all(|k| {
            let mut it = other.list(*k).iter();
            self.list(*k).iter().all(|n| it.any(|m| m == n))
        })
    }

    pub fn names(&self) -> impl Iterator<Item = (ItemKind, &str)> {
        ItemKind::ALL.into_iter().flat_map(move |k| self.list(k).iter().map(move |n| (k, n.as_str())))
    }
}

/// How a dependency edge came about during checking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Statement,
    Body,
    Justification,
    Link,
    Reservation,
    ReservationType,
    Hint,
    Notation,
    /// Edge derived from a minimized environment.
    Minimized,
    /// Edge of a transitive closure.
    Closure,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DepEdge {
    pub from: String,
    pub to: String,
    pub visibility: Visibility,
    pub opacity: Opacity,
    pub origins: BTreeSet<Origin>,
}

impl DepEdge {
    pub fn new(from: &str, to: &str, visibility: Visibility, opacity: Opacity) -> Self {
        DepEdge { from: from.to_string(), to: to.to_string(), visibility, opacity, origins: BTreeSet::new() }
    }

    pub fn key(&self) -> (&str, &str) {
        (&self.from, &self.to)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CorpusError {
    #[error("{file}:{line}: syntax error: {message}")]
    Syntax { file: String, line: usize, message: String },
    #[error("duplicate name `{name}` (first in {first_file}, again in {second_file})")]
    DuplicateName { name: String, first_file: String, second_file: String },
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

/// An immutable, indexed corpus. Checking always happens against one.
#[derive(Debug, Clone)]
pub struct Corpus {
    items: Vec<Item>,
    by_name: HashMap<String, usize>,
    /// Symbol name to the definition or theorem item that provides it.
    providers: HashMap<String, usize>,
    /// Reserved variable to its reservation item.
    reserved: HashMap<String, usize>,
    /// Notation token to its notation item.
    notation_items: HashMap<String, usize>,
    hints: Vec<usize>,
}

impl Corpus {
    /// Indexes `items`, which must already be in corpus order.
    pub fn new(items: Vec<Item>) -> Result<Self, CorpusError> {
        check_unique(&items)?;
        let mut by_name = HashMap::new();
        let mut providers = HashMap::new();
        let mut reserved = HashMap::new();
        let mut notation_items = HashMap::new();
        let mut hints = Vec::new();
        for (idx, item) in items.iter().enumerate() {
            by_name.insert(item.name.clone(), idx);
            match item.kind {
                ItemKind::Definition | ItemKind::Theorem => {
                    for n in item.provided_names() {
                        providers.insert(n.to_string(), idx);
                    }
                }
                ItemKind::Reservation => {
                    for n in item.provided_names() {
                        reserved.insert(n.to_string(), idx);
                    }
                }
                ItemKind::Notation => {
                    notation_items.insert(item.name.clone(), idx);
                }
                ItemKind::Hint => hints.push(idx),
            }
        }
        Ok(Corpus { items, by_name, providers, reserved, notation_items, hints })
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn into_items(self) -> Vec<Item> {
        self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Item> {
        self.by_name.get(name).map(|&i| &self.items[i])
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    /// The environment of everything before position `idx`.
    pub fn prefix_env(&self, idx: usize) -> Environment {
        let mut env = Environment::default();
        for item in &self.items[..idx] {
            env.push(item);
        }
        env
    }

    /// Files in corpus order with their items.
    pub fn files(&self) -> BTreeMap<&str, Vec<usize>> {
        let mut files: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, item) in self.items.iter().enumerate() {
            files.entry(item.source_file.as_str()).or_default().push(i);
        }
        files
    }
}

/// Names must be unique corpus-wide, counting block members and reserved
/// variables as names.
pub(crate) fn check_unique(items: &[Item]) -> Result<(), CorpusError> {
    let mut seen: HashMap<&str, &str> = HashMap::new();
    for item in items {
        let mut names = item.provided_names();
        if !names.contains(&item.name.as_str()) {
            names.push(&item.name);
        }
        for name in names {
            if let Some(first) = seen.insert(name, &item.source_file) {
                return Err(CorpusError::DuplicateName {
                    name: name.to_string(),
                    first_file: first.to_string(),
                    second_file: item.source_file.clone(),
                });
            }
        }
    }
    Ok(())
}
