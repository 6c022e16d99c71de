//! The deterministic checker.
//!
//! An item is accepted when everything it mentions resolves in the
//! environment: symbols to definitions or theorems, `by` references to
//! definitions or theorems, free variables to reservations (whose types must
//! resolve too), notation tokens to notations, and `by auto` to at least one
//! applicable hint. Acceptance is monotone in the environment.
//!
//! In trace mode every resolution is recorded as an edge. Automation is
//! recorded exhaustively: every applicable hint gets an edge even though one
//! suffices.

use std::collections::BTreeMap;
use std::fmt;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use super::{Corpus, DepEdge, Environment, Form, Item, ItemKind, Justification, Origin, Visibility};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RejectReason {
    UnresolvedSymbol,
    MissingReservation,
    NoApplicableHint,
    MissingNotation,
    BadJustification,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RejectReason::UnresolvedSymbol => "UnresolvedSymbol",
            RejectReason::MissingReservation => "MissingReservation",
            RejectReason::NoApplicableHint => "NoApplicableHint",
            RejectReason::MissingNotation => "MissingNotation",
            RejectReason::BadJustification => "BadJustification",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Accepted,
    Rejected(RejectReason),
}

impl Verdict {
    pub fn is_accepted(self) -> bool {
        self == Verdict::Accepted
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CheckOutcome {
    pub verdict: Verdict,
    /// Empty unless tracing was requested and the item was accepted.
    pub trace: Vec<DepEdge>,
}

/// Collects resolutions keyed by target corpus index.
struct Tracer<'a> {
    corpus: &'a Corpus,
    item: &'a Item,
    enabled: bool,
    edges: BTreeMap<usize, DepEdge>,
}

impl Tracer<'_> {
    fn record(&mut self, target: usize, origin: Origin) {
        if !self.enabled {
            return;
        }
        let t = &self.corpus.items[target];
        let edge = self.edges.entry(target).or_insert_with(|| {
            let vis = if self.item.mentions(&t.name) { Visibility::Explicit } else { Visibility::Implicit };
            DepEdge::new(&self.item.name, &t.name, vis, t.opacity)
        });
        edge.origins.insert(origin);
    }
}

/// The non-builtin type of `var` in reservation `r`.
fn segment_type<'a>(r: &'a Item, var: &str) -> Option<&'a str> {
    match &r.form {
        Form::Reserve { segments } => segments
            .iter()
            .find(|(v, _)| v == var)
            .map(|(_, ty)| ty.as_str())
            .filter(|ty| !super::BUILTINS.contains(ty)),
        _ => None,
    }
}

impl Corpus {
    /// Checks `item` under `env`. Names in `env` that are unknown to the
    /// corpus, or filed under the wrong kind, are ignored.
    pub fn check_item(&self, item: &Item, env: &Environment, trace_requested: bool) -> CheckOutcome {
        let scope = self.scope_of(env);
        self.check_in_scope(item, &scope, trace_requested)
    }

    /// Membership set over corpus indices for `env`.
    pub(crate) fn scope_of(&self, env: &Environment) -> FixedBitSet {
        let mut scope = FixedBitSet::with_capacity(self.items.len());
        for (kind, name) in env.names() {
            if let Some(&idx) = self.by_name.get(name) {
                if self.items[idx].kind == kind {
                    scope.insert(idx);
                }
            }
        }
        scope
    }

    pub(crate) fn check_in_scope(&self, item: &Item, scope: &FixedBitSet, trace_requested: bool) -> CheckOutcome {
        let mut tracer = Tracer { corpus: self, item, enabled: trace_requested, edges: BTreeMap::new() };
        match self.verdict(item, scope, &mut tracer) {
            Ok(()) => CheckOutcome { verdict: Verdict::Accepted, trace: tracer.edges.into_values().collect() },
            Err(reason) => CheckOutcome { verdict: Verdict::Rejected(reason), trace: Vec::new() },
        }
    }

    fn provider_in(&self, symbol: &str, scope: &FixedBitSet) -> Option<usize> {
        self.providers.get(symbol).copied().filter(|&i| scope.contains(i))
    }

    fn verdict(&self, item: &Item, scope: &FixedBitSet, tracer: &mut Tracer) -> Result<(), RejectReason> {
        if let Form::Block { members } = &item.form {
            return self.block_verdict(members, scope, tracer);
        }
        // (a) symbols of statement and body
        for (symbols, origin) in [(&item.statement_symbols, Origin::Statement), (&item.body_symbols, Origin::Body)] {
            for s in symbols {
                let p = self.provider_in(s, scope).ok_or(RejectReason::UnresolvedSymbol)?;
                tracer.record(p, origin);
            }
        }
        // (b) explicit references and `then` links
        if let Justification::ByRefs(refs) = &item.justification {
            for r in refs {
                let p = self.provider_in(r, scope).ok_or(RejectReason::BadJustification)?;
                tracer.record(p, Origin::Justification);
            }
        }
        if let Some(link) = &item.link {
            let prev = link.previous.as_deref().ok_or(RejectReason::BadJustification)?;
            let p = self
                .by_name
                .get(prev)
                .copied()
                .filter(|&i| {
                    scope.contains(i) && matches!(self.items[i].kind, ItemKind::Definition | ItemKind::Theorem)
                })
                .ok_or(RejectReason::BadJustification)?;
            tracer.record(p, Origin::Link);
        }
        // (c) reservations and the type of the variable's own segment
        for v in &item.vars {
            let r =
                self.reserved.get(v).copied().filter(|&i| scope.contains(i)).ok_or(RejectReason::MissingReservation)?;
            tracer.record(r, Origin::Reservation);
            if let Some(ty) = segment_type(&self.items[r], v) {
                let p = self.provider_in(ty, scope).ok_or(RejectReason::UnresolvedSymbol)?;
                tracer.record(p, Origin::ReservationType);
            }
        }
        // (d) automation: any applicable hint suffices, all are traced
        if item.justification == Justification::Auto {
            let mut applicable = 0;
            for &h in &self.hints {
                if scope.contains(h) && !self.items[h].statement_symbols.is_disjoint(&item.statement_symbols) {
                    applicable += 1;
                    tracer.record(h, Origin::Hint);
                }
            }
            if applicable == 0 {
                return Err(RejectReason::NoApplicableHint);
            }
        }
        // (e) notation tokens
        for tok in &item.notations {
            let n = self
                .notation_items
                .get(tok)
                .copied()
                .filter(|&i| scope.contains(i))
                .ok_or(RejectReason::MissingNotation)?;
            tracer.record(n, Origin::Notation);
        }
        Ok(())
    }

    /// A block checks each member in turn; members may use earlier members.
    fn block_verdict(&self, members: &[Item], scope: &FixedBitSet, tracer: &mut Tracer) -> Result<(), RejectReason> {
        for (i, m) in members.iter().enumerate() {
            let local = |s: &str| members[..i].iter().any(|e| e.name == s);
            for (symbols, origin) in [(&m.statement_symbols, Origin::Statement), (&m.body_symbols, Origin::Body)] {
                for s in symbols {
                    if local(s) {
                        continue;
                    }
                    let p = self.provider_in(s, scope).ok_or(RejectReason::UnresolvedSymbol)?;
                    tracer.record(p, origin);
                }
            }
            for tok in &m.notations {
                let n = self
                    .notation_items
                    .get(tok)
                    .copied()
                    .filter(|&i| scope.contains(i))
                    .ok_or(RejectReason::MissingNotation)?;
                tracer.record(n, Origin::Notation);
            }
        }
        Ok(())
    }
}
