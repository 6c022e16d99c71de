//! Source rewrites that make every dependency individually removable.
//!
//! Three passes run in a fixed order: definition blocks are split into
//! standalone definitions, `then` links become explicit `by` references, and
//! multi-variable reservations are split into one reservation per variable.
//! None of them changes which items verify under their full environment.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Form, Item, Justification};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriteReport {
    pub blocks_split: usize,
    pub links_rewritten: usize,
    pub reservations_split: usize,
    pub fresh_labels: Vec<String>,
}

/// Reports keyed by source file.
pub type Reports = BTreeMap<String, RewriteReport>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NormalizeError {
    #[error("{file}: `then` on the first statement of the file has nothing to link to")]
    DanglingThen { file: String },
    #[error("{file}: `{item}` is linked with `then` and also justified `by auto`")]
    ThenWithAuto { file: String, item: String },
}

#[derive(Debug, Clone)]
pub struct Normalized {
    pub items: Vec<Item>,
    pub reports: Reports,
    /// Placeholder names of anonymous theorems to their generated labels.
    pub renames: BTreeMap<String, String>,
}

fn renumber(items: &mut [Item]) {
    let mut file: Option<String> = None;
    let mut next = 0;
    for item in items.iter_mut() {
        if file.as_deref() != Some(item.source_file.as_str()) {
            file = Some(item.source_file.clone());
            next = 0;
        }
        item.index_in_file = next;
        if let Form::Block { members } = &mut item.form {
            for m in members {
                m.index_in_file = next;
            }
        }
        next += 1;
    }
}

fn report<'a>(reports: &'a mut Reports, file: &str) -> &'a mut RewriteReport {
    reports.entry(file.to_string()).or_default()
}

/// Replaces every `defblock` by its member definitions, in place.
pub fn split_definition_blocks(items: Vec<Item>, reports: &mut Reports) -> Vec<Item> {
    let mut out = Vec::with_capacity(items.len());
    for item in items {
        match item.form {
            Form::Block { members } => {
                report(reports, &item.source_file).blocks_split += 1;
                out.extend(members);
            }
            _ => {
                report(reports, &item.source_file);
                out.push(item);
            }
        }
    }
    renumber(&mut out);
    out
}

fn label_tag(file: &str) -> String {
    let stem = file.strip_suffix(".art").unwrap_or(file);
    stem.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect()
}

/// Rewrites `then thm b` into `thm b ... by a`, where `a` is the statement
/// right before it. Anonymous theorems receive fresh labels first, so that
/// every statement can be referenced by name.
pub fn explicit_linking(
    mut items: Vec<Item>,
    reports: &mut Reports,
    renames: &mut BTreeMap<String, String>,
) -> Result<Vec<Item>, NormalizeError> {
    let mut used: HashSet<String> =
        items.iter().flat_map(|i| i.provided_names().into_iter().map(str::to_string)).collect();
    let mut counters: BTreeMap<String, usize> = BTreeMap::new();
    for i in 0..items.len() {
        let file = items[i].source_file.clone();
        if items[i].anonymous {
            let counter = counters.entry(file.clone()).or_insert(0);
            let tag = label_tag(&file);
            let label = loop {
                let candidate = format!("__n{}_{}", *counter, tag);
                *counter += 1;
                if !used.contains(&candidate) {
                    break candidate;
                }
            };
            used.insert(label.clone());
            renames.insert(items[i].name.clone(), label.clone());
            report(reports, &file).fresh_labels.push(label.clone());
            items[i].name = label;
            items[i].anonymous = false;
        }
        if items[i].link.is_none() {
            report(reports, &file);
            continue;
        }
        let first_in_file = i == 0 || items[i - 1].source_file != file;
        if first_in_file {
            return Err(NormalizeError::DanglingThen { file });
        }
        let previous = items[i - 1].name.clone();
        let item = &mut items[i];
        item.justification = match std::mem::replace(&mut item.justification, Justification::None) {
            Justification::None => Justification::ByRefs(vec![previous]),
            Justification::ByRefs(mut refs) => {
                if !refs.contains(&previous) {
                    refs.push(previous);
                }
                Justification::ByRefs(refs)
            }
            Justification::Auto => return Err(NormalizeError::ThenWithAuto { file, item: item.name.clone() }),
        };
        item.link = None;
        report(reports, &file).links_rewritten += 1;
    }
    Ok(items)
}

/// Splits `reserve A, B : set, f : fun;` into one statement per variable.
pub fn split_reservations(items: Vec<Item>, reports: &mut Reports) -> Vec<Item> {
    let mut out = Vec::with_capacity(items.len());
    for item in items {
        match &item.form {
            Form::Reserve { segments } if segments.len() > 1 => {
                report(reports, &item.source_file).reservations_split += 1;
                for seg in segments {
                    let mut single = item.clone();
                    single.name = seg.0.clone();
                    single.form = Form::Reserve { segments: vec![seg.clone()] };
                    single.refresh_symbols();
                    out.push(single);
                }
            }
            _ => {
                report(reports, &item.source_file);
                out.push(item);
            }
        }
    }
    renumber(&mut out);
    out
}

/// Runs blocks, linking and reservations in that order.
pub fn normalize(items: Vec<Item>) -> Result<Normalized, NormalizeError> {
    let mut reports = Reports::new();
    let mut renames = BTreeMap::new();
    let items = split_definition_blocks(items, &mut reports);
    let items = explicit_linking(items, &mut reports, &mut renames)?;
    let items = split_reservations(items, &mut reports);
    Ok(Normalized { items, reports, renames })
}

/// Groups items by source file, in corpus order.
pub fn by_file(items: &[Item]) -> BTreeMap<&str, Vec<&Item>> {
    let mut files: BTreeMap<&str, Vec<&Item>> = BTreeMap::new();
    for item in items {
        files.entry(item.source_file.as_str()).or_default().push(item);
    }
    files
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_source, print_file, Corpus, Environment, Verdict};

    fn normalized_text(src: &str) -> (String, RewriteReport) {
        let out = normalize(parse_source("a.art", src).unwrap()).unwrap();
        (print_file(&out.items), out.reports["a.art"].clone())
    }

    #[test]
    fn blocks_become_standalone_definitions() {
        let (text, report) = normalized_text("defblock { def f := lit; def g := lit; }\nthm t : uses f;\n");
        assert_eq!(text, "def f := lit;\ndef g := lit;\nthm t : uses f;\n");
        assert_eq!(report.blocks_split, 1);
    }

    #[test]
    fn identity_without_constructs() {
        let src = "def f := lit;\nthm t : uses f by f;\nreserve x : set;\n";
        let (text, report) = normalized_text(src);
        assert_eq!(text, src);
        assert_eq!(report, RewriteReport::default());
    }

    #[test]
    fn then_becomes_by_previous() {
        let (text, report) = normalized_text("thm a : ;\nthen thm b : uses a;\nthen thm c : by a;\n");
        assert_eq!(text, "thm a : ;\nthm b : uses a by a;\nthm c : by a b;\n");
        assert_eq!(report.links_rewritten, 2);
        assert!(report.fresh_labels.is_empty());
    }

    #[test]
    fn anonymous_statements_get_labels() {
        let out = normalize(parse_source("x/y.art", "thm : ;\nthen thm : ;\n").unwrap()).unwrap();
        assert_eq!(print_file(&out.items), "thm __n0_x_y : ;\nthm __n1_x_y : by __n0_x_y;\n");
        assert_eq!(out.reports["x/y.art"].fresh_labels, vec!["__n0_x_y", "__n1_x_y"]);
        assert_eq!(out.renames["?x/y.art#0"], "__n0_x_y");
    }

    #[test]
    fn fresh_labels_skip_taken_names() {
        let out = normalize(parse_source("a.art", "def __n0_a := lit;\nthm : ;\n").unwrap()).unwrap();
        assert_eq!(out.reports["a.art"].fresh_labels, vec!["__n1_a"]);
    }

    #[test]
    fn dangling_then_is_an_error() {
        let err = normalize(parse_source("a.art", "then thm b : ;").unwrap()).unwrap_err();
        assert_eq!(err, NormalizeError::DanglingThen { file: "a.art".into() });
    }

    #[test]
    fn reservations_split_per_variable() {
        let (text, report) =
            normalized_text("def fun := lit;\ndef card := lit;\nreserve A : set, B : set, f : fun, M : card;\n");
        assert_eq!(
            text,
            "def fun := lit;\ndef card := lit;\nreserve A : set;\nreserve B : set;\nreserve f : fun;\nreserve M : card;\n"
        );
        assert_eq!(report.reservations_split, 1);
    }

    /// Before the split, a theorem using only `f` needs the whole reservation,
    /// which in turn needs the cardinal definition. After it, deleting the
    /// `M` reservation and `card` leaves the theorem accepted.
    #[test]
    fn split_reservation_drops_specious_dependency() {
        let src = "def fun := lit;\ndef card := lit;\nreserve A : set, B : set, f : fun, M : card;\nthm t : var f;\n";
        let before = Corpus::new(parse_source("a.art", src).unwrap()).unwrap();
        let after = Corpus::new(normalize(before.items().to_vec()).unwrap().items).unwrap();
        let t = after.get("t").unwrap();
        let mut env = after.prefix_env(after.index_of("t").unwrap());
        assert_eq!(after.check_item(t, &env, false).verdict, Verdict::Accepted);
        env.reservations.retain(|r| r != "M");
        env.definitions.retain(|d| d != "card");
        assert_eq!(after.check_item(t, &env, false).verdict, Verdict::Accepted);

        let reservation = before.get("A").unwrap();
        let mut env0 = before.prefix_env(before.index_of("A").unwrap());
        env0.definitions.retain(|d| d != "card");
        assert!(!before.check_item(reservation, &env0, false).verdict.is_accepted());
        let t0 = before.get("t").unwrap();
        let mut env1 = before.prefix_env(before.index_of("t").unwrap());
        env1.reservations.clear();
        assert!(!before.check_item(t0, &env1, false).verdict.is_accepted());
    }

    #[test]
    fn split_blocks_keep_verdicts() {
        let src = "def base := lit;\ndefblock { def f := base; def g := f; }\nthm t : uses g;\n";
        let before = Corpus::new(parse_source("a.art", src).unwrap()).unwrap();
        let after = Corpus::new(normalize(before.items().to_vec()).unwrap().items).unwrap();
        for name in ["base", "g", "t"] {
            let check = |c: &Corpus, n: &str| {
                let idx = c.index_of(n).unwrap();
                c.check_item(&c.items()[idx], &c.prefix_env(idx), false).verdict
            };
            let original = if name == "g" { "f" } else { name };
            assert_eq!(check(&before, original), check(&after, name), "{name}");
        }
        let t = after.get("t").unwrap();
        let mut env = Environment::default();
        env.push(after.get("g").unwrap());
        assert!(after.check_item(t, &env, false).verdict.is_accepted());
    }
}
