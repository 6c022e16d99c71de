mod common;

use std::fs;

use common::{fixture, generated, preserved, verdicts, FAMILIES};
use depkit::corpus::{parse_corpus, parse_source, print_file, Corpus, Item};
use depkit::generate::{generate, parse_generated, GenConfig};
use depkit::normalize::{by_file, normalize, Reports};

const FIXTURES: [&str; 5] = ["library", "redundant-hint", "opaque-chain", "rewrites/input", "hundred"];

#[test]
fn golden_rewrites() {
    let out = normalize(parse_corpus(&fixture("rewrites/input")).unwrap()).unwrap();
    for (file, items) in by_file(&out.items) {
        let expected = fs::read_to_string(fixture("rewrites/expected").join(file)).unwrap();
        assert_eq!(print_file(items), expected, "{file}");
    }
    let report: Reports =
        serde_json::from_str(&fs::read_to_string(fixture("rewrites/expected/report.json")).unwrap()).unwrap();
    assert_eq!(out.reports, report);
    assert_eq!(report["linking.art"].fresh_labels, vec!["__n0_linking"]);
    assert_eq!(report["reserve.art"].reservations_split, 1);
}

fn assert_preserved(items: Vec<Item>, label: &str) {
    if let Err(e) = preserved(items) {
        panic!("{label}: {e}");
    }
}

#[test]
fn fixtures_keep_verdicts_and_are_idempotent() {
    for name in FIXTURES {
        assert_preserved(parse_corpus(&fixture(name)).unwrap(), name);
    }
    let expected = parse_corpus(&fixture("rewrites/expected")).unwrap();
    let out = normalize(expected.clone()).unwrap();
    assert_eq!(print_file(&out.items), print_file(&expected));
}

#[test]
fn generated_corpora_keep_verdicts() {
    for family in FAMILIES {
        for seed in 0..25 {
            let items = parse_generated(&generate(&GenConfig::new(family, 40, seed))).unwrap();
            assert_preserved(items, &format!("{family:?}/{seed}"));
        }
    }
}

#[test]
fn damaged_corpora_keep_verdicts() {
    let mut rejected = 0;
    for seed in 0..60 {
        let mut files = generate(&GenConfig::new(depkit::generate::Family::Mixed, 40, seed));
        // Drop one line from an early file so that later items lose what they use.
        let victim = (seed as usize) % files[0].1.lines().count();
        files[0].1 =
            files[0].1.lines().enumerate().filter(|(i, _)| *i != victim).map(|(_, l)| format!("{l}\n")).collect();
        let Ok(items) = parse_generated(&files) else { continue };
        let Ok(normalized) = normalize(items.clone()) else { continue };
        let c = Corpus::new(normalized.items).unwrap();
        rejected += verdicts(&c).values().filter(|v| !v.is_accepted()).count();
        assert_preserved(items, &format!("damaged/{seed}"));
    }
    assert!(rejected > 0, "damage produced no rejections");
}

#[test]
fn broken_block_member_keeps_the_block_verdict() {
    let items = parse_source("a.art", "defblock { def b1 := missing; def b2 := b1; }\nthm t : uses b2;\n").unwrap();
    assert_preserved(items, "block");
}

#[test]
fn printed_corpus_reparses_to_the_same_items() {
    for seed in 0..10 {
        let c = generated(depkit::generate::Family::Mixed, 50, seed);
        let mut items = Vec::new();
        for (file, group) in by_file(c.items()) {
            items.extend(parse_source(file, &print_file(group)).unwrap());
        }
        assert_eq!(items, c.items().to_vec());
    }
}
