mod common;

use std::fmt::Write as _;
use std::io::Cursor;
use std::path::Path;

use fedpandemic::embedding::{encode_phrase, EmbeddingTable, EMBEDDING_DIM};
use fedpandemic::error::Error;
use fedpandemic::rng::seeded;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

/// Writes `n` random 50-d lines and returns the text together with the
/// values an independent reader sees.
fn random_file(n: usize, seed: u64) -> (String, Vec<(String, Vec<f64>)>) {
    let mut rng = seeded(seed);
    let mut text = String::new();
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let token = format!("tok{i}");
        let values: Vec<f64> = (0..EMBEDDING_DIM).map(|_| rng.random_range(-3.0..3.0)).collect();
        text.push_str(&token);
        for v in &values {
            // a mix of short and full-precision literals, as real files have
            if i % 2 == 0 {
                let _ = write!(text, " {v:.5}");
            } else {
                let _ = write!(text, " {v:e}");
            }
        }
        text.push('\n');
        rows.push((token, values));
    }
    (text, rows)
}

/// Independent reader: whitespace split, `str::parse` per field.
fn reread(text: &str) -> Vec<(String, Vec<f64>)> {
    text.lines()
        .map(|line| {
            let mut it = line.split_whitespace();
            let token = it.next().unwrap().to_string();
            (token, it.map(|f| f.parse().unwrap()).collect())
        })
        .collect()
}

fn round_trip(n: usize) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("vectors.txt");
    let (text, _) = random_file(n, 7);
    std::fs::write(&path, &text).unwrap();
    let table = EmbeddingTable::load(&path, EMBEDDING_DIM).unwrap();
    assert_eq!(table.len(), n);
    assert_eq!(table.skipped_lines(), 0);
    for (token, values) in reread(&text) {
        let got = table.get(&token).unwrap();
        assert_eq!(got.len(), values.len());
        for (a, b) in got.iter().zip(&values) {
            assert_eq!(a.to_bits(), b.to_bits(), "{token}");
        }
    }
}

#[test]
fn round_trip_matches_independent_reread() {
    round_trip(5_000);
}

#[test]
#[ignore = "writes and parses a 400,000-line file"]
fn round_trip_full_vocabulary_size() {
    round_trip(400_000);
}

#[test]
fn bundled_fixture_is_clean() {
    let table = common::bundled_table();
    assert_eq!(table.dimension(), 50);
    assert_eq!(table.skipped_lines(), 0);
    assert!(table.contains("fever") && table.contains("FEVER"));
}

#[test]
fn malformed_lines_are_skipped_and_counted() {
    let good = |t: &str| format!("{t}{}\n", " 0.5".repeat(EMBEDDING_DIM));
    let text = format!(
        "{}{} 1 2 3\n{}{} abc{}\n{}",
        good("fever"),
        "short",
        good("Cough"),
        "bad",
        " 1".repeat(EMBEDDING_DIM - 1),
        good("fever").replace("0.5", "9.0"),
    );
    let table = EmbeddingTable::from_reader(Cursor::new(text), EMBEDDING_DIM, Path::new("t")).unwrap();
    assert_eq!(table.len(), 2);
    assert_eq!(table.skipped_lines(), 2);
    // first occurrence wins, keys are lowercased
    assert_eq!(table.get("fever").unwrap()[0], 0.5);
    assert!(table.contains("cough"));
}

#[test]
fn empty_and_missing_files() {
    let err = EmbeddingTable::from_reader(Cursor::new(""), EMBEDDING_DIM, Path::new("e")).unwrap_err();
    assert!(matches!(err, Error::EmptyEmbeddingTable));
    let err = EmbeddingTable::load("/nonexistent/vectors.txt", EMBEDDING_DIM).unwrap_err();
    assert!(err.is_io());
}

#[test]
fn multi_token_phrase_is_the_mean() {
    let table = common::bundled_table();
    let v = encode_phrase(&table, "Shortness of breath").unwrap();
    assert_eq!(v.oov_tokens, 0);
    let parts: Vec<&[f64]> = ["shortness", "of", "breath"].iter().map(|t| table.get(t).unwrap()).collect();
    for (k, got) in v.values.iter().enumerate() {
        let want = (parts[0][k] + parts[1][k] + parts[2][k]) / 3.0;
        assert!((got - want).abs() <= 1e-15, "component {k}");
    }
    let single = encode_phrase(&table, "fever").unwrap();
    assert_eq!(single.values, table.get("fever").unwrap());
    let slash = encode_phrase(&table, "Nausea/Vomiting").unwrap();
    assert_eq!(slash.oov_tokens, 0);
}

#[test]
fn oov_handling() {
    let table = common::bundled_table();
    assert!(matches!(encode_phrase(&table, "qzxv"), Err(Error::UnembeddablePhrase(p)) if p == "qzxv"));
    let v = encode_phrase(&table, "fever qzxv").unwrap();
    assert_eq!(v.oov_tokens, 1);
    assert_eq!(v.values, table.get("fever").unwrap());
}

fn small_table(words: &[String], seed: u64) -> (String, EmbeddingTable) {
    let mut rng = seeded(seed);
    let mut text = String::new();
    for w in words {
        text.push_str(w);
        for _ in 0..EMBEDDING_DIM {
            let _ = write!(text, " {}", rng.random_range(-2.0f64..2.0));
        }
        text.push('\n');
    }
    let table = EmbeddingTable::from_reader(Cursor::new(text.clone()), EMBEDDING_DIM, Path::new("p")).unwrap();
    (text, table)
}

fn vocabulary() -> Vec<String> {
    (0..12).map(|i| format!("w{i}")).collect()
}

proptest! {
    #[test]
    fn mean_is_a_convex_combination(seed in any::<u64>(), picks in prop::collection::vec(0usize..12, 1..6)) {
        let words = vocabulary();
        let (_, table) = small_table(&words, seed);
        let phrase: Vec<&str> = picks.iter().map(|&i| words[i].as_str()).collect();
        let v = table.encode(&phrase.join(" ")).unwrap();
        for k in 0..EMBEDDING_DIM {
            let comps = picks.iter().map(|&i| table.get(&words[i]).unwrap()[k]);
            let lo = comps.clone().fold(f64::INFINITY, f64::min);
            let hi = comps.fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(lo <= v.values[k] && v.values[k] <= hi);
        }
    }

    #[test]
    fn line_order_does_not_matter(seed in any::<u64>(), shuffle_seed in any::<u64>(), picks in prop::collection::vec(0usize..12, 1..5)) {
        let words = vocabulary();
        let (text, table) = small_table(&words, seed);
        let mut lines: Vec<&str> = text.lines().collect();
        lines.shuffle(&mut seeded(shuffle_seed));
        let shuffled = EmbeddingTable::from_reader(Cursor::new(lines.join("\n")), EMBEDDING_DIM, Path::new("s")).unwrap();
        let phrase: Vec<&str> = picks.iter().map(|&i| words[i].as_str()).collect();
        let phrase = phrase.join(" ");
        prop_assert_eq!(table.encode(&phrase).unwrap(), shuffled.encode(&phrase).unwrap());
    }
}
