//! Regenerates `data/embeddings-50d.txt`, the bundled stand-in for a
//! published 50-dimension embedding file.
//!
//! Each token of the bundled corpus and survey tables receives a vector
//! drawn from N(0, 0.6²) by a stream seeded with the FNV-1a hash of the
//! token, so the file is reproducible and a token's vector does not depend
//! on which other tokens are present.
//!
//!     cargo run -p fedpandemic --example embedding_fixture > crates/core/data/embeddings-50d.txt

use std::collections::BTreeSet;

use fedpandemic::corpus::MedicalCorpus;
use fedpandemic::embedding::{tokenize, EMBEDDING_DIM};
use fedpandemic::rng::seeded;
use fedpandemic::survey::bundled_surveys;
use rand_distr::{Distribution, Normal};

const COMPONENT_STD: f64 = 0.6;

fn fnv1a(token: &str) -> u64 {
    token.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn main() {
    let mut vocab = BTreeSet::new();
    for term in MedicalCorpus::bundled().terms() {
        vocab.extend(tokenize(term));
    }
    for survey in bundled_surveys() {
        for sc in &survey.symptom_counts {
            vocab.extend(tokenize(&sc.name));
        }
    }

    let normal = Normal::new(0.0, COMPONENT_STD).unwrap();
    for token in vocab {
        let mut rng = seeded(fnv1a(&token));
        let values: Vec<String> = (0..EMBEDDING_DIM)
            .map(|_| format!("{:.5}", normal.sample(&mut rng)))
            .collect();
        println!("{token} {}", values.join(" "));
    }
}
