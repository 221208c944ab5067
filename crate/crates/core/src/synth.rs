//! Survey simulation with noise injection, and construction of labeled
//! per-client datasets.
//!
//! Each simulated person walks the prominent symptoms of their country in
//! table order. A symptom is displayed when a uniform draw falls below its
//! display probability; otherwise the noise mechanism gets an independent
//! draw and, if it fires, the person reports one corpus term chosen
//! uniformly at random. Displayed terms become positive examples and an
//! equal number of negatives is drawn from corpus terms outside the
//! prominent set.

use std::collections::hash_map::Entry;
use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::MedicalCorpus;
use crate::embedding::{EmbeddingTable, PhraseVector};
use crate::error::{Error, Result};
use crate::noise::NoiseMechanism;
use crate::survey::SymptomDistribution;

/// Runs the symptom loop for one person and returns the reported terms.
pub fn simulate_person<'a, R: Rng + ?Sized>(
    dist: &'a SymptomDistribution,
    corpus: &'a MedicalCorpus,
    noise: &NoiseMechanism,
    rng: &mut R,
) -> Vec<&'a str> {
    let mut displayed = Vec::new();
    for (symptom, p) in &dist.entries {
        if rng.random::<f64>() < *p {
            displayed.push(symptom.as_str());
        } else if noise.fires(rng) {
            let i = rng.random_range(0..corpus.len());
            displayed.push(corpus.terms()[i].as_str());
        }
    }
    displayed
}

/// Pre-encoded features for every phrase a client may emit.
#[derive(Debug, Clone)]
pub struct PhraseEncoder {
    features: HashMap<String, Arc<PhraseVector>>,
}

impl PhraseEncoder {
    /// Encodes every corpus term and every symptom of `dists`.
    pub fn new<'a>(
        table: &EmbeddingTable,
        corpus: &MedicalCorpus,
        dists: impl IntoIterator<Item = &'a SymptomDistribution>,
    ) -> Result<Self> {
        let mut features = HashMap::new();
        let dist_terms: Vec<String> = dists
            .into_iter()
            .flat_map(|d| d.symptoms().map(str::to_string).collect::<Vec<_>>())
            .collect();
        for term in corpus.terms().iter().chain(dist_terms.iter()) {
            if let Entry::Vacant(slot) = features.entry(term.to_lowercase()) {
                slot.insert(Arc::new(table.encode(term)?));
            }
        }
        Ok(PhraseEncoder { features })
    }

    pub fn get(&self, phrase: &str) -> Result<Arc<PhraseVector>> {
        self.features
            .get(&phrase.to_lowercase())
            .cloned()
            .ok_or_else(|| Error::UnembeddablePhrase(phrase.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn target(self) -> f64 {
        match self {
            Label::Negative => 0.0,
            Label::Positive => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub feature: Arc<PhraseVector>,
    pub label: Label,
}

impl Example {
    pub fn source_symptom(&self) -> &str {
        &self.feature.source_phrase
    }
}

/// One simulated client's labeled training data.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientDataset {
    pub client_id: u64,
    pub examples: Vec<Example>,
    pub n_persons: usize,
}

impl ClientDataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn count(&self, label: Label) -> usize {
        self.examples.iter().filter(|e| e.label == label).count()
    }
}

/// Simulates `n_persons` persons of a single country.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_client<R: Rng + ?Sized>(
    client_id: u64,
    n_persons: usize,
    dist: &SymptomDistribution,
    corpus: &MedicalCorpus,
    noise: &NoiseMechanism,
    encoder: &PhraseEncoder,
    rng: &mut R,
) -> Result<ClientDataset> {
    synthesize_cohorts(client_id, &[(dist, n_persons)], corpus, noise, encoder, rng)
}

/// Simulates a client whose persons come from several countries.
///
/// `cohorts` pairs each country's distribution with its number of persons;
/// cohorts are simulated in the given order. Negatives exclude every
/// prominent symptom of any cohort that has at least one person.
pub fn synthesize_cohorts<R: Rng + ?Sized>(
    client_id: u64,
    cohorts: &[(&SymptomDistribution, usize)],
    corpus: &MedicalCorpus,
    noise: &NoiseMechanism,
    encoder: &PhraseEncoder,
    rng: &mut R,
) -> Result<ClientDataset> {
    let n_persons: usize = cohorts.iter().map(|(_, n)| n).sum();
    if n_persons == 0 {
        return Err(Error::Config("a client needs at least one person".into()));
    }

    let mut examples = Vec::new();
    let mut prominent = HashSet::new();
    for &(dist, n) in cohorts.iter().filter(|(_, n)| *n > 0) {
        prominent.extend(dist.symptoms().map(str::to_lowercase));
        for _ in 0..n {
            for term in simulate_person(dist, corpus, noise, rng) {
                examples.push(Example {
                    feature: encoder.get(term)?,
                    label: Label::Positive,
                });
            }
        }
    }

    let n_positive = examples.len();
    if n_positive > 0 {
        let candidates: Vec<&String> = corpus
            .terms()
            .iter()
            .filter(|t| !prominent.contains(&t.to_lowercase()))
            .collect();
        if candidates.is_empty() {
            return Err(Error::Config(
                "medical corpus has no terms outside the prominent symptoms".into(),
            ));
        }
        for _ in 0..n_positive {
            let term = candidates[rng.random_range(0..candidates.len())];
            examples.push(Example {
                feature: encoder.get(term)?,
                label: Label::Negative,
            });
        }
    }
    examples.shuffle(rng);

    Ok(ClientDataset {
        client_id,
        examples,
        n_persons,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::survey::{build_distribution, CountrySurvey};

    fn toy_table() -> EmbeddingTable {
        let mut text = String::new();
        for (i, w) in ["fever", "cough", "rash", "anemia", "gout"].iter().enumerate() {
            text.push_str(&format!("{w} {} {}\n", i as f64, -(i as f64)));
        }
        EmbeddingTable::from_reader(std::io::Cursor::new(text), 2, std::path::Path::new("t")).unwrap()
    }

    fn toy_corpus() -> MedicalCorpus {
        MedicalCorpus::new(["Fever", "Cough", "Rash", "Anemia", "Gout"]).unwrap()
    }

    fn dist(entries: &[(&str, f64)]) -> SymptomDistribution {
        SymptomDistribution {
            country: "T".into(),
            entries: entries.iter().map(|&(s, p)| (s.to_string(), p)).collect(),
        }
    }

    #[test]
    fn certain_symptom_always_displayed() {
        let d = dist(&[("Fever", 1.0)]);
        let corpus = toy_corpus();
        let noise = NoiseMechanism::uniform(1.0).unwrap();
        let mut rng = seeded(1);
        for _ in 0..1000 {
            assert_eq!(simulate_person(&d, &corpus, &noise, &mut rng), ["Fever"]);
        }
    }

    #[test]
    fn dead_branches_emit_nothing() {
        let d = dist(&[("Fever", 0.0)]);
        let corpus = toy_corpus();
        let noise = NoiseMechanism::uniform(0.0).unwrap();
        let mut rng = seeded(2);
        assert!((0..1000).all(|_| simulate_person(&d, &corpus, &noise, &mut rng).is_empty()));
    }

    #[test]
    fn forced_single_person_client() {
        let d = dist(&[("Fever", 1.0)]);
        let corpus = toy_corpus();
        let enc = PhraseEncoder::new(&toy_table(), &corpus, [&d]).unwrap();
        let ds = synthesize_client(7, 1, &d, &corpus, &NoiseMechanism::off(), &enc, &mut seeded(3)).unwrap();
        assert_eq!(ds.client_id, 7);
        assert_eq!(ds.len(), 2);
        let pos: Vec<_> = ds.examples.iter().filter(|e| e.label == Label::Positive).collect();
        let neg: Vec<_> = ds.examples.iter().filter(|e| e.label == Label::Negative).collect();
        assert_eq!(pos[0].source_symptom(), "Fever");
        assert_ne!(neg[0].source_symptom(), "Fever");
    }

    #[test]
    fn zero_persons_rejected() {
        let d = dist(&[("Fever", 1.0)]);
        let corpus = toy_corpus();
        let enc = PhraseEncoder::new(&toy_table(), &corpus, [&d]).unwrap();
        assert!(synthesize_client(0, 0, &d, &corpus, &NoiseMechanism::off(), &enc, &mut seeded(3)).is_err());
    }

    #[test]
    fn silent_population_yields_empty_dataset() {
        let d = dist(&[("Fever", 0.0)]);
        let corpus = toy_corpus();
        let enc = PhraseEncoder::new(&toy_table(), &corpus, [&d]).unwrap();
        let ds = synthesize_client(0, 5, &d, &corpus, &NoiseMechanism::off(), &enc, &mut seeded(3)).unwrap();
        assert!(ds.is_empty());
    }

    #[test]
    fn negatives_avoid_every_cohort_symptom() {
        let corpus = toy_corpus();
        let a = build_distribution(&CountrySurvey::new("A", 10, &[("Fever", 9)]).unwrap());
        let b = build_distribution(&CountrySurvey::new("B", 10, &[("Cough", 9)]).unwrap());
        let enc = PhraseEncoder::new(&toy_table(), &corpus, [&a, &b]).unwrap();
        let noise = NoiseMechanism::off();
        let ds = synthesize_cohorts(1, &[(&a, 50), (&b, 50)], &corpus, &noise, &enc, &mut seeded(4)).unwrap();
        for e in ds.examples.iter().filter(|e| e.label == Label::Negative) {
            assert!(!["Fever", "Cough"].contains(&e.source_symptom()));
        }
        // an empty cohort does not widen the exclusion set
        let ds = synthesize_cohorts(1, &[(&a, 200), (&b, 0)], &corpus, &noise, &enc, &mut seeded(5)).unwrap();
        assert!(ds
            .examples
            .iter()
            .any(|e| e.label == Label::Negative && e.source_symptom() == "Cough"));
    }
}
