//! The medical corpus: every phrase a simulated person may report.

use std::collections::HashSet;
use std::path::Path;

use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};

pub const BUNDLED_CORPUS: &str = include_str!("../data/corpus.txt");

/// Smallest corpus accepted from a file.
pub const MIN_CORPUS_LEN: usize = 50;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MedicalCorpus {
    terms: Vec<String>,
}

impl MedicalCorpus {
    /// Builds a corpus from distinct (case-insensitively) non-empty terms.
    pub fn new<I, S>(terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let terms: Vec<String> = terms.into_iter().map(|t| t.into().trim().to_string()).collect();
        if terms.is_empty() {
            return Err(Error::Config("medical corpus is empty".into()));
        }
        let mut seen = HashSet::new();
        for t in &terms {
            if t.is_empty() {
                return Err(Error::Config("medical corpus contains an empty term".into()));
            }
            if !seen.insert(t.to_lowercase()) {
                return Err(Error::Config(format!("duplicate corpus term {t:?}")));
            }
        }
        Ok(MedicalCorpus { terms })
    }

    /// Parses the line format: one term per line, blank lines and `#`
    /// comments ignored.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let terms: Vec<&str> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect();
        if terms.len() < MIN_CORPUS_LEN {
            return Err(Error::parse(
                origin,
                format!("corpus has {} terms, need at least {MIN_CORPUS_LEN}", terms.len()),
            ));
        }
        Self::new(terms).map_err(|e| Error::parse(origin, e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_CORPUS, Path::new("<bundled corpus>")).expect("bundled corpus is valid")
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn contains(&self, term: &str) -> bool {
        self.terms.iter().any(|t| t.eq_ignore_ascii_case(term))
    }

    /// Terms that `table` cannot encode.
    pub fn unembeddable<'a>(&'a self, table: &EmbeddingTable) -> Vec<&'a str> {
        self.terms
            .iter()
            .filter(|t| table.encode(t).is_err())
            .map(String::as_str)
            .collect()
    }
}
