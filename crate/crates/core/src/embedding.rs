//! Pre-trained word vectors and phrase encoding.
//!
//! The table is read from the plain-text format used by published embedding
//! releases: one entry per line, a token followed by its components, all
//! separated by single spaces. Multi-word phrases are encoded as the mean of
//! their in-vocabulary token vectors.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};

/// Feature width expected by the classifier.
pub const EMBEDDING_DIM: usize = 50;

/// A small 50-dimensional table covering every bundled survey symptom and
/// corpus term.
pub const BUNDLED_EMBEDDINGS: &str = include_str!("../data/embeddings-50d.txt");

/// Immutable token → vector lookup.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dimension: usize,
    entries: HashMap<String, Box<[f64]>>,
    skipped_lines: usize,
}

/// A phrase encoded as a fixed-length feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PhraseVector {
    pub values: Vec<f64>,
    pub source_phrase: String,
    /// Tokens of `source_phrase` that had no vector.
    pub oov_tokens: usize,
}

/// Lowercases `phrase` and splits it on whitespace and `/`.
pub fn tokenize(phrase: &str) -> Vec<String> {
    phrase
        .split(|c: char| c.is_whitespace() || c == '/')
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

impl EmbeddingTable {
    /// Loads a text-format embedding file.
    ///
    /// Malformed lines are skipped with a warning. An unreadable file or a
    /// file with no usable lines is an error.
    pub fn load(path: impl AsRef<Path>, dimension: usize) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(BufReader::new(file), dimension, path)
    }

    /// Parses embedding lines from any buffered reader. `origin` is only
    /// used in diagnostics.
    pub fn from_reader(reader: impl BufRead, dimension: usize, origin: &Path) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        let mut entries = HashMap::new();
        let mut skipped_lines = 0;
        for (idx, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(origin, e))?;
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            match parse_line(&line, dimension) {
                Ok((token, vector)) => {
                    entries.entry(token).or_insert(vector);
                }
                Err(reason) => {
                    log::warn!("{}:{line_no}: skipped embedding line ({reason})", origin.display());
                    skipped_lines += 1;
                }
            }
        }
        if entries.is_empty() {
            return Err(Error::EmptyEmbeddingTable);
        }
        Ok(EmbeddingTable {
            dimension,
            entries,
            skipped_lines,
        })
    }

    /// Parses [`BUNDLED_EMBEDDINGS`].
    pub fn bundled() -> Self {
        Self::from_reader(BUNDLED_EMBEDDINGS.as_bytes(), EMBEDDING_DIM, Path::new("<bundled embeddings>"))
            .expect("bundled embedding table is valid")
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of malformed lines dropped while loading.
    pub fn skipped_lines(&self) -> usize {
        self.skipped_lines
    }

    /// Case-insensitive token lookup.
    pub fn get(&self, token: &str) -> Option<&[f64]> {
        match self.entries.get(token) {
            Some(v) => Some(v),
            None => self.entries.get(&token.to_lowercase()).map(|v| &**v),
        }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.get(token).is_some()
    }

    /// Mean of the vectors of the phrase's in-vocabulary tokens.
    pub fn encode(&self, phrase: &str) -> Result<PhraseVector> {
        let tokens = tokenize(phrase);
        let mut sum = vec![0.0; self.dimension];
        let mut hits = 0usize;
        for token in &tokens {
            if let Some(v) = self.entries.get(token) {
                for (s, x) in sum.iter_mut().zip(v.iter()) {
                    *s += x;
                }
                hits += 1;
            }
        }
        if hits == 0 {
            return Err(Error::UnembeddablePhrase(phrase.to_string()));
        }
        let n = hits as f64;
        sum.iter_mut().for_each(|s| *s /= n);
        Ok(PhraseVector {
            values: sum,
            source_phrase: phrase.to_string(),
            oov_tokens: tokens.len() - hits,
        })
    }
}

fn parse_line(line: &str, dimension: usize) -> std::result::Result<(String, Box<[f64]>), String> {
    let mut fields = line.split(' ');
    let token = fields.next().unwrap_or_default().to_lowercase();
    if token.is_empty() || token.chars().any(char::is_whitespace) {
        return Err("empty token".into());
    }
    let mut vector = Vec::with_capacity(dimension);
    for field in fields {
        let x: f64 = field
            .parse()
            .map_err(|_| format!("non-numeric component {field:?}"))?;
        if !x.is_finite() {
            return Err(format!("non-finite component {field:?}"));
        }
        vector.push(x);
    }
    if vector.len() != dimension {
        return Err(format!("expected {dimension} components, found {}", vector.len()));
    }
    Ok((token, vector.into_boxed_slice()))
}

/// Standalone encoder, equivalent to [`EmbeddingTable::encode`].
pub fn encode_phrase(table: &EmbeddingTable, phrase: &str) -> Result<PhraseVector> {
    table.encode(phrase)
}
