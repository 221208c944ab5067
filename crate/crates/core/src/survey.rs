//! Country survey tables and the display-probability distributions derived
//! from them.

use std::path::Path;

use rand::Rng;
use serde::Deserialize;

use crate::error::{Error, Result};

/// The bundled five-country survey table.
pub const BUNDLED_SURVEYS: &str = include_str!("../data/surveys.toml");

/// Absolute symptom counts reported by one country's survey.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct CountrySurvey {
    #[serde(rename = "name")]
    pub country: String,
    pub total: u64,
    #[serde(rename = "symptoms")]
    pub symptom_counts: Vec<SymptomCount>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct SymptomCount {
    pub name: String,
    pub count: u64,
}

#[derive(Deserialize)]
struct SurveyFile {
    country: Vec<CountrySurvey>,
}

impl CountrySurvey {
    pub fn new(country: impl Into<String>, total: u64, counts: &[(&str, u64)]) -> Result<Self> {
        let survey = CountrySurvey {
            country: country.into(),
            total,
            symptom_counts: counts
                .iter()
                .map(|&(name, count)| SymptomCount {
                    name: name.to_string(),
                    count,
                })
                .collect(),
        };
        survey.validate()?;
        Ok(survey)
    }

    pub fn validate(&self) -> Result<()> {
        if self.total == 0 {
            return Err(Error::Config(format!("{}: total must be positive", self.country)));
        }
        if let Some(sc) = self.symptom_counts.iter().find(|sc| sc.count > self.total) {
            return Err(Error::Config(format!(
                "{}: count for {} ({}) exceeds total {}",
                self.country, sc.name, sc.count, self.total
            )));
        }
        if self.symptom_counts.iter().all(|sc| sc.count == 0) {
            return Err(Error::Config(format!("{}: no symptom has a positive count", self.country)));
        }
        Ok(())
    }

    pub fn count(&self, symptom: &str) -> u64 {
        self.symptom_counts
            .iter()
            .find(|sc| sc.name.eq_ignore_ascii_case(symptom))
            .map_or(0, |sc| sc.count)
    }
}

/// Parses a survey file body (TOML, one `[[country]]` record per country).
pub fn parse_surveys(text: &str, origin: &Path) -> Result<Vec<CountrySurvey>> {
    let file: SurveyFile = toml::from_str(text).map_err(|e| Error::parse(origin, e.to_string()))?;
    if file.country.is_empty() {
        return Err(Error::parse(origin, "no country records"));
    }
    for survey in &file.country {
        survey.validate().map_err(|e| Error::parse(origin, e.to_string()))?;
    }
    Ok(file.country)
}

pub fn load_surveys(path: impl AsRef<Path>) -> Result<Vec<CountrySurvey>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_surveys(&text, path)
}

pub fn bundled_surveys() -> Vec<CountrySurvey> {
    parse_surveys(BUNDLED_SURVEYS, Path::new("<bundled surveys>")).expect("bundled survey table is valid")
}

/// Per-symptom display probabilities of one country's prominent symptoms.
#[derive(Debug, Clone, PartialEq)]
pub struct SymptomDistribution {
    pub country: String,
    pub entries: Vec<(String, f64)>,
}

impl SymptomDistribution {
    pub fn symptoms(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(s, _)| s.as_str())
    }

    pub fn contains(&self, symptom: &str) -> bool {
        self.symptoms().any(|s| s.eq_ignore_ascii_case(symptom))
    }

    /// Expected number of displayed symptoms per person with noise disabled.
    pub fn expected_displayed(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Keeps positive-count symptoms in table order with probability count/total.
pub fn build_distribution(survey: &CountrySurvey) -> SymptomDistribution {
    let total = survey.total as f64;
    SymptomDistribution {
        country: survey.country.clone(),
        entries: survey
            .symptom_counts
            .iter()
            .filter(|sc| sc.count > 0)
            .map(|sc| (sc.name.clone(), sc.count as f64 / total))
            .collect(),
    }
}

/// Population share of each survey, `total_c / Σ totals`.
pub fn country_weights(surveys: &[CountrySurvey]) -> Vec<f64> {
    let grand: u64 = surveys.iter().map(|s| s.total).sum();
    surveys.iter().map(|s| s.total as f64 / grand as f64).collect()
}

/// Draws one survey index per slot with probability proportional to the
/// surveyed population.
pub fn assign_countries<R: Rng + ?Sized>(
    n: usize,
    surveys: &[CountrySurvey],
    rng: &mut R,
) -> Vec<usize> {
    assert!(!surveys.is_empty(), "assign_countries needs at least one survey");
    let grand: u64 = surveys.iter().map(|s| s.total).sum();
    let mut cumulative = Vec::with_capacity(surveys.len());
    let mut acc = 0u64;
    for s in surveys {
        acc += s.total;
        cumulative.push(acc);
    }
    (0..n)
        .map(|_| {
            let ticket = rng.random_range(0..grand);
            cumulative.partition_point(|&c| c <= ticket)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn bundled_table_shape() {
        let surveys = bundled_surveys();
        let names: Vec<_> = surveys.iter().map(|s| s.country.as_str()).collect();
        assert_eq!(names, ["USA", "China", "Germany", "Italy", "Kenya"]);
        assert!(surveys.iter().all(|s| s.symptom_counts.len() == 16));
        let grand: u64 = surveys.iter().map(|s| s.total).sum();
        assert_eq!(grand, 1_226_465);
    }

    #[test]
    fn usa_and_kenya_fever() {
        let surveys = bundled_surveys();
        let usa = build_distribution(&surveys[0]);
        assert_eq!(usa.entries[0].0, "Fever");
        assert!((usa.entries[0].1 - 0.43150).abs() < 5e-6);
        assert_eq!(usa.entries[0].1, 161330.0 / 373883.0);
        let kenya = build_distribution(&surveys[4]);
        assert!((kenya.entries[0].1 - 0.90045).abs() < 5e-6);
        let names: Vec<_> = kenya.symptoms().collect();
        assert_eq!(
            names,
            ["Fever", "Cough", "Runny nose", "Sore throat", "Headache", "Nasal Congestion"]
        );
    }

    #[test]
    fn forced_ratio_is_one() {
        let s = CountrySurvey::new("X", 7, &[("Fever", 7), ("Cough", 0)]).unwrap();
        let d = build_distribution(&s);
        assert_eq!(d.entries, vec![("Fever".to_string(), 1.0)]);
    }

    #[test]
    fn invalid_surveys_rejected() {
        assert!(CountrySurvey::new("X", 0, &[("Fever", 0)]).is_err());
        assert!(CountrySurvey::new("X", 5, &[("Fever", 6)]).is_err());
        assert!(CountrySurvey::new("X", 5, &[("Fever", 0)]).is_err());
        let bad = "[[country]]\nname = \"X\"\ntotal = 3\nsymptoms = [{ name = \"Fever\", count = 4 }]\n";
        assert!(parse_surveys(bad, Path::new("x.toml")).is_err());
    }

    #[test]
    fn country_weights_match_totals() {
        let w = country_weights(&bundled_surveys());
        let expected = [0.3048, 0.0456, 0.6098, 0.0278, 0.0119];
        for (got, want) in w.iter().zip(expected) {
            assert!((got - want).abs() <= 5e-5, "{got} vs {want}");
        }
    }

    #[test]
    fn single_survey_takes_everything() {
        let s = CountrySurvey::new("Only", 10, &[("Fever", 3)]).unwrap();
        let picks = assign_countries(100, &[s], &mut seeded(1));
        assert!(picks.iter().all(|&i| i == 0));
    }
}
