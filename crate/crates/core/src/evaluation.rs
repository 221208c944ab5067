//! Scoring global models against the surveyed symptoms, and sweeps over
//! noise levels and privacy budgets.
//!
//! Every surveyed symptom is a genuine disease symptom, so accuracy is the
//! fraction of them the model scores at or above the decision threshold. With
//! sixteen surveyed symptoms it is always a multiple of 1/16.

use std::cmp::Ordering;
use std::fmt;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{forward, MlpParameters};
use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use crate::federation::{run_simulation, FederationContext, RunSettings, SimulationId, SimulationRun, SimulationSpec};
use crate::noise::{NoiseKind, NoiseMechanism};
use crate::survey::CountrySurvey;

/// Symptoms displayed by more than this fraction of all respondents form
/// the high group.
pub const HIGH_GROUP_THRESHOLD: f64 = 0.10;

pub const DEFAULT_DECISION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymptomGroup {
    High,
    Low,
}

impl SymptomGroup {
    pub fn as_str(self) -> &'static str {
        match self {
            SymptomGroup::High => "high",
            SymptomGroup::Low => "low",
        }
    }
}

impl fmt::Display for SymptomGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSymptom {
    pub name: String,
    /// Respondents displaying the symptom over all respondents, all countries.
    pub aggregate_fraction: f64,
    pub group: SymptomGroup,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSet {
    pub symptoms: Vec<EvalSymptom>,
    pub decision_threshold: f64,
}

impl EvalSet {
    pub fn len(&self) -> usize {
        self.symptoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symptoms.is_empty()
    }

    pub fn group(&self, group: SymptomGroup) -> impl Iterator<Item = &EvalSymptom> {
        self.symptoms.iter().filter(move |s| s.group == group)
    }
}

/// Collects every symptom of the survey tables, in first-appearance order,
/// and splits them by aggregate display fraction.
pub fn build_evalset(surveys: &[CountrySurvey]) -> EvalSet {
    let grand: u64 = surveys.iter().map(|s| s.total).sum();
    let mut names: Vec<&str> = Vec::new();
    for survey in surveys {
        for sc in &survey.symptom_counts {
            if !names.iter().any(|n| n.eq_ignore_ascii_case(&sc.name)) {
                names.push(&sc.name);
            }
        }
    }
    let symptoms = names
        .into_iter()
        .map(|name| {
            let count: u64 = surveys.iter().map(|s| s.count(name)).sum();
            let aggregate_fraction = count as f64 / grand as f64;
            EvalSymptom {
                name: name.to_string(),
                aggregate_fraction,
                group: if aggregate_fraction > HIGH_GROUP_THRESHOLD {
                    SymptomGroup::High
                } else {
                    SymptomGroup::Low
                },
            }
        })
        .collect();
    EvalSet {
        symptoms,
        decision_threshold: DEFAULT_DECISION_THRESHOLD,
    }
}

pub fn predict_symptom(params: &MlpParameters, embeddings: &EmbeddingTable, symptom: &str) -> Result<f64> {
    let x = embeddings.encode(symptom)?;
    forward(params, &x.values)
}

/// Predictions for every symptom of `evalset`, in its order.
pub fn predictions(params: &MlpParameters, evalset: &EvalSet, embeddings: &EmbeddingTable) -> Result<Vec<f64>> {
    evalset
        .symptoms
        .iter()
        .map(|s| predict_symptom(params, embeddings, &s.name))
        .collect()
}

/// Fraction of predictions at or above `threshold`.
pub fn accuracy_of(predictions: &[f64], threshold: f64) -> f64 {
    let hits = predictions.iter().filter(|&&p| p >= threshold).count();
    hits as f64 / predictions.len() as f64
}

pub fn accuracy(params: &MlpParameters, evalset: &EvalSet, embeddings: &EmbeddingTable) -> Result<f64> {
    Ok(accuracy_of(&predictions(params, evalset, embeddings)?, evalset.decision_threshold))
}

/// Identifies one federated run inside a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub simulation: SimulationId,
    pub mechanism: NoiseKind,
    pub noise_level: f64,
    pub epsilon: Option<f64>,
    pub seed: u64,
}

impl SweepPoint {
    pub fn new(simulation: SimulationId, noise: &NoiseMechanism, seed: u64) -> Self {
        SweepPoint {
            simulation,
            mechanism: noise.kind(),
            noise_level: noise.noise_level(),
            epsilon: noise.epsilon(),
            seed,
        }
    }

    pub fn noise(&self) -> Result<NoiseMechanism> {
        NoiseMechanism::new(self.mechanism, self.noise_level, self.epsilon)
    }

    /// Same configuration, any seed.
    pub fn same_config(&self, other: &SweepPoint) -> bool {
        self.simulation == other.simulation
            && self.mechanism == other.mechanism
            && self.noise_level == other.noise_level
            && self.epsilon == other.epsilon
    }

    fn cmp_canonical(&self, other: &Self) -> Ordering {
        self.simulation
            .cmp(&other.simulation)
            .then(self.mechanism.cmp(&other.mechanism))
            .then(self.noise_level.total_cmp(&other.noise_level))
            .then(cmp_epsilon(self.epsilon, other.epsilon))
            .then(self.seed.cmp(&other.seed))
    }
}

fn cmp_epsilon(a: Option<f64>, b: Option<f64>) -> Ordering {
    match (a, b) {
        (None, None) => Ordering::Equal,
        (None, Some(_)) => Ordering::Less,
        (Some(_), None) => Ordering::Greater,
        (Some(x), Some(y)) => x.total_cmp(&y),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub point: SweepPoint,
    pub global_epoch: usize,
    /// Position of the symptom in the evaluation set.
    pub symptom_rank: usize,
    pub symptom: String,
    pub group: SymptomGroup,
    pub prediction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyRow {
    pub point: SweepPoint,
    pub global_epoch: usize,
    pub accuracy: f64,
}

pub const PREDICTION_HEADER: [&str; 9] = [
    "simulation",
    "mechanism",
    "noise_level",
    "epsilon",
    "seed",
    "global_epoch",
    "symptom",
    "group",
    "prediction",
];

pub const ACCURACY_HEADER: [&str; 7] = [
    "simulation",
    "mechanism",
    "noise_level",
    "epsilon",
    "seed",
    "global_epoch",
    "accuracy",
];

/// Per-epoch predictions and accuracies of one or more runs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepResult {
    pub predictions: Vec<PredictionRow>,
    pub accuracies: Vec<AccuracyRow>,
}

fn point_fields(p: &SweepPoint) -> [String; 5] {
    [
        p.simulation.to_string(),
        p.mechanism.to_string(),
        p.noise_level.to_string(),
        p.epsilon.map(|e| e.to_string()).unwrap_or_default(),
        p.seed.to_string(),
    ]
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io("<csv>", io),
        other => Error::parse("<csv>", format!("{other:?}")),
    }
}

impl SweepResult {
    pub fn is_empty(&self) -> bool {
        self.predictions.is_empty() && self.accuracies.is_empty()
    }

    pub fn extend(&mut self, other: SweepResult) {
        self.predictions.extend(other.predictions);
        self.accuracies.extend(other.accuracies);
    }

    /// Sorts rows by (simulation, mechanism, level, ε, seed, epoch, symptom).
    pub fn sort_canonical(&mut self) {
        self.predictions.sort_by(|a, b| {
            a.point
                .cmp_canonical(&b.point)
                .then(a.global_epoch.cmp(&b.global_epoch))
                .then(a.symptom_rank.cmp(&b.symptom_rank))
        });
        self.accuracies
            .sort_by(|a, b| a.point.cmp_canonical(&b.point).then(a.global_epoch.cmp(&b.global_epoch)));
    }

    pub fn write_predictions_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(PREDICTION_HEADER).map_err(csv_error)?;
        for r in &self.predictions {
            let [sim, mech, level, eps, seed] = point_fields(&r.point);
            w.write_record([
                sim,
                mech,
                level,
                eps,
                seed,
                r.global_epoch.to_string(),
                r.symptom.clone(),
                r.group.to_string(),
                r.prediction.to_string(),
            ])
            .map_err(csv_error)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))
    }

    pub fn write_accuracy_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(ACCURACY_HEADER).map_err(csv_error)?;
        for r in &self.accuracies {
            let [sim, mech, level, eps, seed] = point_fields(&r.point);
            w.write_record([sim, mech, level, eps, seed, r.global_epoch.to_string(), r.accuracy.to_string()])
                .map_err(csv_error)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))
    }

    /// Reads rows written by [`write_accuracy_csv`](Self::write_accuracy_csv).
    pub fn read_accuracy_csv<R: Read>(input: R) -> Result<Vec<AccuracyRow>> {
        let mut reader = csv::Reader::from_reader(input);
        let header = reader.headers().map_err(csv_error)?.clone();
        if header.iter().ne(ACCURACY_HEADER.iter().copied()) {
            return Err(Error::parse("<csv>", format!("unexpected accuracy header {header:?}")));
        }
        let bad = |field: &str, value: &str| Error::parse("<csv>", format!("bad {field} {value:?}"));
        let mut rows = Vec::new();
        for record in reader.records() {
            let rec = record.map_err(csv_error)?;
            let field = |i: usize| rec.get(i).unwrap_or_default();
            let epsilon = match field(3) {
                "" => None,
                e => Some(e.parse().map_err(|_| bad("epsilon", e))?),
            };
            rows.push(AccuracyRow {
                point: SweepPoint {
                    simulation: field(0).parse()?,
                    mechanism: field(1).parse()?,
                    noise_level: field(2).parse().map_err(|_| bad("noise_level", field(2)))?,
                    epsilon,
                    seed: field(4).parse().map_err(|_| bad("seed", field(4)))?,
                },
                global_epoch: field(5).parse().map_err(|_| bad("global_epoch", field(5)))?,
                accuracy: field(6).parse().map_err(|_| bad("accuracy", field(6)))?,
            });
        }
        Ok(rows)
    }

    /// Accuracy of every seed of `config` at `epoch`, in seed order.
    pub fn accuracies_at(&self, config: &SweepPoint, epoch: usize) -> Vec<(u64, f64)> {
        let mut v: Vec<(u64, f64)> = self
            .accuracies
            .iter()
            .filter(|r| r.point.same_config(config) && r.global_epoch == epoch)
            .map(|r| (r.point.seed, r.accuracy))
            .collect();
        v.sort_by_key(|&(s, _)| s);
        v
    }

    /// Mean prediction of each symptom group for one run at `epoch`.
    pub fn group_means(&self, point: &SweepPoint, epoch: usize) -> (f64, f64) {
        let mean = |g: SymptomGroup| {
            let v: Vec<f64> = self
                .predictions
                .iter()
                .filter(|r| r.point == *point && r.global_epoch == epoch && r.group == g)
                .map(|r| r.prediction)
                .collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        (mean(SymptomGroup::High), mean(SymptomGroup::Low))
    }

    /// Distinct configurations, canonical order.
    pub fn configs(&self) -> Vec<SweepPoint> {
        let mut points: Vec<SweepPoint> = Vec::new();
        for r in &self.accuracies {
            if !points.iter().any(|p| p.same_config(&r.point)) {
                points.push(SweepPoint { seed: 0, ..r.point });
            }
        }
        points.sort_by(|a, b| a.cmp_canonical(b));
        points
    }

    pub fn last_epoch(&self) -> Option<usize> {
        self.accuracies.iter().map(|r| r.global_epoch).max()
    }
}

/// Read-only inputs shared by every run of a sweep.
#[derive(Debug, Clone, Copy)]
pub struct Experiment<'a> {
    pub ctx: &'a FederationContext,
    pub embeddings: &'a EmbeddingTable,
    pub evalset: &'a EvalSet,
}

/// Records predictions and accuracy for global epochs `1..=G` of a run.
pub fn evaluate_run(point: SweepPoint, run: &SimulationRun, evalset: &EvalSet, embeddings: &EmbeddingTable) -> Result<SweepResult> {
    let mut result = SweepResult::default();
    for snapshot in run.snapshots.iter().skip(1) {
        let preds = predictions(&snapshot.params, evalset, embeddings)?;
        result.accuracies.push(AccuracyRow {
            point,
            global_epoch: snapshot.round_index,
            accuracy: accuracy_of(&preds, evalset.decision_threshold),
        });
        for (rank, (s, p)) in evalset.symptoms.iter().zip(preds).enumerate() {
            result.predictions.push(PredictionRow {
                point,
                global_epoch: snapshot.round_index,
                symptom_rank: rank,
                symptom: s.name.clone(),
                group: s.group,
                prediction: p,
            });
        }
    }
    Ok(result)
}

/// Runs every `(noise, seed)` combination and merges the results in
/// canonical order.
pub fn run_points(
    spec: &SimulationSpec,
    noises: &[NoiseMechanism],
    seeds: &[u64],
    base: &RunSettings,
    exp: Experiment<'_>,
) -> Result<SweepResult> {
    if !noises.is_empty() && seeds.is_empty() {
        return Err(Error::Config("a sweep needs at least one seed".into()));
    }
    let points: Vec<(NoiseMechanism, u64)> = noises
        .iter()
        .flat_map(|n| seeds.iter().map(move |&s| (*n, s)))
        .collect();
    let parts: Vec<SweepResult> = points
        .par_iter()
        .map(|&(noise, seed)| {
            let settings = RunSettings {
                seed,
                noise,
                ..base.clone()
            };
            let run = run_simulation(spec, exp.ctx, &settings)?;
            evaluate_run(SweepPoint::new(spec.id, &noise, seed), &run, exp.evalset, exp.embeddings)
        })
        .collect::<Result<_>>()?;
    let mut merged = SweepResult::default();
    for part in parts {
        merged.extend(part);
    }
    merged.sort_canonical();
    Ok(merged)
}

/// Sweeps the noise level of one mechanism. `epsilon` is required for
/// [`NoiseKind::LaplaceDp`] and ignored otherwise.
pub fn noise_sweep(
    spec: &SimulationSpec,
    kind: NoiseKind,
    levels: &[f64],
    epsilon: Option<f64>,
    seeds: &[u64],
    base: &RunSettings,
    exp: Experiment<'_>,
) -> Result<SweepResult> {
    let noises = levels
        .iter()
        .map(|&l| NoiseMechanism::new(kind, l, epsilon))
        .collect::<Result<Vec<_>>>()?;
    run_points(spec, &noises, seeds, base, exp)
}

/// Sweeps ε of the Laplace mechanism at a fixed noise level.
pub fn epsilon_sweep(
    spec: &SimulationSpec,
    epsilons: &[f64],
    noise_level: f64,
    seeds: &[u64],
    base: &RunSettings,
    exp: Experiment<'_>,
) -> Result<SweepResult> {
    let noises = epsilons
        .iter()
        .map(|&e| NoiseMechanism::laplace(noise_level, e))
        .collect::<Result<Vec<_>>>()?;
    run_points(spec, &noises, seeds, base, exp)
}
