#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use fedpandemic::classifier::{forward, LabeledInput, MlpParameters, PROBABILITY_CLAMP};
use fedpandemic::corpus::MedicalCorpus;
use fedpandemic::embedding::{EmbeddingTable, PhraseVector, EMBEDDING_DIM};
use fedpandemic::evaluation::{build_evalset, EvalSet, Experiment};
use fedpandemic::federation::{ClientUpdate, FederationContext};
use fedpandemic::synth::{ClientDataset, Example, Label};
use fedpandemic::survey::bundled_surveys;

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

pub fn bundled_table() -> EmbeddingTable {
    EmbeddingTable::load(data_path("embeddings-50d.txt"), EMBEDDING_DIM).expect("bundled embeddings load")
}

/// Bundled embeddings, surveys and corpus wired together.
pub struct Fixture {
    pub table: EmbeddingTable,
    pub ctx: FederationContext,
    pub evalset: EvalSet,
}

impl Fixture {
    pub fn bundled() -> Self {
        let table = bundled_table();
        let surveys = bundled_surveys();
        let ctx = FederationContext::new(&surveys, MedicalCorpus::bundled(), &table).unwrap();
        let evalset = build_evalset(&surveys);
        Fixture { table, ctx, evalset }
    }

    pub fn experiment(&self) -> Experiment<'_> {
        Experiment {
            ctx: &self.ctx,
            embeddings: &self.table,
            evalset: &self.evalset,
        }
    }
}

/// Sample mean.
pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// 100 positives at `+e₁` and 100 negatives at `−e₁`.
pub fn separable_dataset() -> ClientDataset {
    let point = |i: usize, sign: f64, label: Label| {
        let mut values = vec![0.0; EMBEDDING_DIM];
        values[0] = sign;
        Example {
            feature: Arc::new(PhraseVector {
                values,
                source_phrase: format!("p{i}"),
                oov_tokens: 0,
            }),
            label,
        }
    };
    let examples = (0..100)
        .map(|i| point(i, 1.0, Label::Positive))
        .chain((100..200).map(|i| point(i, -1.0, Label::Negative)))
        .collect();
    ClientDataset {
        client_id: 0,
        examples,
        n_persons: 200,
    }
}

/// Fraction of examples classified correctly at threshold 0.5.
pub fn training_accuracy(params: &MlpParameters, ds: &ClientDataset) -> f64 {
    let correct = ds
        .examples
        .iter()
        .filter(|e| {
            let p = forward(params, &e.feature.values).unwrap();
            (p >= 0.5) == (e.label == Label::Positive)
        })
        .count();
    correct as f64 / ds.len() as f64
}

/// Straight-line evaluation written without the library's helpers: explicit
/// index loops, weights addressed as `w[o * inputs + i]`.
#[allow(clippy::needless_range_loop)]
pub fn oracle_forward(params: &MlpParameters, x: &[f64]) -> f64 {
    let mut a = x.to_vec();
    let n = params.layers().len();
    for (k, layer) in params.layers().iter().enumerate() {
        let mut z = vec![0.0; layer.outputs];
        for o in 0..layer.outputs {
            let mut s = layer.bias[o];
            for i in 0..layer.inputs {
                s += layer.weights[o * layer.inputs + i] * a[i];
            }
            z[o] = s;
        }
        a = if k + 1 < n { z.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect() } else { z };
    }
    1.0 / (1.0 + (-a[0]).exp())
}

pub fn oracle_loss(params: &MlpParameters, batch: &[LabeledInput<'_>]) -> f64 {
    let total: f64 = batch
        .iter()
        .map(|&(x, y)| {
            let p = oracle_forward(params, x).clamp(PROBABILITY_CLAMP, 1.0 - PROBABILITY_CLAMP);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    total / batch.len() as f64
}

/// Double-double accumulator (Knuth two-sum, fma two-product).
#[derive(Clone, Copy, Default)]
struct DoubleDouble {
    hi: f64,
    lo: f64,
}

impl DoubleDouble {
    fn add_product(&mut self, a: f64, b: f64) {
        let p = a * b;
        let p_err = a.mul_add(b, -p);
        let s = self.hi + p;
        let bb = s - self.hi;
        let s_err = (self.hi - (s - bb)) + (p - bb);
        self.hi = s;
        self.lo += s_err + p_err;
    }

    fn value(self) -> f64 {
        self.hi + self.lo
    }
}

pub fn oracle_mean(updates: &[ClientUpdate]) -> Vec<f64> {
    let total: u64 = updates.iter().map(|u| u.n_examples).sum();
    let n = updates[0].params.num_values();
    (0..n)
        .map(|i| {
            let mut acc = DoubleDouble::default();
            for u in updates {
                acc.add_product(u.n_examples as f64, u.params.to_vec()[i]);
            }
            acc.value() / total as f64
        })
        .collect()
}


/// Smallest |pre-activation| of any hidden ReLU unit over `inputs`.
///
/// Central differences are only meaningful where the loss is smooth; a
/// hidden unit sitting closer to its kink than the perturbation can move it
/// makes the difference quotient straddle two linear pieces.
pub fn min_kink_distance(params: &MlpParameters, inputs: &[Vec<f64>]) -> f64 {
    let mut closest = f64::INFINITY;
    let n = params.layers().len();
    for x in inputs {
        let mut a = x.clone();
        for (k, layer) in params.layers().iter().enumerate() {
            let z: Vec<f64> = (0..layer.outputs)
                .map(|o| layer.bias[o] + (0..layer.inputs).map(|i| layer.weights[o * layer.inputs + i] * a[i]).sum::<f64>())
                .collect();
            if k + 1 < n {
                closest = z.iter().fold(closest, |m, v| m.min(v.abs()));
            }
            a = z.into_iter().map(|v| v.max(0.0)).collect();
        }
    }
    closest
}

/// A random (parameters, 5-example batch) draw for gradient checking whose
/// hidden units all stay at least `margin` away from their kinks.
pub fn gradient_case(rng: &mut impl rand::Rng, margin: f64) -> (MlpParameters, Vec<Vec<f64>>, Vec<f64>) {
    loop {
        let params = fedpandemic::classifier::init_params(rng);
        let values: Vec<f64> = params.values().map(|v| v + rng.random_range(-0.05..0.05)).collect();
        let params = params.with_values(&values).unwrap();
        let xs: Vec<Vec<f64>> = (0..5).map(|_| (0..EMBEDDING_DIM).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let labels: Vec<f64> = (0..5).map(|_| f64::from(rng.random_bool(0.5))).collect();
        if min_kink_distance(&params, &xs) > margin {
            return (params, xs, labels);
        }
    }
}
