use super::params::{Dense, MlpParameters, LAYER_SIZES};
use crate::error::{Error, Result};

/// Predicted probabilities are clamped to `[c, 1 - c]` inside the loss.
pub const PROBABILITY_CLAMP: f64 = 1e-7;

/// A feature vector with its 0/1 target.
pub type LabeledInput<'a> = (&'a [f64], f64);

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn affine(layer: &Dense, input: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend((0..layer.outputs).map(|o| {
        layer.bias[o] + layer.row(o).iter().zip(input).map(|(w, x)| w * x).sum::<f64>()
    }));
}

/// Pre-activations of every layer for one input.
struct Trace {
    /// `activations[0]` is the input; `activations[k]` feeds layer `k`.
    activations: Vec<Vec<f64>>,
    logit: f64,
}

fn trace(params: &MlpParameters, x: &[f64]) -> Trace {
    let layers = params.layers();
    let mut activations = Vec::with_capacity(layers.len());
    activations.push(x.to_vec());
    let mut z = Vec::new();
    for (k, layer) in layers.iter().enumerate() {
        affine(layer, &activations[k], &mut z);
        if k + 1 < layers.len() {
            activations.push(z.iter().map(|&v| v.max(0.0)).collect());
        }
    }
    Trace {
        activations,
        logit: z[0],
    }
}

/// Probability that `x` is a disease symptom.
pub fn forward(params: &MlpParameters, x: &[f64]) -> Result<f64> {
    if x.len() != LAYER_SIZES[0] {
        return Err(Error::Shape(format!(
            "input has {} components, expected {}",
            x.len(),
            LAYER_SIZES[0]
        )));
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("classifier input"));
    }
    Ok(sigmoid(trace(params, x).logit))
}

/// Mean clamped binary cross-entropy over `batch` and its exact gradient.
///
/// Inputs are assumed to be finite vectors of the input width; the training
/// loop only feeds encoded phrases, which satisfy both.
pub fn loss_and_gradient(params: &MlpParameters, batch: &[LabeledInput<'_>]) -> (f64, MlpParameters) {
    assert!(!batch.is_empty(), "loss_and_gradient needs a non-empty batch");
    let n = batch.len() as f64;
    let layers = params.layers();
    let mut grad = MlpParameters::zeros();
    let mut loss = 0.0;

    for &(x, y) in batch {
        let t = trace(params, x);
        let p = sigmoid(t.logit);
        let clamped = p.clamp(PROBABILITY_CLAMP, 1.0 - PROBABILITY_CLAMP);
        loss -= y * clamped.ln() + (1.0 - y) * (1.0 - clamped).ln();

        // d(loss)/d(logit); zero where the clamp is active
        let dlogit = if p == clamped { (p - y) / n } else { 0.0 };
        if dlogit == 0.0 {
            continue;
        }

        let mut delta = vec![dlogit];
        for k in (0..layers.len()).rev() {
            let layer = &layers[k];
            let input = &t.activations[k];
            let g = &mut grad.layers_mut()[k];
            for (o, &d) in delta.iter().enumerate() {
                g.bias[o] += d;
                let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (gw, &a) in row.iter_mut().zip(input) {
                    *gw += d * a;
                }
            }
            if k == 0 {
                break;
            }
            // back through the ReLU feeding this layer
            delta = (0..layer.inputs)
                .map(|i| {
                    if input[i] > 0.0 {
                        delta.iter().enumerate().map(|(o, &d)| d * layer.weight(o, i)).sum()
                    } else {
                        0.0
                    }
                })
                .collect();
        }
    }
    (loss / n, grad)
}
