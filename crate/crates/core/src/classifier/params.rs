use rand::Rng;

use crate::error::{Error, Result};

/// Widths of the input, hidden and output layers.
pub const LAYER_SIZES: [usize; 5] = [50, 32, 16, 8, 1];

/// A fully connected layer. `weights` is row-major with one row per output.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    #[inline]
    pub fn weight(&self, out: usize, inp: usize) -> f64 {
        self.weights[out * self.inputs + inp]
    }

    pub fn row(&self, out: usize) -> &[f64] {
        &self.weights[out * self.inputs..(out + 1) * self.inputs]
    }
}

/// Weights and biases of the whole network.
///
/// The same type carries gradients and optimizer moments, which share the
/// parameter shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParameters {
    layers: Vec<Dense>,
}

impl MlpParameters {
    /// All-zero parameters of the standard shape.
    pub fn zeros() -> Self {
        MlpParameters {
            layers: LAYER_SIZES
                .windows(2)
                .map(|w| Dense::zeros(w[0], w[1]))
                .collect(),
        }
    }

    /// Checks that `layers` has exactly the standard shapes.
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.len() != LAYER_SIZES.len() - 1 {
            return Err(Error::Shape(format!(
                "expected {} layers, got {}",
                LAYER_SIZES.len() - 1,
                layers.len()
            )));
        }
        for (i, (layer, w)) in layers.iter().zip(LAYER_SIZES.windows(2)).enumerate() {
            if layer.inputs != w[0]
                || layer.outputs != w[1]
                || layer.weights.len() != w[0] * w[1]
                || layer.bias.len() != w[1]
            {
                return Err(Error::Shape(format!(
                    "layer {i}: expected {}→{}, got {}→{} with {} weights and {} biases",
                    w[0],
                    w[1],
                    layer.inputs,
                    layer.outputs,
                    layer.weights.len(),
                    layer.bias.len()
                )));
            }
        }
        Ok(MlpParameters { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn num_values(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Every entry, layer by layer, weights before biases.
    pub fn values(&self) -> impl Iterator<Item = &f64> + '_ {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }

    /// Copies `values` (in [`values`](Self::values) order) into a new set of
    /// parameters with this shape.
    pub fn with_values(&self, values: &[f64]) -> Result<Self> {
        if values.len() != self.num_values() {
            return Err(Error::Shape(format!(
                "expected {} values, got {}",
                self.num_values(),
                values.len()
            )));
        }
        let mut out = self.clone();
        for (dst, src) in out.values_mut().zip(values) {
            *dst = *src;
        }
        Ok(out)
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.values().copied().collect()
    }
}

/// Glorot-uniform weights, zero biases.
pub fn init_params<R: Rng + ?Sized>(rng: &mut R) -> MlpParameters {
    let mut params = MlpParameters::zeros();
    for layer in params.layers_mut() {
        let limit = (6.0 / (layer.inputs + layer.outputs) as f64).sqrt();
        for w in &mut layer.weights {
            *w = rng.random_range(-limit..=limit);
        }
    }
    params
}
