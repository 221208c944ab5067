//! The symptom classifier: a 50-32-16-8-1 multilayer perceptron with ReLU
//! hidden units, a sigmoid output, binary cross-entropy loss and Adam.

mod adam;
mod checkpoint;
mod network;
mod params;
mod train;

pub use adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC};
pub use network::{forward, loss_and_gradient, LabeledInput, PROBABILITY_CLAMP};
pub use params::{init_params, Dense, MlpParameters, LAYER_SIZES};
pub use train::{train_local, TrainConfig, TrainOutcome};
