//! Learned fronts and edge weights: an MLP maps node features to the initial
//! condition, a free heat-flow solve carries it forward, and cross-entropy
//! on the labeled nodes drives training. Evaluation clamps the labeled nodes
//! and reads the argmax.

mod checkpoint;
mod front;
mod mlp;
mod objective;
mod optim;
mod train;
mod weights;

pub use checkpoint::{evaluate_checkpoint, incorporate_labels, FrontCheckpoint};
pub use front::{assemble_front, default_front, front_from_logits, FrontTransform};
pub use mlp::{flatten_grads, mlp_forward, Layer, LayerGrad, MlpParams};
pub use objective::{gradients, objective, training_loss, Gradients, LossConfig, Model};
pub use optim::{Optimizer, OptimizerConfig};
pub use train::{train, EpochRecord, TrainConfig, TrainOutcome};
pub use weights::{materialize_weights, EdgeWeightParams};
