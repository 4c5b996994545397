//! Masked networks primed by learned structure: shrinkage activations,
//! mask-constrained back-propagation, SGD training, and persistence.

mod model;
mod persist;
mod train;

pub use model::{
    backward, forward, init_from_structure, softmax_xent, ForwardCache, Gradients, MaskedLayer,
    NetworkModel, StructureInit,
};
pub(crate) use model::uniform_fan_in;
pub use persist::{load_model, save_model, MODEL_KIND};
pub use train::{evaluate, sgd_step, train, EpochStats, TrainConfig};
