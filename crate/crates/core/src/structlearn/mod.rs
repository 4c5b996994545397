//! Layer-wise network structure discovery: dictionaries are learned on
//! whitened activations, thresholded into binary connection masks, and
//! stacked until the entropy gain of a new layer becomes marginal.

mod mask;
mod metrics;
mod persist;
mod stack;

pub use mask::{threshold_mask, StructureMask};
pub use metrics::block_localization;
pub use persist::{load_structure, save_structure, STRUCTURE_KIND};
pub use stack::{
    entropy_gain, learn_structure, learn_structure_with, relative_gain, LayerStructure,
    StopCriterion, StructureOptions, StructureStack,
};
