//! Data ingestion, synthesis, preprocessing, and tensor persistence.

mod blocks;
mod cifar;
mod container;
mod matrix;
mod surrogate;
mod whiten;

pub use blocks::{synth_blocks, BlockSynthConfig};
pub use cifar::{
    block_mean, load_cifar10, write_cifar_file, CifarOptions, CIFAR_CLASSES, CIFAR_PIXELS,
    CIFAR_RECORD_LEN, CIFAR_SIDE,
};
pub use container::{load_container, save_container, Container, Tensor};
pub use matrix::{DataMatrix, LabeledData};
pub use surrogate::{generate_corpus, CorpusConfig};
pub use whiten::{whiten_apply, whiten_fit, WhitenTransform};
