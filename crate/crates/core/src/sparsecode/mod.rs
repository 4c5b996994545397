//! Sparse coding: soft-thresholding operators, accelerated proximal-gradient
//! inference, and minibatch dictionary learning.

mod dict;
mod fista;
mod shrink;

pub use dict::{
    calibrate_lambda, code_sparsity, dict_update, initial_dictionary, learn_dictionary,
    learn_dictionary_batched, DictLearnResult, Dictionary, DEFAULT_MINIBATCH,
};
pub use fista::{
    coding_objective, fista_encode, fista_encode_warm, kkt_residual_l1, lipschitz_estimate,
    CodingConfig,
};
pub use shrink::{
    shrink_group, shrink_group_inplace, shrink_l1, shrink_l1_inplace, shrink_scalar, GroupSpec,
};
