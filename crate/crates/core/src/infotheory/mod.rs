//! Nonparametric information-theoretic estimation: digamma and ball
//! volumes, an exact k-d tree, the k-nearest-neighbor differential entropy
//! estimator, per-feature CDF transforms, multi-information of a feature
//! layer, and spatial mutual-information profiles.

mod cdf;
mod entropy;
mod kdtree;
mod mi;
mod special;

pub use cdf::{cdf_apply, cdf_fit, CdfTransform};
pub use entropy::{knn_entropy, EntropyEstimate};
pub use mi::{
    multi_information, multi_information_with, pairwise_mi, spatial_mi_profile, EntropyParams,
    MiProfile,
};
pub use special::{digamma, log_ball_volume};
