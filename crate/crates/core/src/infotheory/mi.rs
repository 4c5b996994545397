//! Multi-information and pairwise/spatial mutual information, all built on
//! the same nearest-neighbor entropy estimator.

use ndarray::Array2;
use rand::Rng;

use crate::dataio::DataMatrix;
use crate::error::{EffcodeError, Result};
use crate::infotheory::cdf::{cdf_apply, cdf_fit};
use crate::infotheory::entropy::{knn_entropy, EntropyEstimate};
use crate::rng;

/// Settings for layer-entropy estimation: neighbor order, optional seeded
/// feature-row subsampling (the estimator degrades in high dimension, so
/// deep stacks estimate on a fixed-size random subset of feature rows,
/// with the same policy at every layer), and the subsampling seed.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct EntropyParams {
    pub k: usize,
    pub feature_subsample: Option<usize>,
    pub seed: u64,
}

impl Default for EntropyParams {
    fn default() -> Self {
        EntropyParams {
            k: 5,
            feature_subsample: Some(32),
            seed: 0,
        }
    }
}

/// H(Z) where Z is the per-feature CDF transform of `u`. By construction
/// this estimates −I(U): it is ≤ 0 up to estimator noise, and closer to 0
/// means less redundancy between the features of `u`.
pub fn multi_information(u: &DataMatrix, k: usize) -> Result<EntropyEstimate> {
    multi_information_with(
        u,
        &EntropyParams {
            k,
            feature_subsample: None,
            seed: 0,
        },
    )
}

/// `multi_information` with optional seeded feature-row subsampling.
///
/// Subsampling draws only from rows that actually vary: a constant feature
/// (for example an atom that never activates) contributes zero to every
/// pairwise distance while still inflating the dimension the estimator
/// corrects for, which drags Ĥ down by an amount unrelated to any
/// dependence in the data. If every row is constant the matrix is used
/// as-is and the estimate is the degenerate all-duplicates value.
pub fn multi_information_with(u: &DataMatrix, params: &EntropyParams) -> Result<EntropyEstimate> {
    let subsampled;
    let target = match params.feature_subsample {
        Some(limit) if limit == 0 => {
            return Err(EffcodeError::invalid(
                "feature_subsample",
                "subsample size must be >= 1",
            ));
        }
        Some(limit) => {
            let arr = u.array();
            let eligible: Vec<usize> = (0..u.rows())
                .filter(|&r| {
                    let row = arr.row(r);
                    row.iter().any(|v| *v != row[0])
                })
                .collect();
            if eligible.is_empty() {
                u
            } else {
                let rows = if eligible.len() > limit {
                    sample_indices(eligible.len(), limit, params.seed)
                        .into_iter()
                        .map(|i| eligible[i])
                        .collect()
                } else {
                    eligible
                };
                if rows.len() == u.rows() {
                    u
                } else {
                    subsampled = u.select_rows(&rows)?;
                    &subsampled
                }
            }
        }
        None => u,
    };
    let z = cdf_apply(&cdf_fit(target)?, target)?;
    knn_entropy(&z, params.k)
}

/// `count` distinct indices from `0..n`, in increasing order.
fn sample_indices(n: usize, count: usize, seed: u64) -> Vec<usize> {
    debug_assert!(count <= n);
    let mut stream = rng::stream(seed, 0);
    let mut pool: Vec<usize> = (0..n).collect();
    let mut picked = Vec::with_capacity(count);
    for _ in 0..count {
        picked.push(pool.swap_remove(stream.gen_range(0..pool.len())));
    }
    picked.sort_unstable();
    picked
}

/// Î(a;b) = Ĥ(a) + Ĥ(b) − Ĥ([a;b]), clamped below at 0.
///
/// The joint's dimension order is canonicalized (lexicographically smaller
/// sample first), so Î(a;b) == Î(b;a) bit-for-bit.
pub fn pairwise_mi(a: &[f64], b: &[f64], k: usize) -> Result<f64> {
    if a.len() != b.len() {
        return Err(EffcodeError::shape(
            "pairwise_mi",
            format!("{} samples", a.len()),
            format!("{} samples", b.len()),
        ));
    }
    let n = a.len();
    let ha = knn_entropy(&row_matrix(&[a], n)?, k)?;
    let hb = knn_entropy(&row_matrix(&[b], n)?, k)?;
    let ordered = if lex_le(a, b) { [a, b] } else { [b, a] };
    let hab = knn_entropy(&row_matrix(&ordered, n)?, k)?;
    Ok((ha.value + hb.value - hab.value).max(0.0))
}

fn lex_le(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Less => return true,
            std::cmp::Ordering::Greater => return false,
            std::cmp::Ordering::Equal => {}
        }
    }
    true
}

fn row_matrix(rows: &[&[f64]], n: usize) -> Result<DataMatrix> {
    let mut values = Array2::zeros((rows.len(), n));
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            values[[i, j]] = v;
        }
    }
    DataMatrix::new(values)
}

/// Mutual information between pixel pairs as a function of their spatial
/// distance.
#[derive(Debug, Clone)]
pub struct MiProfile {
    pub distances: Vec<f64>,
    pub mi: Vec<f64>,
    pub n_pairs: usize,
}

/// For each offset δ, samples `n_pairs` (image, pixel-pair) combinations
/// whose pixel locations are at Euclidean distance within [δ−0.5, δ+0.5],
/// pools the value pairs, and estimates their mutual information.
pub fn spatial_mi_profile(
    images: &DataMatrix,
    side: usize,
    offsets: &[usize],
    n_pairs: usize,
    k: usize,
    seed: u64,
) -> Result<MiProfile> {
    if images.rows() != side * side {
        return Err(EffcodeError::shape(
            "spatial_mi_profile",
            format!("{} rows for side {}", side * side, side),
            format!("{} rows", images.rows()),
        ));
    }
    if images.cols() == 0 {
        return Err(EffcodeError::invalid("images", "no images"));
    }
    if offsets.is_empty() {
        return Err(EffcodeError::invalid("offsets", "offset list is empty"));
    }
    for w in offsets.windows(2) {
        if w[1] <= w[0] {
            return Err(EffcodeError::invalid(
                "offsets",
                "offsets must be strictly increasing",
            ));
        }
    }
    if n_pairs <= k {
        return Err(EffcodeError::invalid(
            "n_pairs",
            format!("need more than k={} pairs, got {}", k, n_pairs),
        ));
    }

    let mut mi = Vec::with_capacity(offsets.len());
    for (offset_idx, &delta) in offsets.iter().enumerate() {
        if delta < 1 || delta >= side {
            return Err(EffcodeError::invalid(
                "offsets",
                format!("offset {} outside [1, {})", delta, side),
            ));
        }
        let displacements = displacement_band(delta, side);
        debug_assert!(!displacements.is_empty());
        let mut stream = rng::stream(seed, offset_idx as u64);
        let mut a = Vec::with_capacity(n_pairs);
        let mut b = Vec::with_capacity(n_pairs);
        while a.len() < n_pairs {
            let img = stream.gen_range(0..images.cols());
            let r = stream.gen_range(0..side) as isize;
            let c = stream.gen_range(0..side) as isize;
            let (dr, dc) = displacements[stream.gen_range(0..displacements.len())];
            let (qr, qc) = (r + dr, c + dc);
            if qr < 0 || qc < 0 || qr >= side as isize || qc >= side as isize {
                continue;
            }
            let p = (r * side as isize + c) as usize;
            let q = (qr * side as isize + qc) as usize;
            a.push(images.array()[[p, img]]);
            b.push(images.array()[[q, img]]);
        }
        mi.push(pairwise_mi(&a, &b, k)?);
    }
    Ok(MiProfile {
        distances: offsets.iter().map(|&d| d as f64).collect(),
        mi,
        n_pairs,
    })
}

/// Nonzero displacements whose length falls within [delta−0.5, delta+0.5].
fn displacement_band(delta: usize, side: usize) -> Vec<(isize, isize)> {
    let lo = delta as f64 - 0.5;
    let hi = delta as f64 + 0.5;
    let reach = side as isize - 1;
    let mut out = Vec::new();
    for dr in -reach..=reach {
        for dc in -reach..=reach {
            if dr == 0 && dc == 0 {
                continue;
            }
            let len = ((dr * dr + dc * dc) as f64).sqrt();
            if len >= lo && len <= hi {
                out.push((dr, dc));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;

    #[test]
    fn independent_features_have_near_zero_multi_information() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let values = Array2::from_shape_fn((2, 4000), |_| rng.gen_range(0.0..1.0));
        let u = DataMatrix::new(values).unwrap();
        let h = multi_information(&u, 5).unwrap();
        assert!(h.value.abs() < 0.1, "H = {}", h.value);
    }

    #[test]
    fn duplicated_feature_row_drives_estimate_negative() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let mut values = Array2::zeros((2, 3000));
        for j in 0..3000 {
            let v: f64 = rng.gen_range(0.0..1.0);
            values[[0, j]] = v;
            values[[1, j]] = v;
        }
        let u = DataMatrix::new(values).unwrap();
        let h = multi_information(&u, 5).unwrap();
        assert!(h.value <= -1.0, "H = {}", h.value);
    }

    #[test]
    fn example_order_does_not_matter() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let values = Array2::from_shape_fn((3, 400), |_| rng.gen_range(-1.0..1.0));
        let u = DataMatrix::new(values.clone()).unwrap();
        let perm: Vec<usize> = (0..400).rev().collect();
        let v = u.select_columns(&perm).unwrap();
        assert_eq!(
            multi_information(&u, 4).unwrap(),
            multi_information(&v, 4).unwrap()
        );
    }

    #[test]
    fn pairwise_mi_is_bitwise_symmetric() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        let a: Vec<f64> = (0..500).map(|_| rng.gen_range(0.0..1.0)).collect();
        let b: Vec<f64> = a
            .iter()
            .map(|v| 0.7 * v + 0.3 * rng.gen_range(0.0..1.0))
            .collect();
        let ab = pairwise_mi(&a, &b, 4).unwrap();
        let ba = pairwise_mi(&b, &a, 4).unwrap();
        assert_eq!(ab.to_bits(), ba.to_bits());
    }

    #[test]
    fn identical_samples_give_large_mi() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let a: Vec<f64> = (0..2000).map(|_| rng.gen_range(0.0..1.0)).collect();
        let mi = pairwise_mi(&a, &a, 5).unwrap();
        assert!(mi >= 2.0, "MI = {}", mi);
    }

    #[test]
    fn subsampling_reduces_estimation_dimension() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let values = Array2::from_shape_fn((50, 300), |_| rng.gen_range(0.0..1.0));
        let u = DataMatrix::new(values).unwrap();
        let params = EntropyParams {
            k: 3,
            feature_subsample: Some(8),
            seed: 21,
        };
        let h = multi_information_with(&u, &params).unwrap();
        assert_eq!(h.d, 8);
        assert_eq!(
            multi_information_with(&u, &params).unwrap(),
            h,
            "subsampling must be seed-deterministic"
        );
    }
}
