//! Kozachenko-Leonenko differential entropy from k-nearest-neighbor
//! distances.

use rand::Rng;
use rayon::prelude::*;

use crate::dataio::DataMatrix;
use crate::error::{EffcodeError, Result};
use crate::infotheory::kdtree::KdTree;
use crate::infotheory::special::{digamma, log_ball_volume};
use crate::rng;

/// Seed for the duplicate-breaking jitter stream. Fixed and internal: the
/// guard must depend only on the data, never on caller state, so repeated
/// estimates of the same sample agree bit-for-bit.
const JITTER_SEED: u64 = 0x4a49_5454;

/// A differential-entropy estimate in nats, with the estimator settings
/// that produced it.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EntropyEstimate {
    pub value: f64,
    pub k: usize,
    pub n: usize,
    pub d: usize,
}

/// Ĥ = −ψ(k) + ψ(N) + log c_d + (d/N)·Σ_i log ε(i), where ε(i) is twice
/// the Euclidean distance from example i to its k-th nearest neighbor
/// (self excluded) and c_d is the unit-diameter ball volume.
///
/// Duplicate guard: when the sample contains exactly coincident points,
/// uniform noise of amplitude 1e-10·(per-feature range) is added from a
/// fixed-seed stream before tree construction, so log ε stays defined. A
/// sample whose points are all identical is rejected as degenerate.
pub fn knn_entropy(x: &DataMatrix, k: usize) -> Result<EntropyEstimate> {
    let d = x.rows();
    let n = x.cols();
    if k < 1 {
        return Err(EffcodeError::invalid("k", "neighbor order must be >= 1"));
    }
    if n <= k {
        return Err(EffcodeError::invalid(
            "x",
            format!("need more than k={} examples, got {}", k, n),
        ));
    }

    // Row-major point buffer: point i = example column i.
    let mut points = vec![0.0; n * d];
    for (j, col) in x.array().axis_iter(ndarray::Axis(1)).enumerate() {
        for (t, &v) in col.iter().enumerate() {
            points[j * d + t] = v;
        }
    }

    match duplicate_state(&points, n, d) {
        DuplicateState::AllIdentical => {
            return Err(EffcodeError::invalid(
                "x",
                "degenerate sample: all points identical",
            ));
        }
        DuplicateState::SomeDuplicates => jitter(&mut points, n, d),
        DuplicateState::Distinct => {}
    }

    let tree = KdTree::build(points, n, d);
    let log_eps: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let dist = tree
                .kth_neighbor_distance(i, k)
                .expect("n > k checked above");
            (2.0 * dist).ln()
        })
        .collect();
    // Sorting the addends makes the reduction independent of both thread
    // count and example order, so equal point sets give bit-equal estimates.
    let mut log_eps = log_eps;
    log_eps.sort_unstable_by(f64::total_cmp);
    let mut sum = 0.0;
    for &v in &log_eps {
        if !v.is_finite() {
            return Err(EffcodeError::invalid(
                "x",
                "degenerate sample: coincident points persisted after jitter",
            ));
        }
        sum += v;
    }

    let value =
        -digamma(k as f64)? + digamma(n as f64)? + log_ball_volume(d)? + sum * d as f64 / n as f64;
    Ok(EntropyEstimate { value, k, n, d })
}

enum DuplicateState {
    Distinct,
    SomeDuplicates,
    AllIdentical,
}

fn duplicate_state(points: &[f64], n: usize, d: usize) -> DuplicateState {
    let row = |i: usize| &points[i * d..(i + 1) * d];
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| {
        row(a)
            .iter()
            .zip(row(b))
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut any = false;
    let mut all = true;
    for w in order.windows(2) {
        if row(w[0]) == row(w[1]) {
            any = true;
        } else {
            all = false;
        }
    }
    if all {
        DuplicateState::AllIdentical
    } else if any {
        DuplicateState::SomeDuplicates
    } else {
        DuplicateState::Distinct
    }
}

fn jitter(points: &mut [f64], n: usize, d: usize) {
    let mut amp = vec![0.0; d];
    for dim in 0..d {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let v = points[i * d + dim];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        amp[dim] = 1e-10 * (hi - lo);
    }
    let mut stream = rng::stream(JITTER_SEED, 0);
    for i in 0..n {
        for dim in 0..d {
            // Draw unconditionally so the stream layout depends only on
            // (n, d), not on which features happen to be constant.
            let u: f64 = stream.gen_range(-1.0..1.0);
            points[i * d + dim] += amp[dim] * u;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;

    #[test]
    fn rejects_small_samples_and_degenerate_input() {
        let x = DataMatrix::new(Array2::zeros((2, 4))).unwrap();
        assert!(knn_entropy(&x, 5).is_err()); // n <= k
        let y = DataMatrix::new(Array2::ones((2, 10))).unwrap();
        assert!(knn_entropy(&y, 3).is_err()); // all identical
    }

    #[test]
    fn duplicate_points_are_jittered_not_fatal() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut values = Array2::from_shape_fn((2, 50), |_| rng.gen_range(0.0..1.0));
        for j in 0..10 {
            let (a, b) = (j, j + 10);
            let col = values.column(a).to_owned();
            values.column_mut(b).assign(&col);
        }
        let x = DataMatrix::new(values).unwrap();
        let h = knn_entropy(&x, 3).unwrap();
        assert!(h.value.is_finite());
        // Repeated estimation is bit-identical (fixed jitter stream).
        assert_eq!(h, knn_entropy(&x, 3).unwrap());
    }

    #[test]
    fn gaussian_1d_close_to_analytic() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let values = Array2::from_shape_fn((1, 4000), |_| {
            rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng)
        });
        let x = DataMatrix::new(values).unwrap();
        let h = knn_entropy(&x, 5).unwrap();
        let want = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
        assert!(
            (h.value - want).abs() < 0.08,
            "H = {}, want ~{}",
            h.value,
            want
        );
    }
}
