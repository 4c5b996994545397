//! Per-feature empirical CDF transforms: each feature row is mapped through
//! its own empirical distribution function, yielding uniform marginals on
//! (0,1) while preserving the dependence structure between features.

use ndarray::Array2;

use crate::dataio::DataMatrix;
use crate::error::{EffcodeError, Result};

/// One fitted feature: distinct sorted sample values with their 1-based
/// average ranks (ties share the mean rank).
#[derive(Debug, Clone)]
struct CdfFeature {
    values: Vec<f64>,
    ranks: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct CdfTransform {
    features: Vec<CdfFeature>,
    n: usize,
}

impl CdfTransform {
    pub fn dim(&self) -> usize {
        self.features.len()
    }

    pub fn sample_count(&self) -> usize {
        self.n
    }
}

/// Fits the per-feature empirical CDF; needs at least 2 examples.
pub fn cdf_fit(u: &DataMatrix) -> Result<CdfTransform> {
    let n = u.cols();
    if n < 2 {
        return Err(EffcodeError::invalid(
            "u",
            format!("cdf_fit needs >= 2 examples, got {}", n),
        ));
    }
    let features = u
        .array()
        .axis_iter(ndarray::Axis(0))
        .map(|row| {
            let mut sorted: Vec<f64> = row.iter().copied().collect();
            sorted.sort_unstable_by(f64::total_cmp);
            let mut values = Vec::new();
            let mut ranks = Vec::new();
            let mut i = 0;
            while i < n {
                let mut j = i;
                while j + 1 < n && sorted[j + 1] == sorted[i] {
                    j += 1;
                }
                values.push(sorted[i]);
                // Positions i..=j (0-based) hold 1-based ranks i+1..=j+1.
                ranks.push((i + j) as f64 / 2.0 + 1.0);
                i = j + 1;
            }
            CdfFeature { values, ranks }
        })
        .collect();
    Ok(CdfTransform { features, n })
}

/// Maps each value through its feature's empirical CDF: an in-sample value
/// v with average rank r maps to (r − 0.5)/N; out-of-sample values
/// interpolate linearly between the neighboring sample ranks, clamped to
/// [0.5/N, 1 − 0.5/N]. Output is always in (0,1) and monotone per feature.
pub fn cdf_apply(t: &CdfTransform, u: &DataMatrix) -> Result<DataMatrix> {
    if u.rows() != t.dim() {
        return Err(EffcodeError::shape(
            "cdf_apply",
            format!("{} rows", t.dim()),
            format!("{} rows", u.rows()),
        ));
    }
    let n = t.n as f64;
    let lo = 0.5 / n;
    let hi = 1.0 - 0.5 / n;
    let mut out = Array2::zeros((u.rows(), u.cols()));
    for (i, feature) in t.features.iter().enumerate() {
        for j in 0..u.cols() {
            let v = u.array()[[i, j]];
            let rank = interpolate_rank(feature, v);
            out[[i, j]] = ((rank - 0.5) / n).clamp(lo, hi);
        }
    }
    Ok(DataMatrix::from_finite(out))
}

fn interpolate_rank(f: &CdfFeature, v: f64) -> f64 {
    match f.values.binary_search_by(|s| s.total_cmp(&v)) {
        Ok(idx) => f.ranks[idx],
        Err(0) => f.ranks[0] - 1.0, // below range; clamp handles the floor
        Err(idx) if idx == f.values.len() => f.ranks[idx - 1] + 1.0,
        Err(idx) => {
            let (v0, v1) = (f.values[idx - 1], f.values[idx]);
            let (r0, r1) = (f.ranks[idx - 1], f.ranks[idx]);
            r0 + (r1 - r0) * (v - v0) / (v1 - v0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rank_arithmetic_matches_hand_computation() {
        let u = DataMatrix::new(array![[3.0, 1.0, 2.0]]).unwrap();
        let t = cdf_fit(&u).unwrap();
        let z = cdf_apply(&t, &u).unwrap();
        let want = [2.5 / 3.0, 0.5 / 3.0, 1.5 / 3.0];
        for (got, want) in z.array().iter().zip(want) {
            assert!((got - want).abs() < 1e-12, "{} vs {}", got, want);
        }
    }

    #[test]
    fn constant_feature_maps_to_half() {
        let u = DataMatrix::new(array![[4.0, 4.0, 4.0, 4.0]]).unwrap();
        let t = cdf_fit(&u).unwrap();
        let z = cdf_apply(&t, &u).unwrap();
        assert!(z.array().iter().all(|&v| (v - 0.5).abs() < 1e-12));
    }

    #[test]
    fn ties_share_mean_rank() {
        let u = DataMatrix::new(array![[1.0, 1.0, 2.0, 5.0]]).unwrap();
        let t = cdf_fit(&u).unwrap();
        let z = cdf_apply(&t, &u).unwrap();
        // Values 1,1 share ranks {1,2} -> 1.5; value 2 has rank 3; 5 rank 4.
        let want = [1.0 / 4.0, 1.0 / 4.0, 2.5 / 4.0, 3.5 / 4.0];
        for (got, want) in z.array().iter().zip(want) {
            assert!((got - want).abs() < 1e-12, "{} vs {}", got, want);
        }
    }

    #[test]
    fn out_of_sample_interpolates_and_clamps() {
        let u = DataMatrix::new(array![[0.0, 1.0, 2.0, 3.0]]).unwrap();
        let t = cdf_fit(&u).unwrap();
        let probe = DataMatrix::new(array![[0.5, -100.0, 100.0]]).unwrap();
        let z = cdf_apply(&t, &probe).unwrap();
        // Midpoint between ranks 1 and 2 -> rank 1.5 -> (1.5-0.5)/4.
        assert!((z.array()[[0, 0]] - 0.25).abs() < 1e-12);
        assert!((z.array()[[0, 1]] - 0.125).abs() < 1e-12); // 0.5/4
        assert!((z.array()[[0, 2]] - 0.875).abs() < 1e-12); // 1 - 0.5/4
    }
}
