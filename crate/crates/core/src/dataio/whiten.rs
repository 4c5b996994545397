//! ZCA whitening: symmetric transform that maps the sample covariance to
//! the identity while staying as close as possible to the original
//! coordinates.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};

use crate::dataio::DataMatrix;
use crate::error::{EffcodeError, Result};

/// A fitted whitening transform: `z = projection * (x - mean)`.
#[derive(Debug, Clone)]
pub struct WhitenTransform {
    pub mean: Array1<f64>,
    pub projection: Array2<f64>,
    pub eps: f64,
}

impl WhitenTransform {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// The identity transform (useful when whitening is disabled).
    pub fn identity(dim: usize) -> Self {
        WhitenTransform {
            mean: Array1::zeros(dim),
            projection: Array2::eye(dim),
            eps: 0.0,
        }
    }
}

/// Fits ZCA whitening on `x`: eigendecompose the covariance of the centered
/// data (divisor N), clamp eigenvalues at 0, and form
/// `E diag(1/sqrt(lambda + eps)) E^T`. A direction with `lambda + eps == 0`
/// is zeroed (pseudo-inverse convention) rather than amplified to infinity.
pub fn whiten_fit(x: &DataMatrix, eps: f64) -> Result<WhitenTransform> {
    if x.cols() < 2 {
        return Err(EffcodeError::invalid(
            "x",
            format!("whitening needs >= 2 examples, got {}", x.cols()),
        ));
    }
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(EffcodeError::invalid("eps", "must be finite and >= 0"));
    }
    let d = x.rows();
    let n = x.cols() as f64;
    let mean = x.array().sum_axis(ndarray::Axis(1)) / n;
    let centered = &x.array() - &mean.view().insert_axis(ndarray::Axis(1));
    let cov = centered.dot(&centered.t()) / n;

    let cov_na = DMatrix::from_fn(d, d, |i, j| cov[[i, j]]);
    let eigen = cov_na.symmetric_eigen();
    let mut scales = Vec::with_capacity(d);
    for i in 0..d {
        let lam = eigen.eigenvalues[i].max(0.0) + eps;
        scales.push(if lam > 0.0 { 1.0 / lam.sqrt() } else { 0.0 });
    }
    // projection = E diag(scales) E^T, built as (E diag) E^T.
    let mut scaled = eigen.eigenvectors.clone();
    for (i, s) in scales.iter().enumerate() {
        scaled.column_mut(i).scale_mut(*s);
    }
    let proj_na = scaled * eigen.eigenvectors.transpose();
    let projection = Array2::from_shape_fn((d, d), |(i, j)| proj_na[(i, j)]);

    Ok(WhitenTransform {
        mean,
        projection,
        eps,
    })
}

/// Applies a fitted transform: `projection * (x - mean)`.
pub fn whiten_apply(t: &WhitenTransform, x: &DataMatrix) -> Result<DataMatrix> {
    if x.rows() != t.dim() {
        return Err(EffcodeError::shape(
            "whiten_apply",
            format!("{} rows", t.dim()),
            format!("{} rows", x.rows()),
        ));
    }
    let centered = &x.array() - &t.mean.view().insert_axis(ndarray::Axis(1));
    DataMatrix::new(t.projection.dot(&centered))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn identity_covariance_gives_identity_projection() {
        let r = std::f64::consts::SQRT_2;
        let x = DataMatrix::new(array![
            [r, -r, 0.0, 0.0],
            [0.0, 0.0, r, -r],
        ])
        .unwrap();
        let t = whiten_fit(&x, 0.0).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((t.projection[[i, j]] - want).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn anisotropic_covariance_whitens_exactly() {
        // Four points (+-2, +-1): covariance (divisor N) is diag(4, 1).
        let x = DataMatrix::new(array![
            [2.0, 2.0, -2.0, -2.0],
            [1.0, -1.0, 1.0, -1.0],
        ])
        .unwrap();
        let t = whiten_fit(&x, 0.0).unwrap();
        let z = whiten_apply(&t, &x).unwrap();
        let n = z.cols() as f64;
        let cov = z.array().dot(&z.array().t()) / n;
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (cov[[i, j]] - want).abs() < 1e-6,
                    "cov[{},{}] = {}",
                    i,
                    j,
                    cov[[i, j]]
                );
            }
        }
    }

    #[test]
    fn rank_deficient_with_eps_stays_finite() {
        // Duplicated feature row: covariance is singular.
        let x = DataMatrix::new(array![
            [1.0, 2.0, 3.0, 4.0],
            [1.0, 2.0, 3.0, 4.0],
        ])
        .unwrap();
        let t = whiten_fit(&x, 1e-2).unwrap();
        assert!(t.projection.iter().all(|v| v.is_finite()));
        let z = whiten_apply(&t, &x).unwrap();
        assert!(z.array().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn constant_data_maps_to_zero() {
        let x = DataMatrix::new(array![[5.0, 5.0, 5.0]]).unwrap();
        let t = whiten_fit(&x, 0.0).unwrap();
        let z = whiten_apply(&t, &x).unwrap();
        assert!(z.array().iter().all(|&v| v.abs() < 1e-12));
    }
}
