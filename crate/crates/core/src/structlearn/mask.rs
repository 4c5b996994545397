//! Binary connection masks obtained by magnitude-thresholding a dictionary.

use ndarray::Array2;

use crate::error::{EffcodeError, Result};
use crate::sparsecode::Dictionary;

/// A 0/1 matrix with the same shape as the dictionary it was cut from.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureMask {
    values: Array2<f64>,
}

impl StructureMask {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if !values.iter().all(|&v| v == 0.0 || v == 1.0) {
            return Err(EffcodeError::invalid("values", "mask entries must be 0 or 1"));
        }
        Ok(StructureMask { values })
    }

    pub fn ones(rows: usize, cols: usize) -> Self {
        StructureMask {
            values: Array2::ones((rows, cols)),
        }
    }

    pub fn array(&self) -> ndarray::ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn count_ones(&self) -> usize {
        self.values.iter().filter(|&&v| v == 1.0).count()
    }

    pub fn density(&self) -> f64 {
        self.count_ones() as f64 / (self.rows() * self.cols()) as f64
    }
}

/// Keeps the round(density·m·d) largest-magnitude dictionary entries and
/// zeroes the rest. Ties are resolved toward the larger magnitude, then the
/// lower flat (row-major) index, so the achieved density is always within
/// 1/(m·d) of the request and the mask of c·D (c > 0) equals the mask of D.
pub fn threshold_mask(d: &Dictionary, density: f64) -> Result<StructureMask> {
    if !density.is_finite() || density <= 0.0 || density > 1.0 {
        return Err(EffcodeError::invalid("density", "must lie in (0, 1]"));
    }
    let (m, dim) = (d.atoms(), d.input_dim());
    let total = m * dim;
    if density == 1.0 {
        return Ok(StructureMask::ones(m, dim));
    }
    let flat: Vec<f64> = d.array().iter().copied().collect();
    if flat.iter().all(|&v| v == 0.0) {
        return Err(EffcodeError::invalid(
            "d",
            "all-zero dictionary: thresholding below density 1 is degenerate",
        ));
    }
    let keep = (density * total as f64).round() as usize;
    let mut order: Vec<usize> = (0..total).collect();
    order.sort_unstable_by(|&a, &b| {
        flat[b]
            .abs()
            .total_cmp(&flat[a].abs())
            .then_with(|| a.cmp(&b))
    });
    let mut values = Array2::zeros((m, dim));
    for &idx in order.iter().take(keep) {
        values[[idx / dim, idx % dim]] = 1.0;
    }
    StructureMask::new(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    use crate::rng;

    fn dict_from(rows: usize, cols: usize, vals: Vec<f64>) -> Dictionary {
        let mut values = Array2::from_shape_vec((rows, cols), vals).unwrap();
        for mut row in values.rows_mut() {
            let norm = row.dot(&row).sqrt();
            if norm > 1.0 {
                row.mapv_inplace(|v| v / norm);
            }
        }
        Dictionary::new(values).unwrap()
    }

    #[test]
    fn keeps_entries_at_or_above_the_cut() {
        let d = dict_from(1, 3, vec![0.05, -0.3, 0.8]);
        let mask = threshold_mask(&d, 2.0 / 3.0).unwrap();
        assert_eq!(mask.array().as_slice().unwrap(), &[0.0, 1.0, 1.0]);
    }

    #[test]
    fn full_density_gives_all_ones() {
        let d = dict_from(2, 2, vec![0.1, 0.0, 0.0, 0.2]);
        let mask = threshold_mask(&d, 1.0).unwrap();
        assert_eq!(mask.count_ones(), 4);
    }

    #[test]
    fn count_is_exact_on_random_dictionaries() {
        let mut stream = rng::stream(5, 0);
        let values = Array2::from_shape_fn((100, 100), |_| stream.gen_range(-0.01..0.01));
        let d = Dictionary::new(values).unwrap();
        let mask = threshold_mask(&d, 0.1).unwrap();
        assert_eq!(mask.count_ones(), 1000);
    }

    #[test]
    fn scaling_by_powers_of_two_preserves_the_mask() {
        let mut stream = rng::stream(6, 0);
        let values = Array2::from_shape_fn((8, 16), |_| stream.gen_range(-0.05..0.05));
        let d = Dictionary::new(values.clone()).unwrap();
        let scaled = Dictionary::new(values * 0.25).unwrap();
        let a = threshold_mask(&d, 0.3).unwrap();
        let b = threshold_mask(&scaled, 0.3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_dictionary_rejected_below_full_density() {
        let d = Dictionary::new(Array2::zeros((3, 3))).unwrap();
        assert!(threshold_mask(&d, 0.5).is_err());
        assert!(threshold_mask(&d, 1.0).is_ok());
    }

    #[test]
    fn tie_break_prefers_lower_flat_index() {
        let d = dict_from(1, 4, vec![0.5, -0.5, 0.5, 0.1]);
        let mask = threshold_mask(&d, 0.5).unwrap();
        assert_eq!(mask.array().as_slice().unwrap(), &[1.0, 1.0, 0.0, 0.0]);
    }
}
