//! Shrinkage (proximal) operators for the l1 and group-l2,1 penalties.

use ndarray::{Array1, ArrayView1};

use crate::error::{EffcodeError, Result};

/// Atoms partitioned into consecutive disjoint groups of equal size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupSpec {
    pub group_size: usize,
}

impl GroupSpec {
    pub fn new(group_size: usize) -> Result<Self> {
        if group_size < 1 {
            return Err(EffcodeError::invalid("group_size", "must be >= 1"));
        }
        Ok(GroupSpec { group_size })
    }

    pub fn check_len(&self, len: usize) -> Result<()> {
        if len % self.group_size != 0 {
            return Err(EffcodeError::invalid(
                "group_size",
                format!("{} atoms not divisible by group size {}", len, self.group_size),
            ));
        }
        Ok(())
    }

    pub fn group_of(&self, atom: usize) -> usize {
        atom / self.group_size
    }
}

/// Soft thresholding: sign(u_i)·(|u_i| − λ)₊.
pub fn shrink_l1(u: ArrayView1<'_, f64>, lambda: f64) -> Array1<f64> {
    u.mapv(|v| shrink_scalar(v, lambda))
}

#[inline]
pub fn shrink_scalar(v: f64, lambda: f64) -> f64 {
    let mag = v.abs() - lambda;
    if mag > 0.0 {
        mag * v.signum()
    } else {
        0.0
    }
}

pub fn shrink_l1_inplace(u: &mut [f64], lambda: f64) {
    for v in u {
        *v = shrink_scalar(*v, lambda);
    }
}

/// Block soft thresholding: each group scaled by (1 − λ/‖u_g‖₂)₊; a
/// zero-norm group maps to zeros.
pub fn shrink_group(u: ArrayView1<'_, f64>, groups: &GroupSpec, lambda: f64) -> Result<Array1<f64>> {
    groups.check_len(u.len())?;
    let mut out = u.to_owned();
    shrink_group_inplace(out.as_slice_mut().expect("owned contiguous"), groups, lambda);
    Ok(out)
}

pub fn shrink_group_inplace(u: &mut [f64], groups: &GroupSpec, lambda: f64) {
    debug_assert_eq!(u.len() % groups.group_size, 0);
    for chunk in u.chunks_mut(groups.group_size) {
        let norm = chunk.iter().map(|v| v * v).sum::<f64>().sqrt();
        let factor = if norm > lambda {
            1.0 - lambda / norm
        } else {
            0.0
        };
        for v in chunk {
            *v *= factor;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn l1_closed_form_examples() {
        assert_eq!(shrink_scalar(2.5, 1.0), 1.5);
        assert_eq!(shrink_scalar(0.5, 1.0), 0.0);
        assert_eq!(shrink_scalar(-3.0, 1.0), -2.0);
        assert_eq!(shrink_scalar(0.0, 0.0), 0.0);
    }

    #[test]
    fn group_closed_form_examples() {
        let g = GroupSpec::new(2).unwrap();
        // ||(3,4)|| = 5, factor 0.8.
        let out = shrink_group(array![3.0, 4.0].view(), &g, 1.0).unwrap();
        assert!((out[0] - 2.4).abs() < 1e-15);
        assert!((out[1] - 3.2).abs() < 1e-15);
        // Block dead zone.
        let dead = shrink_group(array![0.3, 0.4].view(), &g, 1.0).unwrap();
        assert_eq!(dead, array![0.0, 0.0]);
        // lambda = 0 is the identity.
        let id = shrink_group(array![1.0, -2.0].view(), &g, 0.0).unwrap();
        assert_eq!(id, array![1.0, -2.0]);
    }

    #[test]
    fn singleton_groups_reduce_to_l1() {
        let g = GroupSpec::new(1).unwrap();
        let u = array![2.5, -0.5, 0.0, -3.0, 1.0];
        let a = shrink_group(u.view(), &g, 0.7).unwrap();
        let b = shrink_l1(u.view(), 0.7);
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn length_must_divide() {
        let g = GroupSpec::new(2).unwrap();
        assert!(shrink_group(array![1.0, 2.0, 3.0].view(), &g, 0.1).is_err());
    }
}
