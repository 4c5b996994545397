//! Diagnostics on learned dictionaries.

use crate::error::{EffcodeError, Result};
use crate::sparsecode::Dictionary;

/// For each atom over a grid×grid tiling of its (side × side) pixel layout,
/// the largest fraction of the atom's energy contained in one tile:
/// max_j ‖atom∣block j‖² / ‖atom‖². 1.0 means perfectly block-local, 1/grid²
/// means evenly spread. Zero-norm atoms score 0.0.
pub fn block_localization(d: &Dictionary, grid: usize) -> Result<Vec<f64>> {
    if grid < 1 {
        return Err(EffcodeError::invalid("grid", "must be at least 1"));
    }
    let dim = d.input_dim();
    let side = (dim as f64).sqrt().round() as usize;
    if side * side != dim {
        return Err(EffcodeError::invalid(
            "d",
            format!("input dim {} is not a square pixel layout", dim),
        ));
    }
    if side % grid != 0 {
        return Err(EffcodeError::invalid(
            "grid",
            format!("{} does not divide image side {}", grid, side),
        ));
    }
    let block = side / grid;
    let mut out = Vec::with_capacity(d.atoms());
    for atom in d.array().rows() {
        let total: f64 = atom.iter().map(|v| v * v).sum();
        if total == 0.0 {
            out.push(0.0);
            continue;
        }
        let mut best = 0.0f64;
        for by in 0..grid {
            for bx in 0..grid {
                let mut energy = 0.0;
                for y in 0..block {
                    for x in 0..block {
                        let v = atom[(by * block + y) * side + bx * block + x];
                        energy += v * v;
                    }
                }
                best = best.max(energy / total);
            }
        }
        out.push(best);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn single_block_atoms_score_one() {
        // 6x6 image, 3x3 grid of 2x2 blocks; atom lives in block (0,0).
        let mut values = Array2::zeros((1, 36));
        values[[0, 0]] = 0.5;
        values[[0, 1]] = 0.5;
        values[[0, 6]] = 0.5;
        values[[0, 7]] = 0.5;
        let d = Dictionary::new(values).unwrap();
        let loc = block_localization(&d, 3).unwrap();
        assert!((loc[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn uniform_atom_scores_one_over_blocks() {
        let values = Array2::from_elem((1, 36), 1.0 / 6.0);
        let d = Dictionary::new(values).unwrap();
        let loc = block_localization(&d, 3).unwrap();
        assert!((loc[0] - 1.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_square_or_undividable_layouts() {
        let d = Dictionary::new(Array2::from_elem((1, 10), 0.1)).unwrap();
        assert!(block_localization(&d, 3).is_err());
        let d = Dictionary::new(Array2::from_elem((1, 36), 0.1)).unwrap();
        assert!(block_localization(&d, 4).is_err());
    }
}
