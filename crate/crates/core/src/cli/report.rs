//! Output writers and small statistics shared by the CLI commands.
//!
//! Numbers destined for CSV go through [`fmt_f64`] (shortest round-trip
//! form), so a rerun with the same config and seed reproduces output files
//! byte for byte. Wall-clock timings live in the JSON sidecars, never in
//! the CSV itself.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{EffcodeError, Result};

/// Shortest decimal form that parses back to exactly the same f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Writes a CSV file: header line, then one line per row, `\n` endings.
pub fn write_csv(path: impl AsRef<Path>, header: &str, rows: &[String]) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::with_capacity(header.len() + rows.iter().map(|r| r.len() + 1).sum::<usize>() + 1);
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| EffcodeError::io(path, e))
}

/// Writes an 8-bit binary PGM (P5) image.
pub fn write_pgm(path: impl AsRef<Path>, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    let path = path.as_ref();
    if pixels.len() != width * height {
        return Err(EffcodeError::shape(
            "write_pgm",
            format!("{} pixels", width * height),
            format!("{}", pixels.len()),
        ));
    }
    let mut file = fs::File::create(path).map_err(|e| EffcodeError::io(path, e))?;
    let header = format!("P5\n{width} {height}\n255\n");
    file.write_all(header.as_bytes())
        .and_then(|_| file.write_all(pixels))
        .map_err(|e| EffcodeError::io(path, e))
}

/// Lays the rows of `atoms` out as a tiled grayscale image, each atom
/// rendered as a `side`x`side` tile normalized to its own [min, max] range
/// (a flat atom renders mid-gray). Tiles are separated by 1px black rules.
pub fn atom_sheet(atoms: &ndarray::Array2<f64>, side: usize) -> Result<(usize, usize, Vec<u8>)> {
    let (m, d) = atoms.dim();
    if side * side != d {
        return Err(EffcodeError::shape(
            "atom_sheet",
            format!("{} columns for side {side}", side * side),
            format!("{d} columns"),
        ));
    }
    let grid_cols = (m as f64).sqrt().ceil() as usize;
    let grid_rows = m.div_ceil(grid_cols);
    let width = grid_cols * (side + 1) + 1;
    let height = grid_rows * (side + 1) + 1;
    let mut pixels = vec![0u8; width * height];
    for a in 0..m {
        let row = atoms.row(a);
        let lo = row.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        let tile_r = (a / grid_cols) * (side + 1) + 1;
        let tile_c = (a % grid_cols) * (side + 1) + 1;
        for p in 0..d {
            let value = if span > 0.0 {
                ((row[p] - lo) / span * 255.0).round() as u8
            } else {
                128
            };
            let (pr, pc) = (p / side, p % side);
            pixels[(tile_r + pr) * width + tile_c + pc] = value;
        }
    }
    Ok((width, height, pixels))
}

/// Spearman rank correlation with average ranks for ties. Returns `None`
/// when either input has zero rank variance (the coefficient is undefined).
pub fn spearman_rho(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    pearson(&ra, &rb)
}

fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        // 1-based ranks; tied values share the mean rank of their run.
        let shared = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = shared;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va <= 0.0 || vb <= 0.0 {
        return None;
    }
    Some(cov / (va * vb).sqrt())
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_detects_monotone_relations() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let up = [10.0, 100.0, 1000.0, 1e4, 1e5];
        let down = [5.0, 4.0, 3.0, 2.0, 1.0];
        assert!((spearman_rho(&a, &up).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman_rho(&a, &down).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_handles_ties_via_average_ranks() {
        let a = [1.0, 1.0, 2.0, 3.0];
        let b = [4.0, 4.0, 5.0, 6.0];
        assert!((spearman_rho(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(average_ranks(&a), vec![1.5, 1.5, 3.0, 4.0]);
    }

    #[test]
    fn spearman_is_undefined_for_constant_input() {
        let flat = [2.0, 2.0, 2.0];
        let a = [1.0, 2.0, 3.0];
        assert!(spearman_rho(&flat, &a).is_none());
        assert!(spearman_rho(&a, &flat).is_none());
    }

    #[test]
    fn fmt_f64_round_trips() {
        for v in [0.1, 1.0 / 3.0, 1e-12, 123456.789, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn atom_sheet_dimensions() {
        let atoms = ndarray::Array2::<f64>::zeros((5, 16));
        let (w, h, px) = atom_sheet(&atoms, 4).unwrap();
        // 5 atoms on a 3-wide grid -> 2 rows.
        assert_eq!(w, 3 * 5 + 1);
        assert_eq!(h, 2 * 5 + 1);
        assert_eq!(px.len(), w * h);
        assert!(atom_sheet(&atoms, 5).is_err());
    }
}
