//! CIFAR-10 binary ingestion.
//!
//! Record layout: 1 label byte (0-9) followed by 3072 pixel bytes, channel
//! major (1024 R, 1024 G, 1024 B), each channel row-major 32x32. Pixel
//! bytes map to floats in [0,1] as byte/255.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::dataio::{DataMatrix, LabeledData};
use crate::error::{EffcodeError, Result};

pub const CIFAR_SIDE: usize = 32;
pub const CIFAR_PIXELS: usize = CIFAR_SIDE * CIFAR_SIDE;
pub const CIFAR_RECORD_LEN: usize = 1 + 3 * CIFAR_PIXELS;
pub const CIFAR_CLASSES: u32 = 10;

#[derive(Debug, Clone, Default)]
pub struct CifarOptions {
    /// Upper bound on loaded records across all files; `None` loads all.
    pub max_images: Option<usize>,
    /// Collapse RGB to luma 0.299R + 0.587G + 0.114B.
    pub grayscale: bool,
    /// Block-mean pool each channel down to `side x side`; must divide 32.
    pub downsample: Option<usize>,
}

impl CifarOptions {
    /// Feature count after the configured transformations.
    pub fn feature_rows(&self) -> Result<usize> {
        let side = match self.downsample {
            Some(s) => {
                if s == 0 || CIFAR_SIDE % s != 0 {
                    return Err(EffcodeError::invalid(
                        "downsample",
                        format!("side {} must be a positive divisor of {}", s, CIFAR_SIDE),
                    ));
                }
                s
            }
            None => CIFAR_SIDE,
        };
        let channels = if self.grayscale { 1 } else { 3 };
        Ok(channels * side * side)
    }
}

/// Loads CIFAR-10 binary data from a single `.bin` file or from a directory
/// containing `data_batch_*.bin` files (read in name order).
pub fn load_cifar10(path: impl AsRef<Path>, opts: &CifarOptions) -> Result<LabeledData> {
    let path = path.as_ref();
    let files = batch_files(path)?;
    let rows = opts.feature_rows()?;
    let budget = opts.max_images.unwrap_or(usize::MAX);

    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<u32> = Vec::new();
    'files: for file in &files {
        if columns.len() >= budget {
            break;
        }
        let bytes = fs::read(file).map_err(|e| EffcodeError::io(file, e))?;
        if bytes.len() % CIFAR_RECORD_LEN != 0 {
            return Err(EffcodeError::Format {
                format: "CIFAR-10",
                path: file.clone(),
                reason: format!(
                    "file length {} is not a multiple of {}; record truncated at byte offset {}",
                    bytes.len(),
                    CIFAR_RECORD_LEN,
                    bytes.len() - bytes.len() % CIFAR_RECORD_LEN
                ),
            });
        }
        for (rec, chunk) in bytes.chunks_exact(CIFAR_RECORD_LEN).enumerate() {
            if columns.len() >= budget {
                break 'files;
            }
            let label = chunk[0];
            if label > 9 {
                return Err(EffcodeError::Format {
                    format: "CIFAR-10",
                    path: file.clone(),
                    reason: format!(
                        "label byte {} > 9 at byte offset {}",
                        label,
                        rec * CIFAR_RECORD_LEN
                    ),
                });
            }
            columns.push(decode_pixels(&chunk[1..], opts));
            labels.push(u32::from(label));
        }
    }

    let mut values = Array2::zeros((rows, columns.len()));
    for (j, col) in columns.iter().enumerate() {
        debug_assert_eq!(col.len(), rows);
        for (i, &v) in col.iter().enumerate() {
            values[[i, j]] = v;
        }
    }
    LabeledData::new(DataMatrix::from_finite(values), labels, CIFAR_CLASSES)
}

fn batch_files(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| EffcodeError::io(path, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .map(|n| n.starts_with("data_batch_") && n.ends_with(".bin"))
                    .unwrap_or(false)
            })
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(EffcodeError::invalid(
                "path",
                format!("no data_batch_*.bin files in {}", path.display()),
            ));
        }
        Ok(files)
    } else if path.exists() {
        Ok(vec![path.to_path_buf()])
    } else {
        Err(EffcodeError::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
        ))
    }
}

fn decode_pixels(pixels: &[u8], opts: &CifarOptions) -> Vec<f64> {
    debug_assert_eq!(pixels.len(), 3 * CIFAR_PIXELS);
    let to_f = |b: u8| f64::from(b) / 255.0;
    let channels: Vec<Vec<f64>> = if opts.grayscale {
        let mut luma = Vec::with_capacity(CIFAR_PIXELS);
        for i in 0..CIFAR_PIXELS {
            let r = to_f(pixels[i]);
            let g = to_f(pixels[CIFAR_PIXELS + i]);
            let b = to_f(pixels[2 * CIFAR_PIXELS + i]);
            luma.push(0.299 * r + 0.587 * g + 0.114 * b);
        }
        vec![luma]
    } else {
        (0..3)
            .map(|c| {
                pixels[c * CIFAR_PIXELS..(c + 1) * CIFAR_PIXELS]
                    .iter()
                    .map(|&b| to_f(b))
                    .collect()
            })
            .collect()
    };
    match opts.downsample {
        None => channels.concat(),
        Some(side) => {
            let mut out = Vec::with_capacity(channels.len() * side * side);
            for chan in &channels {
                out.extend(block_mean(chan, CIFAR_SIDE, side));
            }
            out
        }
    }
}

/// Block-mean pooling of a row-major `from x from` image to `to x to`;
/// `to` must divide `from`.
pub fn block_mean(image: &[f64], from: usize, to: usize) -> Vec<f64> {
    debug_assert_eq!(image.len(), from * from);
    debug_assert!(to >= 1 && from % to == 0);
    let f = from / to;
    let norm = 1.0 / (f * f) as f64;
    let mut out = Vec::with_capacity(to * to);
    for br in 0..to {
        for bc in 0..to {
            let mut acc = 0.0;
            for r in 0..f {
                for c in 0..f {
                    acc += image[(br * f + r) * from + (bc * f + c)];
                }
            }
            out.push(acc * norm);
        }
    }
    out
}

/// Serializes records into the CIFAR-10 binary layout.
pub fn write_cifar_file(
    path: impl AsRef<Path>,
    records: &[(u8, Vec<u8>)],
) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::with_capacity(records.len() * CIFAR_RECORD_LEN);
    for (label, pixels) in records {
        if *label > 9 {
            return Err(EffcodeError::invalid("label", format!("{} > 9", label)));
        }
        if pixels.len() != 3 * CIFAR_PIXELS {
            return Err(EffcodeError::invalid(
                "pixels",
                format!("expected {} bytes, got {}", 3 * CIFAR_PIXELS, pixels.len()),
            ));
        }
        bytes.push(*label);
        bytes.extend_from_slice(pixels);
    }
    fs::write(path, bytes).map_err(|e| EffcodeError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_mean_averages_blocks() {
        let img: Vec<f64> = (0..16).map(|i| i as f64).collect();
        let out = block_mean(&img, 4, 2);
        assert_eq!(out, vec![2.5, 4.5, 10.5, 12.5]);
    }

    #[test]
    fn feature_rows_tracks_options() {
        let full = CifarOptions::default();
        assert_eq!(full.feature_rows().unwrap(), 3072);
        let gray16 = CifarOptions {
            grayscale: true,
            downsample: Some(16),
            ..Default::default()
        };
        assert_eq!(gray16.feature_rows().unwrap(), 256);
        let bad = CifarOptions {
            downsample: Some(7),
            ..Default::default()
        };
        assert!(bad.feature_rows().is_err());
    }
}
