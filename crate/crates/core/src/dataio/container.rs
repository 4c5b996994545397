//! NSLF tensor container: a small self-describing binary format for
//! persisting named tensors plus one JSON metadata document.
//!
//! Layout: magic `NSLF`, u32 LE version (=1), u64 LE manifest length, UTF-8
//! JSON manifest (array of `{name, dtype, shape, byte_offset, byte_len,
//! crc32}`), then the concatenated little-endian row-major payloads. Offsets
//! are relative to the start of the payload section. Round trips are
//! bit-exact and every payload is CRC-checked on load.
//!
//! Metadata rides along as a reserved `__meta__` u8 tensor holding UTF-8
//! JSON; it is invisible in the tensor namespace.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataio::DataMatrix;
use crate::error::{EffcodeError, Result};

const MAGIC: &[u8; 4] = b"NSLF";
const VERSION: u32 = 1;
const META_TENSOR: &str = "__meta__";

#[derive(Debug, Clone, PartialEq)]
pub enum Tensor {
    F32 { shape: Vec<usize>, data: Vec<f32> },
    F64 { shape: Vec<usize>, data: Vec<f64> },
    U8 { shape: Vec<usize>, data: Vec<u8> },
    I64 { shape: Vec<usize>, data: Vec<i64> },
}

impl Tensor {
    pub fn dtype(&self) -> &'static str {
        match self {
            Tensor::F32 { .. } => "f32",
            Tensor::F64 { .. } => "f64",
            Tensor::U8 { .. } => "u8",
            Tensor::I64 { .. } => "i64",
        }
    }

    pub fn shape(&self) -> &[usize] {
        match self {
            Tensor::F32 { shape, .. } => shape,
            Tensor::F64 { shape, .. } => shape,
            Tensor::U8 { shape, .. } => shape,
            Tensor::I64 { shape, .. } => shape,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Tensor::F32 { data, .. } => data.len(),
            Tensor::F64 { data, .. } => data.len(),
            Tensor::U8 { data, .. } => data.len(),
            Tensor::I64 { data, .. } => data.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check_shape(&self) -> Result<()> {
        let expect: usize = self.shape().iter().product();
        if expect != self.len() {
            return Err(EffcodeError::shape(
                "tensor",
                format!("{} elements per shape {:?}", expect, self.shape()),
                format!("{} elements", self.len()),
            ));
        }
        Ok(())
    }

    fn payload(&self) -> Vec<u8> {
        match self {
            Tensor::F32 { data, .. } => {
                let mut out = Vec::with_capacity(data.len() * 4);
                for v in data {
                    out.extend_from_slice(&v.to_le_bytes());
                }
                out
            }
            Tensor::F64 { data, .. } => {
                let mut out = Vec::with_capacity(data.len() * 8);
                for v in data {
                    out.extend_from_slice(&v.to_le_bytes());
                }
                out
            }
            Tensor::U8 { data, .. } => data.clone(),
            Tensor::I64 { data, .. } => {
                let mut out = Vec::with_capacity(data.len() * 8);
                for v in data {
                    out.extend_from_slice(&v.to_le_bytes());
                }
                out
            }
        }
    }

    fn from_payload(dtype: &str, shape: Vec<usize>, bytes: &[u8]) -> Option<Tensor> {
        match dtype {
            "f32" => {
                if bytes.len() % 4 != 0 {
                    return None;
                }
                let data = bytes
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                Some(Tensor::F32 { shape, data })
            }
            "f64" => {
                if bytes.len() % 8 != 0 {
                    return None;
                }
                let data = bytes
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                Some(Tensor::F64 { shape, data })
            }
            "u8" => Some(Tensor::U8 {
                shape,
                data: bytes.to_vec(),
            }),
            "i64" => {
                if bytes.len() % 8 != 0 {
                    return None;
                }
                let data = bytes
                    .chunks_exact(8)
                    .map(|c| i64::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                Some(Tensor::I64 { shape, data })
            }
            _ => None,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    name: String,
    dtype: String,
    shape: Vec<usize>,
    byte_offset: u64,
    byte_len: u64,
    crc32: u32,
}

/// An in-memory container: named tensors in insertion order plus a JSON
/// metadata document. Insertion order is preserved on disk, so identical
/// construction yields byte-identical files.
#[derive(Debug, Clone, Default)]
pub struct Container {
    entries: Vec<(String, Tensor)>,
    pub metadata: serde_json::Value,
}

impl Container {
    pub fn new() -> Self {
        Container {
            entries: Vec::new(),
            metadata: serde_json::Value::Null,
        }
    }

    pub fn insert(&mut self, name: &str, tensor: Tensor) -> Result<()> {
        if name == META_TENSOR {
            return Err(EffcodeError::invalid("name", "reserved tensor name"));
        }
        if self.entries.iter().any(|(n, _)| n == name) {
            return Err(EffcodeError::invalid(
                "name",
                format!("duplicate tensor name {:?}", name),
            ));
        }
        tensor.check_shape()?;
        self.entries.push((name.to_string(), tensor));
        Ok(())
    }

    pub fn insert_matrix(&mut self, name: &str, m: &DataMatrix) -> Result<()> {
        let data = m.array().iter().copied().collect();
        self.insert(
            name,
            Tensor::F64 {
                shape: vec![m.rows(), m.cols()],
                data,
            },
        )
    }

    pub fn insert_f64(&mut self, name: &str, values: &[f64]) -> Result<()> {
        self.insert(
            name,
            Tensor::F64 {
                shape: vec![values.len()],
                data: values.to_vec(),
            },
        )
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Extracts a 2-D f64 tensor as a DataMatrix.
    pub fn matrix(&self, name: &str, path: &Path) -> Result<DataMatrix> {
        let t = self.get(name).ok_or_else(|| EffcodeError::TensorNotFound {
            name: name.to_string(),
            path: path.to_path_buf(),
        })?;
        match t {
            Tensor::F64 { shape, data } if shape.len() == 2 => {
                let arr = Array2::from_shape_vec((shape[0], shape[1]), data.clone())
                    .expect("shape checked on insert/load");
                DataMatrix::new(arr)
            }
            _ => Err(EffcodeError::Format {
                format: "NSLF",
                path: path.to_path_buf(),
                reason: format!("tensor {:?} is not a 2-D f64 matrix", name),
            }),
        }
    }

    pub fn f64_vec(&self, name: &str, path: &Path) -> Result<Vec<f64>> {
        let t = self.get(name).ok_or_else(|| EffcodeError::TensorNotFound {
            name: name.to_string(),
            path: path.to_path_buf(),
        })?;
        match t {
            Tensor::F64 { data, .. } => Ok(data.clone()),
            _ => Err(EffcodeError::Format {
                format: "NSLF",
                path: path.to_path_buf(),
                reason: format!("tensor {:?} is not f64", name),
            }),
        }
    }

    /// Serializes to the NSLF byte layout.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut manifest = Vec::new();
        let mut payload = Vec::new();
        let mut emit = |name: &str, tensor: &Tensor, payload: &mut Vec<u8>| -> Result<()> {
            tensor.check_shape()?;
            let bytes = tensor.payload();
            let entry = ManifestEntry {
                name: name.to_string(),
                dtype: tensor.dtype().to_string(),
                shape: tensor.shape().to_vec(),
                byte_offset: payload.len() as u64,
                byte_len: bytes.len() as u64,
                crc32: crc32fast::hash(&bytes),
            };
            payload.extend_from_slice(&bytes);
            manifest.push(entry);
            Ok(())
        };
        for (name, tensor) in &self.entries {
            emit(name, tensor, &mut payload)?;
        }
        if !self.metadata.is_null() {
            let meta_bytes = serde_json::to_vec(&self.metadata)?;
            let t = Tensor::U8 {
                shape: vec![meta_bytes.len()],
                data: meta_bytes,
            };
            emit(META_TENSOR, &t, &mut payload)?;
        }
        let manifest_json = serde_json::to_vec(&manifest)?;
        let mut out = Vec::with_capacity(16 + manifest_json.len() + payload.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(manifest_json.len() as u64).to_le_bytes());
        out.extend_from_slice(&manifest_json);
        out.extend_from_slice(&payload);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let format_err = |reason: String| EffcodeError::Format {
            format: "NSLF",
            path: path.to_path_buf(),
            reason,
        };
        if bytes.len() < 16 {
            return Err(format_err(format!(
                "file too short ({} bytes) for header",
                bytes.len()
            )));
        }
        if &bytes[0..4] != MAGIC {
            return Err(format_err("bad magic bytes".to_string()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(format_err(format!(
                "unsupported version {} (expected {})",
                version, VERSION
            )));
        }
        let manifest_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let payload_start = 16usize
            .checked_add(manifest_len)
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| format_err("manifest length exceeds file size".to_string()))?;
        let manifest: Vec<ManifestEntry> = serde_json::from_slice(&bytes[16..payload_start])
            .map_err(|e| format_err(format!("manifest is not valid JSON: {}", e)))?;
        let payload = &bytes[payload_start..];

        let mut container = Container::new();
        let mut meta: Option<serde_json::Value> = None;
        for entry in manifest {
            let start = entry.byte_offset as usize;
            let end = start
                .checked_add(entry.byte_len as usize)
                .filter(|&e| e <= payload.len())
                .ok_or_else(|| {
                    format_err(format!(
                        "tensor {:?} payload range out of bounds",
                        entry.name
                    ))
                })?;
            let slice = &payload[start..end];
            if crc32fast::hash(slice) != entry.crc32 {
                return Err(EffcodeError::ChecksumMismatch {
                    name: entry.name,
                    path: path.to_path_buf(),
                });
            }
            let tensor = Tensor::from_payload(&entry.dtype, entry.shape, slice)
                .ok_or_else(|| {
                    format_err(format!(
                        "tensor {:?}: dtype {:?} inconsistent with payload length",
                        entry.name, entry.dtype
                    ))
                })?;
            tensor.check_shape().map_err(|_| {
                format_err(format!(
                    "tensor {:?}: shape does not match element count",
                    entry.name
                ))
            })?;
            if entry.name == META_TENSOR {
                let Tensor::U8 { data, .. } = &tensor else {
                    return Err(format_err("metadata tensor must be u8".to_string()));
                };
                meta = Some(
                    serde_json::from_slice(data)
                        .map_err(|e| format_err(format!("metadata is not valid JSON: {}", e)))?,
                );
            } else {
                container.entries.push((entry.name, tensor));
            }
        }
        if let Some(m) = meta {
            container.metadata = m;
        }
        Ok(container)
    }
}

/// Writes a container to disk.
pub fn save_container(path: impl AsRef<Path>, container: &Container) -> Result<()> {
    let path = path.as_ref();
    let bytes = container.to_bytes()?;
    fs::write(path, bytes).map_err(|e| EffcodeError::io(path, e))
}

/// Reads a container from disk, verifying header, manifest, and checksums.
pub fn load_container(path: impl AsRef<Path>) -> Result<Container> {
    let path: PathBuf = path.as_ref().to_path_buf();
    let bytes = fs::read(&path).map_err(|e| EffcodeError::io(&path, e))?;
    Container::from_bytes(&bytes, &path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut c = Container::new();
        c.insert(
            "m",
            Tensor::F64 {
                shape: vec![3, 4],
                data: (0..12).map(|i| (i as f64).sqrt()).collect(),
            },
        )
        .unwrap();
        c.insert(
            "labels",
            Tensor::I64 {
                shape: vec![4],
                data: vec![0, 3, -7, 9],
            },
        )
        .unwrap();
        c.metadata = serde_json::json!({"depth": 2});
        let bytes = c.to_bytes().unwrap();
        let back = Container::from_bytes(&bytes, Path::new("mem")).unwrap();
        assert_eq!(back.to_bytes().unwrap(), bytes);
        assert_eq!(back.get("m"), c.get("m"));
        assert_eq!(back.metadata, c.metadata);
    }

    #[test]
    fn empty_container_is_valid() {
        let c = Container::new();
        let bytes = c.to_bytes().unwrap();
        let back = Container::from_bytes(&bytes, Path::new("mem")).unwrap();
        assert!(back.is_empty());
    }

    #[test]
    fn corrupt_payload_byte_is_detected() {
        let mut c = Container::new();
        c.insert(
            "v",
            Tensor::F32 {
                shape: vec![5],
                data: vec![1.0, 2.0, 3.0, 4.0, 5.0],
            },
        )
        .unwrap();
        let mut bytes = c.to_bytes().unwrap();
        let n = bytes.len();
        bytes[n - 3] ^= 0x40;
        let err = Container::from_bytes(&bytes, Path::new("mem")).unwrap_err();
        assert!(matches!(err, EffcodeError::ChecksumMismatch { .. }));
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut c = Container::new();
        let t = Tensor::U8 {
            shape: vec![1],
            data: vec![7],
        };
        c.insert("a", t.clone()).unwrap();
        assert!(c.insert("a", t).is_err());
    }

    #[test]
    fn shape_element_mismatch_rejected() {
        let mut c = Container::new();
        let t = Tensor::U8 {
            shape: vec![3],
            data: vec![1, 2],
        };
        assert!(c.insert("bad", t).is_err());
    }
}
