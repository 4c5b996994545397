//! Structure stacks on disk: one container holding D0, M0, whitening
//! tensors per layer, and a JSON metadata block with the stopping context.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::dataio::{load_container, save_container, Container, Tensor, WhitenTransform};
use crate::error::{EffcodeError, Result};
use crate::infotheory::{EntropyEstimate, EntropyParams};
use crate::sparsecode::{Dictionary, GroupSpec};
use crate::structlearn::mask::StructureMask;
use crate::structlearn::stack::{LayerStructure, StructureStack};

pub const STRUCTURE_KIND: &str = "structure_stack";

#[derive(Debug, Serialize, Deserialize)]
struct StructureMeta {
    kind: String,
    depth: usize,
    epsilon: f64,
    density: f64,
    lambda: Vec<f64>,
    group_size: Option<usize>,
    entropy_trace: Vec<EntropyEstimate>,
    entropy_params: EntropyParams,
    whiten_eps: f64,
}

pub fn save_structure(path: impl AsRef<Path>, stack: &StructureStack) -> Result<()> {
    let path = path.as_ref();
    let meta = StructureMeta {
        kind: STRUCTURE_KIND.to_string(),
        depth: stack.depth(),
        epsilon: stack.stop_epsilon,
        density: stack.mask_density,
        lambda: stack.layers.iter().map(|l| l.lambda).collect(),
        group_size: stack.group.map(|g| g.group_size),
        entropy_trace: stack.entropy_trace.clone(),
        entropy_params: stack.entropy_params,
        whiten_eps: stack.layers[0].whiten.eps,
    };
    let mut c = Container::new();
    c.metadata = serde_json::to_value(&meta)?;
    for (k, layer) in stack.layers.iter().enumerate() {
        c.insert(
            &format!("D{}", k),
            Tensor::F64 {
                shape: vec![layer.dictionary.atoms(), layer.dictionary.input_dim()],
                data: layer.dictionary.array().iter().copied().collect(),
            },
        )?;
        c.insert(
            &format!("M{}", k),
            Tensor::U8 {
                shape: vec![layer.mask.rows(), layer.mask.cols()],
                data: layer.mask.array().iter().map(|&v| v as u8).collect(),
            },
        )?;
        c.insert(
            &format!("white{}_mean", k),
            Tensor::F64 {
                shape: vec![layer.whiten.mean.len()],
                data: layer.whiten.mean.to_vec(),
            },
        )?;
        c.insert(
            &format!("white{}_proj", k),
            Tensor::F64 {
                shape: vec![layer.whiten.projection.nrows(), layer.whiten.projection.ncols()],
                data: layer.whiten.projection.iter().copied().collect(),
            },
        )?;
    }
    save_container(path, &c)
}

fn f64_matrix(c: &Container, name: &str, path: &Path) -> Result<Array2<f64>> {
    match c.get(name) {
        Some(Tensor::F64 { shape, data }) if shape.len() == 2 => {
            Ok(Array2::from_shape_vec((shape[0], shape[1]), data.clone())
                .expect("shape validated on load"))
        }
        Some(_) => Err(EffcodeError::Format {
            format: "NSLF",
            path: path.to_path_buf(),
            reason: format!("tensor {:?} is not a 2-D f64 matrix", name),
        }),
        None => Err(EffcodeError::TensorNotFound {
            name: name.to_string(),
            path: path.to_path_buf(),
        }),
    }
}

fn f64_vector(c: &Container, name: &str, path: &Path) -> Result<Array1<f64>> {
    match c.get(name) {
        Some(Tensor::F64 { shape, data }) if shape.len() == 1 => {
            Ok(Array1::from_vec(data.clone()))
        }
        Some(_) => Err(EffcodeError::Format {
            format: "NSLF",
            path: path.to_path_buf(),
            reason: format!("tensor {:?} is not a 1-D f64 vector", name),
        }),
        None => Err(EffcodeError::TensorNotFound {
            name: name.to_string(),
            path: path.to_path_buf(),
        }),
    }
}

fn mask_matrix(c: &Container, name: &str, path: &Path) -> Result<StructureMask> {
    match c.get(name) {
        Some(Tensor::U8 { shape, data }) if shape.len() == 2 => {
            let values = Array2::from_shape_vec(
                (shape[0], shape[1]),
                data.iter().map(|&b| b as f64).collect(),
            )
            .expect("shape validated on load");
            StructureMask::new(values)
        }
        Some(_) => Err(EffcodeError::Format {
            format: "NSLF",
            path: path.to_path_buf(),
            reason: format!("tensor {:?} is not a 2-D u8 mask", name),
        }),
        None => Err(EffcodeError::TensorNotFound {
            name: name.to_string(),
            path: path.to_path_buf(),
        }),
    }
}

pub fn load_structure(path: impl AsRef<Path>) -> Result<StructureStack> {
    let path = path.as_ref();
    let c = load_container(path)?;
    let meta: StructureMeta = serde_json::from_value(c.metadata.clone()).map_err(|e| {
        EffcodeError::Format {
            format: "NSLF",
            path: path.to_path_buf(),
            reason: format!("structure metadata: {}", e),
        }
    })?;
    if meta.kind != STRUCTURE_KIND {
        return Err(EffcodeError::Format {
            format: "NSLF",
            path: path.to_path_buf(),
            reason: format!("container kind {:?} is not a structure stack", meta.kind),
        });
    }
    if meta.depth < 1
        || meta.entropy_trace.len() != meta.depth + 1
        || meta.lambda.len() != meta.depth
    {
        return Err(EffcodeError::Format {
            format: "NSLF",
            path: path.to_path_buf(),
            reason: "inconsistent depth, lambda, or entropy trace".to_string(),
        });
    }

    let mut layers = Vec::with_capacity(meta.depth);
    for k in 0..meta.depth {
        let dictionary = Dictionary::new(f64_matrix(&c, &format!("D{}", k), path)?)?;
        let mask = mask_matrix(&c, &format!("M{}", k), path)?;
        if mask.rows() != dictionary.atoms() || mask.cols() != dictionary.input_dim() {
            return Err(EffcodeError::Format {
                format: "NSLF",
                path: path.to_path_buf(),
                reason: format!("layer {} mask and dictionary shapes differ", k),
            });
        }
        let whiten = WhitenTransform {
            mean: f64_vector(&c, &format!("white{}_mean", k), path)?,
            projection: f64_matrix(&c, &format!("white{}_proj", k), path)?,
            eps: meta.whiten_eps,
        };
        layers.push(LayerStructure {
            whiten,
            dictionary,
            mask,
            entropy: meta.entropy_trace[k + 1],
            lambda: meta.lambda[k],
        });
    }

    let group = meta.group_size.map(GroupSpec::new).transpose()?;
    Ok(StructureStack {
        layers,
        stop_epsilon: meta.epsilon,
        mask_density: meta.density,
        group,
        entropy_params: meta.entropy_params,
        entropy_trace: meta.entropy_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::DataMatrix;
    use crate::rng;
    use crate::structlearn::mask::threshold_mask;
    use rand::Rng;

    fn tiny_stack() -> StructureStack {
        let mut stream = rng::stream(11, 0);
        let mut values: Array2<f64> = Array2::from_shape_fn((4, 6), |_| stream.gen_range(-1.0..1.0));
        for mut row in values.rows_mut() {
            let norm = row.dot(&row).sqrt();
            row.mapv_inplace(|v| v / norm);
        }
        let dictionary = Dictionary::new(values).unwrap();
        let mask = threshold_mask(&dictionary, 0.5).unwrap();
        let x = DataMatrix::new(Array2::from_shape_fn((6, 30), |_| stream.gen_range(-1.0..1.0)))
            .unwrap();
        let whiten = crate::dataio::whiten_fit(&x, 1e-5).unwrap();
        let trace = vec![
            EntropyEstimate { value: -2.0, k: 3, n: 30, d: 6 },
            EntropyEstimate { value: -1.0, k: 3, n: 30, d: 4 },
        ];
        StructureStack {
            layers: vec![LayerStructure {
                whiten,
                dictionary,
                mask,
                entropy: trace[1],
                lambda: 0.15,
            }],
            stop_epsilon: 0.05,
            mask_density: 0.5,
            group: Some(GroupSpec::new(2).unwrap()),
            entropy_params: EntropyParams::default(),
            entropy_trace: trace,
        }
    }

    #[test]
    fn round_trip_preserves_everything() {
        let stack = tiny_stack();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stack.nslf");
        save_structure(&path, &stack).unwrap();
        let back = load_structure(&path).unwrap();
        assert_eq!(back.depth(), 1);
        assert_eq!(back.layers[0].dictionary.array(), stack.layers[0].dictionary.array());
        assert_eq!(back.layers[0].mask, stack.layers[0].mask);
        assert_eq!(back.layers[0].whiten.mean, stack.layers[0].whiten.mean);
        assert_eq!(back.layers[0].whiten.projection, stack.layers[0].whiten.projection);
        assert_eq!(back.entropy_trace, stack.entropy_trace);
        assert_eq!(back.stop_epsilon, stack.stop_epsilon);
        assert_eq!(back.mask_density, stack.mask_density);
        assert_eq!(back.group, stack.group);
    }

    #[test]
    fn rejects_wrong_kind() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("other.nslf");
        let mut c = Container::new();
        c.metadata = serde_json::json!({"kind": "something_else"});
        save_container(&path, &c).unwrap();
        assert!(load_structure(&path).is_err());
    }
}
