//! Network models on disk: weight and mask tensors per layer, the head, the
//! input whitening, and a JSON metadata block.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::dataio::{load_container, save_container, Container, Tensor, WhitenTransform};
use crate::error::{EffcodeError, Result};
use crate::netprime::model::{MaskedLayer, NetworkModel, StructureInit};
use crate::sparsecode::GroupSpec;

pub const MODEL_KIND: &str = "network_model";

#[derive(Debug, Serialize, Deserialize)]
struct ModelMeta {
    kind: String,
    depth: usize,
    lambda: Vec<f64>,
    group_size: Option<usize>,
    mode: StructureInit,
    classes: usize,
    whiten_eps: f64,
}

pub fn save_model(path: impl AsRef<Path>, m: &NetworkModel) -> Result<()> {
    let path = path.as_ref();
    m.validate()?;
    let meta = ModelMeta {
        kind: MODEL_KIND.to_string(),
        depth: m.layers.len(),
        lambda: m.layers.iter().map(|l| l.lambda).collect(),
        group_size: m.layers[0].group.map(|g| g.group_size),
        mode: m.mode,
        classes: m.classes,
        whiten_eps: m.whiten.eps,
    };
    let mut c = Container::new();
    c.metadata = serde_json::to_value(&meta)?;
    for (k, layer) in m.layers.iter().enumerate() {
        c.insert(
            &format!("W{}", k),
            Tensor::F64 {
                shape: vec![layer.output_dim(), layer.input_dim()],
                data: layer.weights().iter().copied().collect(),
            },
        )?;
        c.insert(
            &format!("M{}", k),
            Tensor::U8 {
                shape: vec![layer.output_dim(), layer.input_dim()],
                data: layer.mask().iter().map(|&v| v as u8).collect(),
            },
        )?;
    }
    c.insert(
        "head_w",
        Tensor::F64 {
            shape: vec![m.head_w.nrows(), m.head_w.ncols()],
            data: m.head_w.iter().copied().collect(),
        },
    )?;
    c.insert(
        "head_b",
        Tensor::F64 {
            shape: vec![m.head_b.len()],
            data: m.head_b.to_vec(),
        },
    )?;
    c.insert(
        "whiten_mean",
        Tensor::F64 {
            shape: vec![m.whiten.mean.len()],
            data: m.whiten.mean.to_vec(),
        },
    )?;
    c.insert(
        "whiten_proj",
        Tensor::F64 {
            shape: vec![m.whiten.projection.nrows(), m.whiten.projection.ncols()],
            data: m.whiten.projection.iter().copied().collect(),
        },
    )?;
    save_container(path, &c)
}

fn f64_tensor_2d(c: &Container, name: &str, path: &Path) -> Result<Array2<f64>> {
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

fn f64_tensor_1d(c: &Container, name: &str, path: &Path) -> Result<Array1<f64>> {
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

fn u8_tensor_2d(c: &Container, name: &str, path: &Path) -> Result<Array2<f64>> {
    match c.get(name) {
        Some(Tensor::U8 { shape, data }) if shape.len() == 2 => Ok(Array2::from_shape_vec(
            (shape[0], shape[1]),
            data.iter().map(|&b| b as f64).collect(),
        )
        .expect("shape validated on load")),
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

pub fn load_model(path: impl AsRef<Path>) -> Result<NetworkModel> {
    let path = path.as_ref();
    let c = load_container(path)?;
    let meta: ModelMeta = serde_json::from_value(c.metadata.clone()).map_err(|e| {
        EffcodeError::Format {
            format: "NSLF",
            path: path.to_path_buf(),
            reason: format!("model metadata: {}", e),
        }
    })?;
    if meta.kind != MODEL_KIND {
        return Err(EffcodeError::Format {
            format: "NSLF",
            path: path.to_path_buf(),
            reason: format!("container kind {:?} is not a network model", meta.kind),
        });
    }
    if meta.depth < 1 || meta.lambda.len() != meta.depth {
        return Err(EffcodeError::Format {
            format: "NSLF",
            path: path.to_path_buf(),
            reason: "inconsistent depth or lambda list".to_string(),
        });
    }
    let group = meta.group_size.map(GroupSpec::new).transpose()?;
    let mut layers = Vec::with_capacity(meta.depth);
    for k in 0..meta.depth {
        let weights = f64_tensor_2d(&c, &format!("W{}", k), path)?;
        let mask = u8_tensor_2d(&c, &format!("M{}", k), path)?;
        layers.push(MaskedLayer::new(weights, mask, meta.lambda[k], group)?);
    }
    let model = NetworkModel {
        whiten: WhitenTransform {
            mean: f64_tensor_1d(&c, "whiten_mean", path)?,
            projection: f64_tensor_2d(&c, "whiten_proj", path)?,
            eps: meta.whiten_eps,
        },
        layers,
        head_w: f64_tensor_2d(&c, "head_w", path)?,
        head_b: f64_tensor_1d(&c, "head_b", path)?,
        classes: meta.classes,
        mode: meta.mode,
    };
    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::Rng;

    use crate::rng;

    #[test]
    fn model_round_trip_is_exact() {
        let mut stream = rng::stream(21, 0);
        let w: Array2<f64> = Array2::from_shape_fn((4, 3), |_| stream.gen_range(-1.0..1.0));
        let mut mask = Array2::ones((4, 3));
        mask[[0, 1]] = 0.0;
        mask[[2, 2]] = 0.0;
        let layer = MaskedLayer::new(w, mask, 0.1, Some(GroupSpec::new(2).unwrap())).unwrap();
        let model = NetworkModel {
            whiten: WhitenTransform::identity(3),
            layers: vec![layer],
            head_w: Array2::from_shape_fn((2, 4), |_| stream.gen_range(-1.0..1.0)),
            head_b: Array1::from_vec(vec![0.5, -0.5]),
            classes: 2,
            mode: StructureInit::WeightMaskBp,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.nslf");
        save_model(&path, &model).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back.layers[0].weights(), model.layers[0].weights());
        assert_eq!(back.layers[0].mask(), model.layers[0].mask());
        assert_eq!(back.layers[0].lambda, model.layers[0].lambda);
        assert_eq!(back.layers[0].group, model.layers[0].group);
        assert_eq!(back.head_w, model.head_w);
        assert_eq!(back.head_b, model.head_b);
        assert_eq!(back.mode, model.mode);
    }
}
