//! Minibatch SGD over seeded shuffles, plus accuracy evaluation.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;

use crate::dataio::{DataMatrix, LabeledData};
use crate::error::{EffcodeError, Result};
use crate::netprime::model::{backward, forward, softmax_xent, Gradients, NetworkModel};
use crate::rng;

#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub gamma: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub weight_decay: f64,
    /// Classical momentum coefficient; 0 keeps plain SGD.
    pub momentum: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.001,
            epochs: 10,
            batch_size: 128,
            seed: 0,
            weight_decay: 0.0,
            momentum: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.gamma.is_finite() || self.gamma <= 0.0 {
            return Err(EffcodeError::invalid("gamma", "must be finite and > 0"));
        }
        if self.epochs < 1 {
            return Err(EffcodeError::invalid("epochs", "must be >= 1"));
        }
        if self.batch_size < 1 {
            return Err(EffcodeError::invalid("batch_size", "must be >= 1"));
        }
        if !self.weight_decay.is_finite() || self.weight_decay < 0.0 {
            return Err(EffcodeError::invalid("weight_decay", "must be >= 0"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(EffcodeError::invalid("momentum", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// One SGD update: W ← W − γ·(M ∘ δW) on every masked layer (plus optional
/// weight decay on unmasked entries) and the plain update on the head.
/// Masked entries stay exactly zero.
pub fn sgd_step(m: &mut NetworkModel, grads: &Gradients, cfg: &TrainConfig) -> Result<()> {
    cfg.validate()?;
    if grads.layers.len() != m.layers.len() {
        return Err(EffcodeError::shape(
            "sgd_step",
            format!("{} layer gradients", m.layers.len()),
            format!("{}", grads.layers.len()),
        ));
    }
    for (layer, grad) in m.layers.iter_mut().zip(&grads.layers) {
        if grad.dim() != layer.weights().dim() {
            return Err(EffcodeError::shape(
                "sgd_step",
                format!("{:?}", layer.weights().dim()),
                format!("{:?}", grad.dim()),
            ));
        }
        layer.apply_update(grad, cfg.gamma, cfg.weight_decay);
    }
    if cfg.weight_decay > 0.0 {
        let decay = 1.0 - cfg.gamma * cfg.weight_decay;
        m.head_w.mapv_inplace(|w| w * decay);
    }
    m.head_w.zip_mut_with(&grads.head_w, |w, &g| *w -= cfg.gamma * g);
    m.head_b.zip_mut_with(&grads.head_b, |b, &g| *b -= cfg.gamma * g);
    Ok(())
}

/// Per-epoch training statistics, measured on the shuffled training stream
/// as it is consumed (before each batch's update).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub train_acc: f64,
}

fn count_correct(logits: &ndarray::ArrayView2<'_, f64>, labels: &[u32]) -> usize {
    let mut correct = 0;
    for (j, &label) in labels.iter().enumerate() {
        let col = logits.column(j);
        let mut best = 0usize;
        for (c, &v) in col.iter().enumerate() {
            if v > col[best] {
                best = c;
            }
        }
        if best == label as usize {
            correct += 1;
        }
    }
    correct
}

struct Velocity {
    layers: Vec<Array2<f64>>,
    head_w: Array2<f64>,
    head_b: Array1<f64>,
}

impl Velocity {
    fn new(m: &NetworkModel) -> Self {
        Velocity {
            layers: m
                .layers
                .iter()
                .map(|l| Array2::zeros(l.weights().dim()))
                .collect(),
            head_w: Array2::zeros(m.head_w.dim()),
            head_b: Array1::zeros(m.head_b.len()),
        }
    }

    /// v ← μ·v + g; returns the updated velocity as the effective gradient.
    fn absorb(&mut self, grads: Gradients, mu: f64) -> Gradients {
        for (v, g) in self.layers.iter_mut().zip(&grads.layers) {
            v.zip_mut_with(g, |v, &g| *v = mu * *v + g);
        }
        self.head_w.zip_mut_with(&grads.head_w, |v, &g| *v = mu * *v + g);
        self.head_b.zip_mut_with(&grads.head_b, |v, &g| *v = mu * *v + g);
        Gradients {
            layers: self.layers.clone(),
            head_w: self.head_w.clone(),
            head_b: self.head_b.clone(),
        }
    }
}

/// Minibatch SGD with per-epoch seeded shuffles. Modes without fine-tuning
/// update only the softmax head; all other modes back-propagate through the
/// masked layers as well. Loss and accuracy are averaged over the epoch's
/// batches as they are visited.
pub fn train(
    model: NetworkModel,
    data: &LabeledData,
    cfg: &TrainConfig,
) -> Result<(NetworkModel, Vec<EpochStats>)> {
    cfg.validate()?;
    model.validate()?;
    if data.is_empty() {
        return Err(EffcodeError::invalid("data", "no training examples"));
    }
    if data.classes as usize != model.classes {
        return Err(EffcodeError::shape(
            "train",
            format!("{} classes", model.classes),
            format!("{}", data.classes),
        ));
    }
    let mut model = model;
    let fine_tune = model.mode.fine_tunes();
    let n = data.len();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut velocity = (cfg.momentum > 0.0).then(|| Velocity::new(&model));

    // Frozen layers produce the same features all run, so compute them once.
    let frozen_features = if fine_tune {
        None
    } else {
        let (_, cache) = forward(&model, &data.data)?;
        Some(cache.top().clone())
    };

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng::stream(cfg.seed, epoch as u64));
        let mut loss_sum = 0.0;
        let mut correct = 0usize;

        for batch in order.chunks(cfg.batch_size) {
            let yb: Vec<u32> = batch.iter().map(|&j| data.labels[j]).collect();
            let (logits, grads) = if let Some(feats) = &frozen_features {
                let mut fb = Array2::zeros((feats.nrows(), batch.len()));
                for (pos, &j) in batch.iter().enumerate() {
                    fb.column_mut(pos).assign(&feats.column(j));
                }
                let logits = DataMatrix::new(
                    &model.head_w.dot(&fb) + &model.head_b.view().insert_axis(ndarray::Axis(1)),
                )?;
                let (loss, dlogits) = softmax_xent(&logits, &yb, model.classes)?;
                loss_sum += loss * batch.len() as f64;
                let grads = Gradients {
                    layers: model
                        .layers
                        .iter()
                        .map(|l| Array2::zeros(l.weights().dim()))
                        .collect(),
                    head_w: dlogits.dot(&fb.t()),
                    head_b: dlogits.sum_axis(ndarray::Axis(1)),
                };
                (logits, grads)
            } else {
                let xb = data.data.select_columns(batch)?;
                let (logits, cache) = forward(&model, &xb)?;
                let (loss, dlogits) = softmax_xent(&logits, &yb, model.classes)?;
                loss_sum += loss * batch.len() as f64;
                let grads = backward(&model, &cache, &dlogits)?;
                (logits, grads)
            };
            correct += count_correct(&logits.array(), &yb);

            let grads = match velocity.as_mut() {
                Some(v) => v.absorb(grads, cfg.momentum),
                None => grads,
            };
            sgd_step(&mut model, &grads, cfg)?;
        }

        history.push(EpochStats {
            epoch,
            loss: loss_sum / n as f64,
            train_acc: correct as f64 / n as f64,
        });
    }
    Ok((model, history))
}

/// Fraction of examples whose largest logit matches the label; logit ties
/// resolve to the lowest class id.
pub fn evaluate(m: &NetworkModel, data: &LabeledData) -> Result<f64> {
    m.validate()?;
    if data.is_empty() {
        return Err(EffcodeError::invalid("data", "no examples"));
    }
    if data.classes as usize != m.classes {
        return Err(EffcodeError::shape(
            "evaluate",
            format!("{} classes", m.classes),
            format!("{}", data.classes),
        ));
    }
    let n = data.len();
    let mut correct = 0usize;
    let chunk = 512usize;
    let mut start = 0;
    while start < n {
        let end = (start + chunk).min(n);
        let idx: Vec<usize> = (start..end).collect();
        let xb = data.data.select_columns(&idx)?;
        let (logits, _) = forward(m, &xb)?;
        correct += count_correct(&logits.array(), &data.labels[start..end]);
        start = end;
    }
    Ok(correct as f64 / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::Rng;

    use crate::dataio::{DataMatrix, WhitenTransform};
    use crate::netprime::model::{MaskedLayer, StructureInit};

    fn separable_toy(n_per_class: usize, seed: u64) -> LabeledData {
        // Class 0 clusters at (+2, +2), class 1 at (−2, −2).
        let mut stream = rng::stream(seed, 0);
        let n = 2 * n_per_class;
        let mut x = Array2::zeros((2, n));
        let mut labels = Vec::with_capacity(n);
        for j in 0..n {
            let class = (j % 2) as u32;
            let center = if class == 0 { 2.0 } else { -2.0 };
            x[[0, j]] = center + stream.gen_range(-0.5..0.5);
            x[[1, j]] = center + stream.gen_range(-0.5..0.5);
            labels.push(class);
        }
        LabeledData::new(DataMatrix::new(x).unwrap(), labels, 2).unwrap()
    }

    fn toy_model(lambda: f64, mode: StructureInit, seed: u64) -> NetworkModel {
        let mut stream = rng::stream(seed, 9);
        let w = Array2::from_shape_fn((4, 2), |_| stream.gen_range(-0.5..0.5));
        let head = Array2::from_shape_fn((2, 4), |_| stream.gen_range(-0.5..0.5));
        NetworkModel {
            whiten: WhitenTransform::identity(2),
            layers: vec![MaskedLayer::new(w, Array2::ones((4, 2)), lambda, None).unwrap()],
            head_w: head,
            head_b: ndarray::Array1::zeros(2),
            classes: 2,
            mode,
        }
    }

    #[test]
    fn separable_toy_reaches_full_training_accuracy() {
        let data = separable_toy(10, 1);
        let model = toy_model(0.05, StructureInit::Bp, 2);
        let cfg = TrainConfig {
            gamma: 0.05,
            epochs: 200,
            batch_size: 4,
            seed: 3,
            ..TrainConfig::default()
        };
        let (trained, history) = train(model, &data, &cfg).unwrap();
        assert_eq!(history.len(), 200);
        let acc = evaluate(&trained, &data).unwrap();
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn same_seed_gives_identical_history() {
        let data = separable_toy(8, 4);
        let cfg = TrainConfig {
            gamma: 0.01,
            epochs: 5,
            batch_size: 4,
            seed: 7,
            ..TrainConfig::default()
        };
        let (_, h1) = train(toy_model(0.05, StructureInit::Bp, 5), &data, &cfg).unwrap();
        let (_, h2) = train(toy_model(0.05, StructureInit::Bp, 5), &data, &cfg).unwrap();
        assert_eq!(h1, h2);
    }

    #[test]
    fn frozen_mode_only_moves_the_head() {
        let data = separable_toy(8, 6);
        let model = toy_model(0.05, StructureInit::Weight, 8);
        let before = model.layers[0].weights().to_owned();
        let head_before = model.head_w.clone();
        let cfg = TrainConfig {
            gamma: 0.05,
            epochs: 3,
            batch_size: 4,
            seed: 9,
            ..TrainConfig::default()
        };
        let (trained, _) = train(model, &data, &cfg).unwrap();
        assert_eq!(trained.layers[0].weights(), before.view());
        assert_ne!(trained.head_w, head_before);
    }

    #[test]
    fn zero_gradients_leave_model_unchanged() {
        let mut model = toy_model(0.05, StructureInit::Bp, 10);
        let before_w = model.layers[0].weights().to_owned();
        let before_head = model.head_w.clone();
        let grads = Gradients {
            layers: vec![Array2::zeros((4, 2))],
            head_w: Array2::zeros((2, 4)),
            head_b: ndarray::Array1::zeros(2),
        };
        sgd_step(&mut model, &grads, &TrainConfig::default()).unwrap();
        assert_eq!(model.layers[0].weights(), before_w.view());
        assert_eq!(model.head_w, before_head);
    }
}
