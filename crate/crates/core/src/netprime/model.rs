//! Masked feed-forward networks initialized from learned structure. Each
//! hidden layer computes a one-step shrinkage of its atom correlations:
//! U_{k+1} = shrink(W_k·U_k, λ_k); a linear softmax head sits on top.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::{whiten_apply, DataMatrix, WhitenTransform};
use crate::error::{EffcodeError, Result};
use crate::rng;
use crate::sparsecode::{shrink_group, shrink_scalar, GroupSpec};
use crate::structlearn::StructureStack;

/// Which parts of the learned structure seed the network, and whether the
/// masked layers are fine-tuned by back-propagation afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum StructureInit {
    /// Random init, all-ones mask, fine-tuned.
    Bp,
    /// Dictionary init, all-ones mask, layers frozen (head still trains).
    Weight,
    /// Dictionary init, all-ones mask, fine-tuned.
    WeightBp,
    /// Random init constrained by the mask, fine-tuned.
    MaskBp,
    /// Dictionary init constrained by the mask, fine-tuned.
    WeightMaskBp,
}

impl StructureInit {
    pub const ALL: [StructureInit; 5] = [
        StructureInit::Bp,
        StructureInit::Weight,
        StructureInit::WeightBp,
        StructureInit::MaskBp,
        StructureInit::WeightMaskBp,
    ];

    pub fn label(self) -> &'static str {
        match self {
            StructureInit::Bp => "BP",
            StructureInit::Weight => "Weight",
            StructureInit::WeightBp => "Weight+BP",
            StructureInit::MaskBp => "Mask+BP",
            StructureInit::WeightMaskBp => "Weight+Mask+BP",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                EffcodeError::invalid(
                    "mode",
                    format!(
                        "unknown mode {:?}; expected one of BP, Weight, Weight+BP, Mask+BP, Weight+Mask+BP",
                        s
                    ),
                )
            })
    }

    pub fn uses_weights(self) -> bool {
        matches!(
            self,
            StructureInit::Weight | StructureInit::WeightBp | StructureInit::WeightMaskBp
        )
    }

    pub fn uses_mask(self) -> bool {
        matches!(self, StructureInit::MaskBp | StructureInit::WeightMaskBp)
    }

    pub fn fine_tunes(self) -> bool {
        !matches!(self, StructureInit::Weight)
    }
}

impl TryFrom<String> for StructureInit {
    type Error = EffcodeError;

    fn try_from(s: String) -> Result<Self> {
        StructureInit::parse(&s)
    }
}

impl From<StructureInit> for String {
    fn from(m: StructureInit) -> String {
        m.label().to_string()
    }
}

/// One hidden layer. The weights stay masked at all times: W ∘ (1 − M) == 0
/// bitwise, which construction and every update preserve.
#[derive(Debug, Clone)]
pub struct MaskedLayer {
    weights: Array2<f64>,
    mask: Array2<f64>,
    pub lambda: f64,
    pub group: Option<GroupSpec>,
}

impl MaskedLayer {
    pub fn new(
        weights: Array2<f64>,
        mask: Array2<f64>,
        lambda: f64,
        group: Option<GroupSpec>,
    ) -> Result<Self> {
        if weights.dim() != mask.dim() {
            return Err(EffcodeError::shape(
                "masked layer",
                format!("{:?}", mask.dim()),
                format!("{:?}", weights.dim()),
            ));
        }
        if !mask.iter().all(|&v| v == 0.0 || v == 1.0) {
            return Err(EffcodeError::invalid("mask", "entries must be 0 or 1"));
        }
        if !weights.iter().all(|v| v.is_finite()) {
            return Err(EffcodeError::invalid("weights", "non-finite entry"));
        }
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(EffcodeError::invalid("lambda", "must be finite and >= 0"));
        }
        if let Some(g) = group {
            g.check_len(weights.nrows())?;
        }
        let masked = &weights * &mask;
        Ok(MaskedLayer {
            weights: masked,
            mask,
            lambda,
            group,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> ndarray::ArrayView2<'_, f64> {
        self.weights.view()
    }

    pub fn mask(&self) -> ndarray::ArrayView2<'_, f64> {
        self.mask.view()
    }

    /// Adds `dv` to one weight. Used by derivative checks; refuses masked
    /// positions so the mask invariant cannot be broken.
    pub fn nudge_weight(&mut self, row: usize, col: usize, dv: f64) -> Result<()> {
        if self.mask[[row, col]] == 0.0 {
            return Err(EffcodeError::invalid("position", "weight is masked out"));
        }
        self.weights[[row, col]] += dv;
        Ok(())
    }

    fn activate(&self, pre: &mut Array2<f64>) {
        match self.group {
            None => pre.mapv_inplace(|v| shrink_scalar(v, self.lambda)),
            Some(g) => {
                for mut col in pre.axis_iter_mut(Axis(1)) {
                    let shrunk = shrink_group(col.view(), &g, self.lambda)
                        .expect("group size validated at construction");
                    col.assign(&shrunk);
                }
            }
        }
    }

    pub(crate) fn apply_update(&mut self, grad: &Array2<f64>, gamma: f64, weight_decay: f64) {
        if weight_decay > 0.0 {
            let decay = 1.0 - gamma * weight_decay;
            self.weights.mapv_inplace(|w| w * decay);
        }
        self.weights.zip_mut_with(&(grad * &self.mask), |w, &g| {
            *w -= gamma * g;
        });
    }
}

/// Masked layers plus a linear softmax head; the input whitening learned
/// with the structure is part of the model.
#[derive(Debug, Clone)]
pub struct NetworkModel {
    pub whiten: WhitenTransform,
    pub layers: Vec<MaskedLayer>,
    pub head_w: Array2<f64>,
    pub head_b: Array1<f64>,
    pub classes: usize,
    pub mode: StructureInit,
}

impl NetworkModel {
    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn top_dim(&self) -> usize {
        self.layers.last().expect("layers non-empty").output_dim()
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(EffcodeError::invalid("layers", "need at least one layer"));
        }
        for pair in self.layers.windows(2) {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(EffcodeError::shape(
                    "layer chain",
                    format!("{}", pair[0].output_dim()),
                    format!("{}", pair[1].input_dim()),
                ));
            }
        }
        if self.whiten.dim() != self.input_dim() {
            return Err(EffcodeError::shape(
                "whitening",
                format!("{}", self.input_dim()),
                format!("{}", self.whiten.dim()),
            ));
        }
        if self.head_w.ncols() != self.top_dim()
            || self.head_w.nrows() != self.classes
            || self.head_b.len() != self.classes
        {
            return Err(EffcodeError::shape(
                "head",
                format!("{}x{} (+bias)", self.classes, self.top_dim()),
                format!("{}x{} (+{})", self.head_w.nrows(), self.head_w.ncols(), self.head_b.len()),
            ));
        }
        Ok(())
    }
}

pub(crate) fn uniform_fan_in(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<f64> {
    let bound = 1.0 / (cols as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-bound..bound))
}

/// Builds the network a structure stack describes. Layer k's weights start
/// from its dictionary or a uniform ±1/√fan_in draw depending on the mode,
/// always multiplied by the layer's mask (all-ones when the mode ignores
/// masks), so modes differing only in masked-out entries coincide exactly.
/// The head is always randomly initialized with a zero bias.
pub fn init_from_structure(
    stack: &StructureStack,
    mode: StructureInit,
    classes: usize,
    seed: u64,
) -> Result<NetworkModel> {
    if stack.layers.is_empty() {
        return Err(EffcodeError::invalid("stack", "no layers"));
    }
    if classes < 2 {
        return Err(EffcodeError::invalid("classes", "need at least 2 classes"));
    }
    let mut layers = Vec::with_capacity(stack.depth());
    for (k, layer) in stack.layers.iter().enumerate() {
        let dict = layer.dictionary.array();
        let (m, d) = (layer.dictionary.atoms(), layer.dictionary.input_dim());
        let mask = if mode.uses_mask() {
            layer.mask.array().to_owned()
        } else {
            Array2::ones((m, d))
        };
        let init = if mode.uses_weights() {
            dict.to_owned()
        } else {
            uniform_fan_in(m, d, &mut rng::stream(seed, k as u64))
        };
        layers.push(MaskedLayer::new(init, mask, layer.lambda, stack.group)?);
    }
    let top = layers.last().expect("non-empty").output_dim();
    let mut head_stream = rng::stream(seed, stack.depth() as u64);
    let head_w = uniform_fan_in(classes, top, &mut head_stream);
    let model = NetworkModel {
        whiten: stack.layers[0].whiten.clone(),
        layers,
        head_w,
        head_b: Array1::zeros(classes),
        classes,
        mode,
    };
    model.validate()?;
    Ok(model)
}

/// Activations recorded by `forward`: the whitened input followed by every
/// layer's post-shrinkage output, all for the same batch.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    activations: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.activations[0].ncols()
    }

    /// The top-layer activations (the head's input).
    pub fn top(&self) -> &Array2<f64> {
        self.activations.last().expect("non-empty")
    }

    fn matches(&self, m: &NetworkModel) -> Result<()> {
        if self.activations.len() != m.layers.len() + 1 {
            return Err(EffcodeError::invalid(
                "cache",
                "activation count does not match the model depth",
            ));
        }
        for (k, layer) in m.layers.iter().enumerate() {
            if self.activations[k].nrows() != layer.input_dim()
                || self.activations[k + 1].nrows() != layer.output_dim()
                || self.activations[k].ncols() != self.activations[k + 1].ncols()
            {
                return Err(EffcodeError::invalid(
                    "cache",
                    format!("activation shapes at layer {} do not match the model", k),
                ));
            }
        }
        Ok(())
    }
}

/// Whitens the batch, runs every masked layer's shrinkage activation, and
/// returns head logits (classes × batch) plus the cached activations.
pub fn forward(m: &NetworkModel, x: &DataMatrix) -> Result<(DataMatrix, ForwardCache)> {
    m.validate()?;
    if x.rows() != m.input_dim() {
        return Err(EffcodeError::shape(
            "forward",
            format!("{} input rows", m.input_dim()),
            format!("{}", x.rows()),
        ));
    }
    let u0 = whiten_apply(&m.whiten, x)?;
    let mut activations = vec![u0.into_array()];
    for layer in &m.layers {
        let mut pre = layer.weights.dot(activations.last().expect("non-empty"));
        layer.activate(&mut pre);
        activations.push(pre);
    }
    let logits = &m.head_w.dot(activations.last().expect("non-empty"))
        + &m.head_b.view().insert_axis(Axis(1));
    Ok((DataMatrix::new(logits)?, ForwardCache { activations }))
}

/// Mean cross-entropy in nats over the batch, with the gradient of the loss
/// with respect to the logits: (softmax − onehot)/batch.
pub fn softmax_xent(logits: &DataMatrix, labels: &[u32], classes: usize) -> Result<(f64, Array2<f64>)> {
    let n = logits.cols();
    if labels.len() != n {
        return Err(EffcodeError::shape(
            "softmax_xent",
            format!("{} labels", n),
            format!("{}", labels.len()),
        ));
    }
    if n == 0 {
        return Err(EffcodeError::invalid("logits", "empty batch"));
    }
    if logits.rows() != classes {
        return Err(EffcodeError::shape(
            "softmax_xent",
            format!("{} logit rows", classes),
            format!("{}", logits.rows()),
        ));
    }
    let lv = logits.array();
    let mut dlogits = lv.to_owned();
    let mut loss = 0.0;
    for (j, mut col) in dlogits.axis_iter_mut(Axis(1)).enumerate() {
        let label = labels[j] as usize;
        if label >= classes {
            return Err(EffcodeError::invalid(
                "labels",
                format!("label {} out of range for {} classes", label, classes),
            ));
        }
        let max = col.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let lse = max + col.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - col[label];
        for v in col.iter_mut() {
            *v = (*v - lse).exp();
        }
        col[label] -= 1.0;
    }
    dlogits.mapv_inplace(|v| v / n as f64);
    Ok((loss / n as f64, dlogits))
}

/// Parameter gradients in model order.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<Array2<f64>>,
    pub head_w: Array2<f64>,
    pub head_b: Array1<f64>,
}

/// Back-propagates `dlogits` through the cached forward pass. The shrinkage
/// backward passes the error through wherever the post-activation is
/// nonzero and zeroes it elsewhere; layer weight gradients are masked, head
/// gradients are not.
pub fn backward(m: &NetworkModel, cache: &ForwardCache, dlogits: &Array2<f64>) -> Result<Gradients> {
    cache.matches(m)?;
    let top = cache.top();
    if dlogits.nrows() != m.classes || dlogits.ncols() != top.ncols() {
        return Err(EffcodeError::shape(
            "backward",
            format!("{}x{} dlogits", m.classes, top.ncols()),
            format!("{}x{}", dlogits.nrows(), dlogits.ncols()),
        ));
    }
    let head_w_grad = dlogits.dot(&top.t());
    let head_b_grad = dlogits.sum_axis(Axis(1));
    let mut delta = m.head_w.t().dot(dlogits);

    let mut layer_grads = vec![Array2::zeros((0, 0)); m.layers.len()];
    for (k, layer) in m.layers.iter().enumerate().rev() {
        let post = &cache.activations[k + 1];
        delta.zip_mut_with(post, |g, &u| {
            if u == 0.0 {
                *g = 0.0;
            }
        });
        layer_grads[k] = delta.dot(&cache.activations[k].t()) * &layer.mask;
        if k > 0 {
            delta = layer.weights.t().dot(&delta);
        }
    }

    Ok(Gradients {
        layers: layer_grads,
        head_w: head_w_grad,
        head_b: head_b_grad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_labels_round_trip() {
        for mode in StructureInit::ALL {
            assert_eq!(StructureInit::parse(mode.label()).unwrap(), mode);
        }
        assert!(StructureInit::parse("nonsense").is_err());
    }

    #[test]
    fn masked_layer_zeroes_masked_weights() {
        let w = Array2::from_shape_vec((2, 2), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let m = Array2::from_shape_vec((2, 2), vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let layer = MaskedLayer::new(w, m, 0.1, None).unwrap();
        assert_eq!(layer.weights()[[0, 1]], 0.0);
        assert_eq!(layer.weights()[[1, 0]], 0.0);
        assert_eq!(layer.weights()[[0, 0]], 1.0);
    }

    #[test]
    fn identity_layer_shrinks_input() {
        let layer = MaskedLayer::new(Array2::eye(2), Array2::ones((2, 2)), 1.0, None).unwrap();
        let model = NetworkModel {
            whiten: WhitenTransform::identity(2),
            layers: vec![layer],
            head_w: Array2::eye(2),
            head_b: Array1::zeros(2),
            classes: 2,
            mode: StructureInit::Bp,
        };
        let x = DataMatrix::new(Array2::from_shape_vec((2, 1), vec![2.0, -0.5]).unwrap()).unwrap();
        let (logits, cache) = forward(&model, &x).unwrap();
        assert_eq!(cache.top()[[0, 0]], 1.0);
        assert_eq!(cache.top()[[1, 0]], 0.0);
        assert_eq!(logits.array()[[0, 0]], 1.0);
    }

    #[test]
    fn zero_input_logits_equal_bias() {
        let layer = MaskedLayer::new(Array2::eye(3), Array2::ones((3, 3)), 0.5, None).unwrap();
        let model = NetworkModel {
            whiten: WhitenTransform::identity(3),
            layers: vec![layer],
            head_w: Array2::ones((2, 3)),
            head_b: Array1::from_vec(vec![0.25, -0.75]),
            classes: 2,
            mode: StructureInit::Bp,
        };
        let x = DataMatrix::zeros(3, 2);
        let (logits, _) = forward(&model, &x).unwrap();
        for j in 0..2 {
            assert_eq!(logits.array()[[0, j]], 0.25);
            assert_eq!(logits.array()[[1, j]], -0.75);
        }
    }

    #[test]
    fn softmax_symmetric_and_stable() {
        let logits = DataMatrix::new(Array2::zeros((2, 1))).unwrap();
        let (loss, dl) = softmax_xent(&logits, &[0], 2).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((dl[[0, 0]] - (-0.5)).abs() < 1e-12);
        assert!((dl[[1, 0]] - 0.5).abs() < 1e-12);

        let big = DataMatrix::new(Array2::from_shape_vec((2, 1), vec![1000.0, 0.0]).unwrap())
            .unwrap();
        let (loss, _) = softmax_xent(&big, &[0], 2).unwrap();
        assert!(loss.is_finite() && loss < 1e-9);
    }

    #[test]
    fn softmax_rejects_bad_labels() {
        let logits = DataMatrix::new(Array2::zeros((2, 1))).unwrap();
        assert!(softmax_xent(&logits, &[2], 2).is_err());
    }

    #[test]
    fn dead_zone_zeroes_layer_gradients() {
        let layer =
            MaskedLayer::new(Array2::eye(2) * 0.01, Array2::ones((2, 2)), 1.0, None).unwrap();
        let model = NetworkModel {
            whiten: WhitenTransform::identity(2),
            layers: vec![layer],
            head_w: Array2::ones((2, 2)),
            head_b: Array1::zeros(2),
            classes: 2,
            mode: StructureInit::Bp,
        };
        let x = DataMatrix::new(Array2::from_shape_vec((2, 1), vec![1.0, -1.0]).unwrap()).unwrap();
        let (logits, cache) = forward(&model, &x).unwrap();
        let (_, dlogits) = softmax_xent(&logits, &[0], 2).unwrap();
        let grads = backward(&model, &cache, &dlogits).unwrap();
        assert!(grads.layers[0].iter().all(|&g| g == 0.0));
        // Head bias still learns even when every activation is dead.
        assert!(grads.head_b.iter().any(|&g| g != 0.0));
    }

    #[test]
    fn masked_positions_get_zero_gradient_and_stay_zero() {
        let w = Array2::from_shape_vec((2, 2), vec![0.9, 0.8, 0.7, 0.6]).unwrap();
        let mask = Array2::from_shape_vec((2, 2), vec![1.0, 0.0, 1.0, 1.0]).unwrap();
        let layer = MaskedLayer::new(w, mask, 0.01, None).unwrap();
        let mut model = NetworkModel {
            whiten: WhitenTransform::identity(2),
            layers: vec![layer],
            head_w: Array2::ones((2, 2)),
            head_b: Array1::zeros(2),
            classes: 2,
            mode: StructureInit::MaskBp,
        };
        let x = DataMatrix::new(Array2::from_shape_vec((2, 3), vec![1.0, -1.0, 2.0, 0.5, -0.25, 1.5]).unwrap())
            .unwrap();
        let (logits, cache) = forward(&model, &x).unwrap();
        let (_, dlogits) = softmax_xent(&logits, &[0, 1, 0], 2).unwrap();
        let grads = backward(&model, &cache, &dlogits).unwrap();
        assert_eq!(grads.layers[0][[0, 1]], 0.0);
        model.layers[0].apply_update(&grads.layers[0], 0.1, 0.0);
        assert_eq!(model.layers[0].weights()[[0, 1]], 0.0);
    }
}
