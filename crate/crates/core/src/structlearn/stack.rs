//! Layer-wise structure learning: whiten, learn a dictionary, threshold it
//! into a mask, and measure the multi-information of the codes, stopping
//! when the relative entropy gain falls below a threshold.

use crate::dataio::{whiten_apply, whiten_fit, DataMatrix, WhitenTransform};
use crate::error::{EffcodeError, Result};
use crate::infotheory::{multi_information_with, EntropyEstimate, EntropyParams};
use crate::rng;
use crate::sparsecode::{
    calibrate_lambda, initial_dictionary, learn_dictionary_batched, CodingConfig, Dictionary,
    GroupSpec, DEFAULT_MINIBATCH,
};
use crate::structlearn::mask::{threshold_mask, StructureMask};

/// One learned layer: its whitening transform, dictionary, connection mask,
/// the multi-information of its codes, and the sparsity weight used.
#[derive(Debug, Clone)]
pub struct LayerStructure {
    pub whiten: WhitenTransform,
    pub dictionary: Dictionary,
    pub mask: StructureMask,
    pub entropy: EntropyEstimate,
    pub lambda: f64,
}

/// The full result of structure learning. `entropy_trace` has one entry per
/// layer plus a leading entry for the whitened input, so its length is
/// always `depth() + 1`.
#[derive(Debug, Clone)]
pub struct StructureStack {
    pub layers: Vec<LayerStructure>,
    pub stop_epsilon: f64,
    pub mask_density: f64,
    /// Group size of the coding penalty, inherited by downstream networks.
    pub group: Option<GroupSpec>,
    pub entropy_params: EntropyParams,
    pub entropy_trace: Vec<EntropyEstimate>,
}

impl StructureStack {
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Consecutive relative entropy gains; entry k compares layer k's codes
    /// against the previous layer (or the input for k = 0).
    pub fn gains(&self) -> Vec<f64> {
        self.entropy_trace
            .windows(2)
            .map(|w| entropy_gain(w[0], w[1]))
            .collect()
    }

    /// The stack truncated to its first `depth` layers.
    pub fn prefix(&self, depth: usize) -> Result<StructureStack> {
        if depth < 1 || depth > self.depth() {
            return Err(EffcodeError::invalid(
                "depth",
                format!("must lie in 1..={}", self.depth()),
            ));
        }
        Ok(StructureStack {
            layers: self.layers[..depth].to_vec(),
            stop_epsilon: self.stop_epsilon,
            mask_density: self.mask_density,
            group: self.group,
            entropy_params: self.entropy_params,
            entropy_trace: self.entropy_trace[..=depth].to_vec(),
        })
    }
}

/// When to stop adding layers: relative entropy gain below `epsilon`, or
/// `max_depth` layers learned, whichever comes first.
#[derive(Debug, Clone, Copy)]
pub struct StopCriterion {
    pub epsilon: f64,
    pub max_depth: usize,
}

impl StopCriterion {
    pub fn new(epsilon: f64, max_depth: usize) -> Result<Self> {
        if epsilon.is_nan() || epsilon <= 0.0 {
            return Err(EffcodeError::invalid("epsilon", "must be positive"));
        }
        if max_depth < 1 {
            return Err(EffcodeError::invalid("max_depth", "must be at least 1"));
        }
        Ok(StopCriterion { epsilon, max_depth })
    }
}

/// |(next − prev)/prev|, falling back to the absolute difference when
/// |prev| < 1e-9: near-zero multi-information means the codes are already
/// close to independent, so any epsilon should stop the loop.
pub fn relative_gain(prev: f64, next: f64) -> f64 {
    if prev.abs() < 1e-9 {
        (next - prev).abs()
    } else {
        ((next - prev) / prev).abs()
    }
}

pub fn entropy_gain(prev: EntropyEstimate, next: EntropyEstimate) -> f64 {
    relative_gain(prev.value, next.value)
}

/// Knobs that shape the per-layer dictionary runs without being part of the
/// stopping rule.
#[derive(Debug, Clone, Copy)]
pub struct StructureOptions {
    pub whiten_eps: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Drop the layer whose gain fell below epsilon instead of keeping it.
    pub drop_failed_layer: bool,
    /// When set, layer `k >= 1` recalibrates its sparsity weight as
    /// `scale * decay^(k-1)` × the mean max atom response of that layer's
    /// seed-matched initial dictionary on its own whitened input. Each layer
    /// sees a differently scaled input, so a single fixed λ would impose
    /// wildly different effective sparsity per layer. The penalty also decays
    /// with depth: deeper layers code already-decorrelated inputs, where an
    /// aggressive penalty deactivates most atoms and the resulting all-zero
    /// code collisions read as spurious redundancy in the kNN estimate. The
    /// first layer always uses `cfg.lambda` unchanged, so a depth-1 stack
    /// stays identical to a direct dictionary-learning run with the same
    /// seed.
    pub deep_lambda_scale: Option<f64>,
    /// Geometric decay factor applied to `deep_lambda_scale` per extra layer.
    pub deep_lambda_decay: f64,
}

impl Default for StructureOptions {
    fn default() -> Self {
        StructureOptions {
            whiten_eps: 1e-5,
            epochs: 10,
            batch_size: DEFAULT_MINIBATCH,
            drop_failed_layer: false,
            deep_lambda_scale: Some(0.05),
            deep_lambda_decay: 0.8,
        }
    }
}

pub fn learn_structure(
    x: &DataMatrix,
    atoms_per_layer: &[usize],
    cfg: &CodingConfig,
    stop: &StopCriterion,
    mask_density: f64,
    entropy_params: &EntropyParams,
) -> Result<StructureStack> {
    learn_structure_with(
        x,
        atoms_per_layer,
        cfg,
        stop,
        mask_density,
        entropy_params,
        &StructureOptions::default(),
    )
}

/// Learns up to `stop.max_depth` layers. Layer k whitens the previous
/// layer's codes, learns a dictionary of `atoms_per_layer[k]` atoms on them,
/// thresholds it into a mask, and scores the new codes by their
/// multi-information. The trace starts with the whitened input scored the
/// same way, so the first gain is well-defined.
///
/// Layer 0 runs the dictionary learner with `cfg.seed` itself, which makes a
/// depth-1 stack bit-identical to a direct `learn_dictionary` call; deeper
/// layers derive their seeds from it. The sparsity weight and the entropy
/// parameters (including the feature-subsample seed) are reused unchanged on
/// every layer: whitening renormalizes each layer's input, which keeps one
/// lambda meaningful throughout, and an identical subsampling policy keeps
/// trace entries comparable.
pub fn learn_structure_with(
    x: &DataMatrix,
    atoms_per_layer: &[usize],
    cfg: &CodingConfig,
    stop: &StopCriterion,
    mask_density: f64,
    entropy_params: &EntropyParams,
    opts: &StructureOptions,
) -> Result<StructureStack> {
    cfg.validate()?;
    if x.cols() == 0 {
        return Err(EffcodeError::invalid("x", "no data columns"));
    }
    if atoms_per_layer.len() < stop.max_depth {
        return Err(EffcodeError::invalid(
            "atoms_per_layer",
            format!(
                "{} entries cover fewer layers than max_depth {}",
                atoms_per_layer.len(),
                stop.max_depth
            ),
        ));
    }
    if opts.epochs < 1 {
        return Err(EffcodeError::invalid("epochs", "must be >= 1"));
    }

    let mut layers: Vec<LayerStructure> = Vec::new();
    let mut trace: Vec<EntropyEstimate> = Vec::new();
    let mut u = x.clone();

    for (k, &m) in atoms_per_layer.iter().take(stop.max_depth).enumerate() {
        let whiten = whiten_fit(&u, opts.whiten_eps)?;
        let white = whiten_apply(&whiten, &u)?;
        if k == 0 {
            trace.push(multi_information_with(&white, entropy_params)?);
        }

        let mut layer_cfg = *cfg;
        if k > 0 {
            layer_cfg.seed = rng::derive_seed(cfg.seed, k as u64);
            if let Some(scale) = opts.deep_lambda_scale {
                let layer_scale = scale * opts.deep_lambda_decay.powi(k as i32 - 1);
                let init = initial_dictionary(&white, m, layer_cfg.seed)?;
                layer_cfg.lambda = calibrate_lambda(&init, &white, layer_scale)?;
            }
        }
        let learned = learn_dictionary_batched(&white, m, &layer_cfg, opts.epochs, opts.batch_size)?;
        if learned.codes.array().iter().all(|&v| v == 0.0) {
            return Err(EffcodeError::invalid(
                "lambda",
                format!(
                    "layer {} produced all-zero codes; lambda = {} is too large for this data",
                    k, layer_cfg.lambda
                ),
            ));
        }
        let mask = threshold_mask(&learned.dictionary, mask_density)?;
        let entropy = multi_information_with(&learned.codes, entropy_params)?;

        let gain = entropy_gain(*trace.last().expect("trace is seeded"), entropy);
        let layer = LayerStructure {
            whiten,
            dictionary: learned.dictionary,
            mask,
            entropy,
            lambda: layer_cfg.lambda,
        };
        if gain < stop.epsilon {
            if !opts.drop_failed_layer {
                layers.push(layer);
                trace.push(entropy);
            }
            break;
        }
        layers.push(layer);
        trace.push(entropy);
        u = learned.codes;
    }

    if layers.is_empty() {
        return Err(EffcodeError::invalid(
            "stop",
            "no layer survived: the first gain fell below epsilon and dropping failed layers is enabled",
        ));
    }

    Ok(StructureStack {
        layers,
        stop_epsilon: stop.epsilon,
        mask_density,
        group: cfg.group,
        entropy_params: *entropy_params,
        entropy_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::Rng;

    fn estimate(value: f64) -> EntropyEstimate {
        EntropyEstimate {
            value,
            k: 3,
            n: 100,
            d: 4,
        }
    }

    #[test]
    fn gain_is_relative_with_absolute_fallback() {
        assert!((entropy_gain(estimate(-2.0), estimate(-1.0)) - 0.5).abs() < 1e-15);
        assert!((entropy_gain(estimate(-1.0), estimate(-0.95)) - 0.05).abs() < 1e-15);
        assert_eq!(entropy_gain(estimate(0.0), estimate(0.0)), 0.0);
        assert!((entropy_gain(estimate(0.0), estimate(0.2)) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn stop_criterion_validation() {
        assert!(StopCriterion::new(0.05, 3).is_ok());
        assert!(StopCriterion::new(f64::INFINITY, 1).is_ok());
        assert!(StopCriterion::new(0.0, 3).is_err());
        assert!(StopCriterion::new(0.1, 0).is_err());
    }

    fn toy_data(n: usize, d: usize, seed: u64) -> DataMatrix {
        // A few latent directions plus noise, so codes are not degenerate.
        let mut stream = rng::stream(seed, 0);
        let basis = Array2::from_shape_fn((d, 4), |_| stream.gen_range(-1.0..1.0));
        let coef = Array2::from_shape_fn((4, n), |_| stream.gen_range(-1.0..1.0));
        let mut x = basis.dot(&coef);
        for v in x.iter_mut() {
            *v += stream.gen_range(-0.05..0.05);
        }
        DataMatrix::new(x).unwrap()
    }

    #[test]
    fn infinite_epsilon_stops_after_one_layer() {
        let x = toy_data(80, 12, 3);
        let cfg = CodingConfig::new(0.2);
        let stop = StopCriterion::new(f64::INFINITY, 3).unwrap();
        let ep = EntropyParams {
            k: 3,
            feature_subsample: Some(8),
            seed: 1,
        };
        let stack = learn_structure(&x, &[6, 6, 6], &cfg, &stop, 0.5, &ep).unwrap();
        assert_eq!(stack.depth(), 1);
        assert_eq!(stack.entropy_trace.len(), 2);
    }

    #[test]
    fn depth_one_matches_direct_dictionary_learning() {
        let x = toy_data(60, 10, 4);
        let cfg = CodingConfig::new(0.2);
        let stop = StopCriterion::new(f64::INFINITY, 1).unwrap();
        let ep = EntropyParams {
            k: 3,
            feature_subsample: Some(6),
            seed: 2,
        };
        let opts = StructureOptions::default();
        let stack = learn_structure(&x, &[5], &cfg, &stop, 0.4, &ep).unwrap();

        let whiten = whiten_fit(&x, opts.whiten_eps).unwrap();
        let white = whiten_apply(&whiten, &x).unwrap();
        let direct =
            learn_dictionary_batched(&white, 5, &cfg, opts.epochs, opts.batch_size).unwrap();
        assert_eq!(stack.layers[0].dictionary.array(), direct.dictionary.array());
        let mask = threshold_mask(&direct.dictionary, 0.4).unwrap();
        assert_eq!(stack.layers[0].mask, mask);
    }

    #[test]
    fn trace_length_tracks_depth() {
        let x = toy_data(80, 12, 5);
        let cfg = CodingConfig::new(0.05);
        let stop = StopCriterion::new(1e-12, 2).unwrap();
        let ep = EntropyParams {
            k: 3,
            feature_subsample: Some(8),
            seed: 3,
        };
        let stack = learn_structure(&x, &[6, 6], &cfg, &stop, 0.5, &ep).unwrap();
        assert_eq!(stack.entropy_trace.len(), stack.depth() + 1);
        assert_eq!(stack.gains().len(), stack.depth());
    }

    #[test]
    fn prefix_truncates_layers_and_trace() {
        let x = toy_data(80, 12, 6);
        let cfg = CodingConfig::new(0.05);
        let stop = StopCriterion::new(1e-12, 2).unwrap();
        let ep = EntropyParams {
            k: 3,
            feature_subsample: Some(8),
            seed: 4,
        };
        let stack = learn_structure(&x, &[6, 6], &cfg, &stop, 0.5, &ep).unwrap();
        if stack.depth() == 2 {
            let one = stack.prefix(1).unwrap();
            assert_eq!(one.depth(), 1);
            assert_eq!(one.entropy_trace.len(), 2);
        }
        assert!(stack.prefix(0).is_err());
        assert!(stack.prefix(stack.depth() + 1).is_err());
    }
}
