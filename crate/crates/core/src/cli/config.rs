//! Run configuration for the `effcode` binary.
//!
//! A run is described by one JSON file with optional sections; every field
//! has a default so the minimal config is `{}` plus whatever the command
//! actually needs (most need `dataset.path`). Unknown keys are rejected so
//! typos fail loudly instead of silently falling back to defaults.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{EffcodeError, Result};

/// Penalty weight for the sparse coding objective: a fixed value, or
/// `"auto"` to calibrate it from the data (a fixed fraction of the mean
/// peak dictionary response; see `calibrate_lambda`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LambdaRepr", into = "LambdaRepr")]
pub enum LambdaSpec {
    Auto,
    Fixed(f64),
}

impl Default for LambdaSpec {
    fn default() -> Self {
        LambdaSpec::Auto
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum LambdaRepr {
    Fixed(f64),
    Named(String),
}

impl TryFrom<LambdaRepr> for LambdaSpec {
    type Error = String;

    fn try_from(repr: LambdaRepr) -> std::result::Result<Self, String> {
        match repr {
            LambdaRepr::Fixed(v) => Ok(LambdaSpec::Fixed(v)),
            LambdaRepr::Named(s) if s == "auto" => Ok(LambdaSpec::Auto),
            LambdaRepr::Named(s) => Err(format!(
                "lambda must be a number or \"auto\", got {s:?}"
            )),
        }
    }
}

impl From<LambdaSpec> for LambdaRepr {
    fn from(spec: LambdaSpec) -> Self {
        match spec {
            LambdaSpec::Auto => LambdaRepr::Named("auto".into()),
            LambdaSpec::Fixed(v) => LambdaRepr::Fixed(v),
        }
    }
}

/// Where the image data lives and how to decode it.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    /// Directory of CIFAR-10 style batch files, or a single batch file.
    pub path: PathBuf,
    #[serde(default = "default_max_images")]
    pub max_images: Option<usize>,
    #[serde(default = "default_true")]
    pub grayscale: bool,
    /// Target side length after downsampling; `null` keeps 32x32.
    #[serde(default = "default_downsample")]
    pub downsample: Option<usize>,
    /// Held-out batch file; defaults to `test_batch.bin` next to `path`.
    #[serde(default)]
    pub test_path: Option<PathBuf>,
    #[serde(default = "default_max_test_images")]
    pub max_test_images: Option<usize>,
}

impl DatasetSection {
    /// The held-out batch file, explicit or conventional.
    pub fn resolved_test_path(&self) -> PathBuf {
        if let Some(p) = &self.test_path {
            return p.clone();
        }
        if self.path.is_dir() {
            self.path.join("test_batch.bin")
        } else {
            self.path
                .parent()
                .unwrap_or_else(|| Path::new("."))
                .join("test_batch.bin")
        }
    }
}

/// Knobs for the synthetic corpus writer (`gen-data`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub n_train: usize,
    pub n_test: usize,
}

impl Default for CorpusSection {
    fn default() -> Self {
        CorpusSection {
            n_train: 10_000,
            n_test: 2_000,
        }
    }
}

/// Sparse coding and dictionary learning parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodingSection {
    pub atoms: usize,
    pub lambda: LambdaSpec,
    /// Fraction of the mean peak response used when `lambda` is `"auto"`.
    pub lambda_scale: f64,
    /// Group size for the group-l1 penalty; `null` means plain l1.
    pub group_size: Option<usize>,
    pub max_iter: usize,
    pub tol: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for CodingSection {
    fn default() -> Self {
        CodingSection {
            atoms: 256,
            lambda: LambdaSpec::Auto,
            lambda_scale: 0.1,
            group_size: None,
            max_iter: 300,
            tol: 1e-5,
            epochs: 10,
            batch_size: 256,
        }
    }
}

/// Depth-growth parameters: mask density, entropy stopping, estimator knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StructureSection {
    pub density: f64,
    pub epsilon: f64,
    pub max_depth: usize,
    /// Atom count per layer; defaults to `coding.atoms` at every depth.
    pub atoms_per_layer: Option<Vec<usize>>,
    pub entropy_k: usize,
    pub feature_subsample: Option<usize>,
    pub whiten_eps: f64,
    pub drop_failed_layer: bool,
    /// Response-scale fraction for the sparsity weight of layers past the
    /// first; each further layer multiplies it by `deep_lambda_decay`.
    pub deep_lambda_scale: f64,
    pub deep_lambda_decay: f64,
}

impl Default for StructureSection {
    fn default() -> Self {
        StructureSection {
            density: 0.1,
            epsilon: 0.05,
            max_depth: 4,
            atoms_per_layer: None,
            entropy_k: 5,
            feature_subsample: Some(32),
            whiten_eps: 1e-5,
            drop_failed_layer: false,
            deep_lambda_scale: 0.05,
            deep_lambda_decay: 0.8,
        }
    }
}

/// Network construction and SGD parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    /// One of BP, Weight, Weight+BP, Mask+BP, Weight+Mask+BP.
    pub mode: String,
    pub gamma: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub momentum: f64,
    /// Structure file consumed by `train`.
    pub structure: Option<PathBuf>,
    /// Model file consumed by `eval`.
    pub model: Option<PathBuf>,
}

impl Default for TrainingSection {
    fn default() -> Self {
        TrainingSection {
            mode: "Weight+Mask+BP".into(),
            gamma: 0.1,
            epochs: 30,
            batch_size: 128,
            weight_decay: 0.0,
            momentum: 0.0,
            structure: None,
            model: None,
        }
    }
}

/// Sweep grids and sample sizes for the `exp-*` commands.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    /// Pixel offsets (in grid steps) probed by `exp-mi-decay`.
    pub offsets: Vec<usize>,
    pub n_pairs: usize,
    /// How many random structures `exp-entropy-accuracy` samples.
    pub n_structures: usize,
    /// Mask densities the random structures draw from.
    pub random_densities: Vec<f64>,
    /// Density sweep for `exp-density`.
    pub density_grid: Vec<f64>,
    /// Depths compared by `exp-mask-role`.
    pub mask_depths: Vec<usize>,
    /// Depths compared by `exp-depth`.
    pub depth_grid: Vec<usize>,
    /// Training repetitions (distinct seeds) averaged per cell.
    pub repeats: usize,
    pub block_grid: usize,
    pub block_px: usize,
    pub block_images: usize,
    pub block_atoms: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            offsets: (1..=12).collect(),
            n_pairs: 2_000,
            n_structures: 20,
            random_densities: vec![0.01, 0.1, 0.3],
            density_grid: vec![0.005, 0.01, 0.1, 0.3, 0.7],
            mask_depths: vec![1, 2],
            depth_grid: vec![1, 2, 3],
            repeats: 3,
            block_grid: 3,
            block_px: 8,
            block_images: 2_000,
            block_atoms: 64,
        }
    }
}

/// Top-level run configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub dataset: Option<DatasetSection>,
    #[serde(default)]
    pub corpus: CorpusSection,
    #[serde(default)]
    pub coding: CodingSection,
    #[serde(default)]
    pub structure: StructureSection,
    #[serde(default)]
    pub training: TrainingSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
}

impl ExperimentConfig {
    /// Parses `path` and returns the config together with the CRC-32 of the
    /// raw file bytes, which output sidecars carry so results can be traced
    /// back to the exact config text that produced them.
    pub fn load(path: impl AsRef<Path>) -> Result<(Self, u32)> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| EffcodeError::io(path, e))?;
        let cfg: ExperimentConfig =
            serde_json::from_slice(&bytes).map_err(|e| EffcodeError::Format {
                format: "config",
                path: path.to_path_buf(),
                reason: e.to_string(),
            })?;
        cfg.validate()?;
        Ok((cfg, crc32fast::hash(&bytes)))
    }

    pub fn validate(&self) -> Result<()> {
        if let LambdaSpec::Fixed(v) = self.coding.lambda {
            if !v.is_finite() || v < 0.0 {
                return Err(EffcodeError::invalid(
                    "coding.lambda",
                    format!("must be finite and nonnegative, got {v}"),
                ));
            }
        }
        if !self.coding.lambda_scale.is_finite() || self.coding.lambda_scale <= 0.0 {
            return Err(EffcodeError::invalid(
                "coding.lambda_scale",
                "must be a positive finite fraction",
            ));
        }
        if self.coding.atoms == 0 {
            return Err(EffcodeError::invalid("coding.atoms", "must be at least 1"));
        }
        if self.coding.epochs == 0 || self.coding.batch_size == 0 {
            return Err(EffcodeError::invalid(
                "coding",
                "epochs and batch_size must be at least 1",
            ));
        }
        if let Some(atoms) = &self.structure.atoms_per_layer {
            if atoms.iter().any(|&m| m == 0) {
                return Err(EffcodeError::invalid(
                    "structure.atoms_per_layer",
                    "layer widths must be at least 1",
                ));
            }
        }
        if !self.structure.deep_lambda_scale.is_finite() || self.structure.deep_lambda_scale <= 0.0
        {
            return Err(EffcodeError::invalid(
                "structure.deep_lambda_scale",
                "must be a positive finite fraction",
            ));
        }
        if !(0.0..=1.0).contains(&self.structure.deep_lambda_decay)
            || self.structure.deep_lambda_decay == 0.0
        {
            return Err(EffcodeError::invalid(
                "structure.deep_lambda_decay",
                "must lie in (0, 1]",
            ));
        }
        if self.experiment.repeats == 0 {
            return Err(EffcodeError::invalid(
                "experiment.repeats",
                "must be at least 1",
            ));
        }
        Ok(())
    }

    /// Atom count for each potential layer, padded with `coding.atoms`.
    pub fn atoms_per_layer(&self, depth: usize) -> Vec<usize> {
        let mut atoms = self.structure.atoms_per_layer.clone().unwrap_or_default();
        while atoms.len() < depth {
            atoms.push(self.coding.atoms);
        }
        atoms
    }

    pub fn dataset(&self) -> Result<&DatasetSection> {
        self.dataset.as_ref().ok_or_else(|| {
            EffcodeError::invalid("dataset", "this command requires a dataset section")
        })
    }
}

fn default_true() -> bool {
    true
}

fn default_downsample() -> Option<usize> {
    Some(16)
}

fn default_max_images() -> Option<usize> {
    Some(5_000)
}

fn default_max_test_images() -> Option<usize> {
    Some(2_000)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_parses_with_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.coding.atoms, 256);
        assert_eq!(cfg.coding.lambda, LambdaSpec::Auto);
        assert_eq!(cfg.structure.max_depth, 4);
        assert!(cfg.dataset.is_none());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = serde_json::from_str::<ExperimentConfig>(r#"{"sparsity": 0.1}"#);
        assert!(err.is_err());
        let nested = serde_json::from_str::<ExperimentConfig>(
            r#"{"coding": {"atoms": 64, "atmos": 2}}"#,
        );
        assert!(nested.is_err());
    }

    #[test]
    fn lambda_accepts_number_or_auto() {
        let fixed: ExperimentConfig =
            serde_json::from_str(r#"{"coding": {"lambda": 0.25}}"#).unwrap();
        assert_eq!(fixed.coding.lambda, LambdaSpec::Fixed(0.25));
        let auto: ExperimentConfig =
            serde_json::from_str(r#"{"coding": {"lambda": "auto"}}"#).unwrap();
        assert_eq!(auto.coding.lambda, LambdaSpec::Auto);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"coding": {"lambda": "big"}}"#)
            .is_err());
    }

    #[test]
    fn config_roundtrips_through_json() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"seed": 7}"#).unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back.seed, 7);
        assert_eq!(back.coding.lambda, cfg.coding.lambda);
    }
}
