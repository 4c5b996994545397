//! Plumbing shared by the CLI commands: dataset loading, lambda
//! resolution, structure learning glue, and hand-built random networks.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::dataio::{
    load_cifar10, whiten_apply, whiten_fit, CifarOptions, DataMatrix, LabeledData,
    WhitenTransform,
};
use crate::error::{EffcodeError, Result};
use crate::infotheory::EntropyParams;
use crate::netprime::{uniform_fan_in, MaskedLayer, NetworkModel, StructureInit};
use crate::rng;
use crate::sparsecode::{calibrate_lambda, initial_dictionary, CodingConfig, Dictionary, GroupSpec};
use crate::structlearn::{
    learn_structure_with, StopCriterion, StructureOptions, StructureStack,
};

use super::config::{CodingSection, DatasetSection, ExperimentConfig, LambdaSpec, StructureSection};

pub fn cifar_options(ds: &DatasetSection) -> CifarOptions {
    CifarOptions {
        max_images: ds.max_images,
        grayscale: ds.grayscale,
        downsample: ds.downsample,
    }
}

pub fn load_train(ds: &DatasetSection) -> Result<LabeledData> {
    load_cifar10(&ds.path, &cifar_options(ds))
}

/// Loads the held-out batch. A missing file is an error only when the
/// config named it explicitly; the conventional `test_batch.bin` is
/// optional so training-only datasets still work.
pub fn load_test(ds: &DatasetSection) -> Result<Option<LabeledData>> {
    let path = ds.resolved_test_path();
    if !path.exists() {
        if ds.test_path.is_some() {
            return Err(EffcodeError::invalid(
                "dataset.test_path",
                format!("{} does not exist", path.display()),
            ));
        }
        return Ok(None);
    }
    let mut opts = cifar_options(ds);
    opts.max_images = ds.max_test_images;
    load_cifar10(&path, &opts).map(Some)
}

pub fn coding_config(coding: &CodingSection, lambda: f64, seed: u64) -> Result<CodingConfig> {
    let group = coding.group_size.map(GroupSpec::new).transpose()?;
    Ok(CodingConfig {
        lambda,
        max_iter: coding.max_iter,
        tol: coding.tol,
        group,
        seed,
    })
}

/// Resolves the coding penalty against the whitened data: a fixed value is
/// used as-is, `"auto"` calibrates from the initial dictionary's responses.
pub fn resolve_lambda(
    coding: &CodingSection,
    white: &DataMatrix,
    atoms: usize,
    seed: u64,
) -> Result<f64> {
    match coding.lambda {
        LambdaSpec::Fixed(v) => Ok(v),
        LambdaSpec::Auto => {
            let dict = initial_dictionary(white, atoms, seed)?;
            calibrate_lambda(&dict, white, coding.lambda_scale)
        }
    }
}

pub fn entropy_params(st: &StructureSection, seed: u64) -> EntropyParams {
    EntropyParams {
        k: st.entropy_k,
        feature_subsample: st.feature_subsample,
        seed,
    }
}

pub fn train_config(tr: &super::config::TrainingSection, seed: u64) -> crate::netprime::TrainConfig {
    crate::netprime::TrainConfig {
        gamma: tr.gamma,
        epochs: tr.epochs,
        batch_size: tr.batch_size,
        seed,
        weight_decay: tr.weight_decay,
        momentum: tr.momentum,
    }
}

pub fn structure_options(st: &StructureSection, coding: &CodingSection) -> StructureOptions {
    StructureOptions {
        whiten_eps: st.whiten_eps,
        epochs: coding.epochs,
        batch_size: coding.batch_size,
        drop_failed_layer: st.drop_failed_layer,
        deep_lambda_scale: Some(st.deep_lambda_scale),
        deep_lambda_decay: st.deep_lambda_decay,
    }
}

/// One-stop structure learning for the commands: whitens to resolve the
/// penalty, then grows a stack of at most `max_depth` layers stopping at
/// relative entropy gain `epsilon`.
pub fn learn_stack(
    cfg: &ExperimentConfig,
    x: &DataMatrix,
    max_depth: usize,
    epsilon: f64,
) -> Result<StructureStack> {
    let atoms = cfg.atoms_per_layer(max_depth);
    let white0 = whiten_fit(x, cfg.structure.whiten_eps)?;
    let white = whiten_apply(&white0, x)?;
    let lambda = resolve_lambda(&cfg.coding, &white, atoms[0], cfg.seed)?;
    let ccfg = coding_config(&cfg.coding, lambda, cfg.seed)?;
    let stop = StopCriterion::new(epsilon, max_depth)?;
    let ep = entropy_params(&cfg.structure, cfg.seed);
    let opts = structure_options(&cfg.structure, &cfg.coding);
    learn_structure_with(x, &atoms, &ccfg, &stop, cfg.structure.density, &ep, &opts)
}

/// 0/1 matrix with exactly `round(density * m * d)` ones (at least one) at
/// uniformly random positions.
pub fn random_mask(m: usize, d: usize, density: f64, rng: &mut impl Rng) -> Result<Array2<f64>> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(EffcodeError::invalid(
            "density",
            format!("must lie in (0, 1], got {density}"),
        ));
    }
    let total = m * d;
    let keep = ((density * total as f64).round() as usize).clamp(1, total);
    let mut idx: Vec<usize> = (0..total).collect();
    idx.shuffle(rng);
    let mut mask = Array2::zeros((m, d));
    for &flat in &idx[..keep] {
        mask[(flat / d, flat % d)] = 1.0;
    }
    Ok(mask)
}

/// One hidden layer of random ±1/√fan_in weights under `mask`, plus a
/// random head: the untrained networks the experiments compare structure
/// against. `mode` only tags which parameters training may touch.
pub fn random_masked_network(
    whiten: WhitenTransform,
    mask: Array2<f64>,
    lambda: f64,
    group: Option<GroupSpec>,
    classes: usize,
    mode: StructureInit,
    seed: u64,
) -> Result<NetworkModel> {
    let (m, d) = mask.dim();
    let weights = uniform_fan_in(m, d, &mut rng::stream(seed, 0));
    let layer = MaskedLayer::new(weights, mask, lambda, group)?;
    let head_w = uniform_fan_in(classes, m, &mut rng::stream(seed, 1));
    let model = NetworkModel {
        whiten,
        layers: vec![layer],
        head_w,
        head_b: Array1::zeros(classes),
        classes,
        mode,
    };
    model.validate()?;
    Ok(model)
}

/// Projects code magnitudes back onto the image grid: entry (p, j) is
/// sum_a D[a,p]^2 / ||D_a||^2 * |U[a,j]|, i.e. each atom's activation
/// spread over the pixels it draws on. Keeps codes comparable to pixels
/// for spatial statistics.
pub fn feature_energy_maps(dict: &Dictionary, codes: &DataMatrix) -> Result<DataMatrix> {
    if codes.rows() != dict.atoms() {
        return Err(EffcodeError::shape(
            "feature_energy_maps",
            format!("{} code rows", dict.atoms()),
            format!("{}", codes.rows()),
        ));
    }
    let d = dict.array();
    let mut profile = d.mapv(|v| v * v);
    for mut row in profile.rows_mut() {
        let total = row.sum();
        if total > 0.0 {
            row.mapv_inplace(|v| v / total);
        }
    }
    let abs_codes = codes.array().mapv(f64::abs);
    DataMatrix::new(profile.t().dot(&abs_codes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn random_mask_has_exact_count() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mask = random_mask(20, 50, 0.1, &mut rng).unwrap();
        assert_eq!(mask.iter().filter(|&&v| v == 1.0).count(), 100);
        assert!(mask.iter().all(|&v| v == 0.0 || v == 1.0));
        let full = random_mask(4, 4, 1.0, &mut rng).unwrap();
        assert_eq!(full.sum(), 16.0);
    }

    #[test]
    fn feature_maps_follow_atom_support() {
        // One atom supported on pixel 0 only, one on pixel 2 only.
        let dict = Dictionary::new(ndarray::array![[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        let codes = DataMatrix::new(ndarray::array![[2.0], [-3.0]]).unwrap();
        let maps = feature_energy_maps(&dict, &codes).unwrap();
        let expect = ndarray::array![[2.0], [0.0], [3.0]];
        assert_eq!(maps.array(), expect.view());
    }
}
