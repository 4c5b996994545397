//! The exp-* commands. Each one writes CSV rows whose numbers depend only
//! on the config and seed, with per-seed detail in the summary.

use std::collections::BTreeMap;

use rand::Rng;

use crate::dataio::{synth_blocks, whiten_apply, whiten_fit, BlockSynthConfig, DataMatrix, LabeledData};
use crate::error::{EffcodeError, Result};
use crate::infotheory::{multi_information_with, spatial_mi_profile};
use crate::netprime::{evaluate, forward, init_from_structure, train, StructureInit};
use crate::rng;
use crate::sparsecode::{learn_dictionary_batched, GroupSpec};
use crate::structlearn::{block_localization, threshold_mask, StructureStack};

use super::context::RunContext;
use super::helpers;
use super::report::{self, fmt_f64};

/// Seed stream tags, one namespace per experiment so runs never share draws.
const TAG_ENTROPY_ACC: u64 = 0x0100;
const TAG_MI_DECAY: u64 = 0x0200;
const TAG_DENSITY: u64 = 0x0300;
const TAG_MASK_ROLE: u64 = 0x0400;
const TAG_DEPTH: u64 = 0x0500;
const TAG_BLOCKS: u64 = 0x0600;

/// Epsilon small enough that entropy stagnation never halts depth growth;
/// the sweeps below pick their depths explicitly.
const FORCE_DEPTH_EPS: f64 = 1e-12;

/// Test split when present, else the training batch; the summary records
/// which one scored the models.
fn eval_split(ds: &super::config::DatasetSection, train: &LabeledData) -> Result<(LabeledData, &'static str)> {
    match helpers::load_test(ds)? {
        Some(test) => Ok((test, "test")),
        None => Ok((train.clone(), "train")),
    }
}

/// Random single-layer networks at sampled mask densities, scored by the
/// multi-information of their feature codes versus the accuracy a fresh
/// head reaches on them. Accuracy is read on the training subset itself:
/// the question is how well the structure supports the fit, not how it
/// generalizes.
pub fn exp_entropy_accuracy(ctx: &mut RunContext) -> Result<()> {
    let ds = ctx.cfg.dataset()?.clone();
    let data = helpers::load_train(&ds)?;
    let cfg = &ctx.cfg;
    let densities = &cfg.experiment.random_densities;
    if densities.is_empty() {
        return Err(EffcodeError::invalid(
            "experiment.random_densities",
            "need at least one density",
        ));
    }

    let whiten = whiten_fit(&data.data, cfg.structure.whiten_eps)?;
    let white = whiten_apply(&whiten, &data.data)?;
    let m = cfg.coding.atoms;
    let d = white.rows();
    let lambda = helpers::resolve_lambda(&cfg.coding, &white, m, cfg.seed)?;
    let group = cfg.coding.group_size.map(GroupSpec::new).transpose()?;
    let ep = helpers::entropy_params(&cfg.structure, cfg.seed);
    let tcfg = helpers::train_config(&cfg.training, cfg.seed);
    let classes = data.classes as usize;

    let mut rows = Vec::new();
    let mut entropies = Vec::new();
    let mut accuracies = Vec::new();
    let mut picked = Vec::new();
    for r in 0..cfg.experiment.n_structures {
        let seed_r = rng::derive_seed(cfg.seed, TAG_ENTROPY_ACC + r as u64);
        let mut mask_rng = rng::stream(seed_r, 2);
        let density = densities[mask_rng.gen_range(0..densities.len())];
        let mask = helpers::random_mask(m, d, density, &mut mask_rng)?;
        let model = helpers::random_masked_network(
            whiten.clone(),
            mask,
            lambda,
            group,
            classes,
            StructureInit::Weight,
            seed_r,
        )?;
        let (_, cache) = forward(&model, &data.data)?;
        let feats = DataMatrix::new(cache.top().clone())?;
        let entropy = multi_information_with(&feats, &ep)?;
        let (trained, _) = train(model, &data, &tcfg)?;
        let accuracy = evaluate(&trained, &data)?;
        rows.push(format!(
            "{r},{},{}",
            fmt_f64(entropy.value),
            fmt_f64(accuracy)
        ));
        entropies.push(entropy.value);
        accuracies.push(accuracy);
        picked.push(density);
    }
    ctx.write_csv(
        "entropy_accuracy.csv",
        "structure_id,entropy,train_accuracy",
        &rows,
    )?;
    ctx.put("spearman_rho", report::spearman_rho(&entropies, &accuracies));
    ctx.put("lambda", lambda);
    ctx.put("densities", picked);
    Ok(())
}

/// Mutual information between value pairs as a function of grid offset,
/// once for whitened pixels and once for learned feature energy projected
/// back onto the grid. Whitening removes the linear correlations, so
/// whatever decay survives is higher-order structure; ZCA keeps the
/// coordinates pixel-aligned, which the grid geometry relies on.
pub fn exp_mi_decay(ctx: &mut RunContext) -> Result<()> {
    let ds = ctx.cfg.dataset()?.clone();
    let data = helpers::load_train(&ds)?;
    let cfg = &ctx.cfg;
    let d = data.data.rows();
    let side = (d as f64).sqrt().round() as usize;
    if side * side != d {
        return Err(EffcodeError::invalid(
            "dataset",
            format!("{d} features do not form a square pixel grid; use grayscale"),
        ));
    }
    let offsets = &cfg.experiment.offsets;
    let n_pairs = cfg.experiment.n_pairs;
    let k = cfg.structure.entropy_k;

    let whiten = whiten_fit(&data.data, cfg.structure.whiten_eps)?;
    let white = whiten_apply(&whiten, &data.data)?;

    let pixel = spatial_mi_profile(
        &white,
        side,
        offsets,
        n_pairs,
        k,
        rng::derive_seed(cfg.seed, TAG_MI_DECAY),
    )?;
    let pixel_rows: Vec<String> = offsets
        .iter()
        .zip(&pixel.mi)
        .map(|(&off, &mi)| format!("{off},{},{}", fmt_f64(mi), pixel.n_pairs))
        .collect();
    ctx.write_csv("pixel_mi.csv", "offset,mi,n_pairs", &pixel_rows)?;

    let lambda = helpers::resolve_lambda(&cfg.coding, &white, cfg.coding.atoms, cfg.seed)?;
    let ccfg = helpers::coding_config(&cfg.coding, lambda, cfg.seed)?;
    let learned = learn_dictionary_batched(
        &white,
        cfg.coding.atoms,
        &ccfg,
        cfg.coding.epochs,
        cfg.coding.batch_size,
    )?;
    let feats = helpers::feature_energy_maps(&learned.dictionary, &learned.codes)?;
    let feature = spatial_mi_profile(
        &feats,
        side,
        offsets,
        n_pairs,
        k,
        rng::derive_seed(cfg.seed, TAG_MI_DECAY + 1),
    )?;
    let feature_rows: Vec<String> = offsets
        .iter()
        .zip(&feature.mi)
        .map(|(&off, &mi)| format!("{off},{},{}", fmt_f64(mi), feature.n_pairs))
        .collect();
    ctx.write_csv("feature_mi.csv", "offset,mi,n_pairs", &feature_rows)?;

    ctx.put("lambda", lambda);
    ctx.put("pixel_mi", pixel.mi.clone());
    ctx.put("feature_mi", feature.mi.clone());
    Ok(())
}

/// Classification accuracy of mask-constrained random-init networks whose
/// masks either come from a learned dictionary or are drawn uniformly, over
/// a density sweep. Each cell averages `repeats` training runs.
pub fn exp_density(ctx: &mut RunContext) -> Result<()> {
    let ds = ctx.cfg.dataset()?.clone();
    let data = helpers::load_train(&ds)?;
    let (eval_data, split) = eval_split(&ds, &data)?;
    let stack = helpers::learn_stack(&ctx.cfg, &data.data, 1, f64::INFINITY)?;
    let cfg = &ctx.cfg;
    let layer = &stack.layers[0];
    let (m, d) = (layer.dictionary.atoms(), layer.dictionary.input_dim());
    let tcfg_base = helpers::train_config(&cfg.training, cfg.seed);
    let classes = data.classes as usize;
    let repeats = cfg.experiment.repeats;

    let mut rows = Vec::new();
    let mut detail = BTreeMap::new();
    for (di, &density) in cfg.experiment.density_grid.iter().enumerate() {
        for (si, source) in ["sparse_coding", "random"].into_iter().enumerate() {
            let mut accs = Vec::with_capacity(repeats);
            for s in 0..repeats {
                let cell = ((di * 2 + si) * repeats + s) as u64;
                let seed_cell = rng::derive_seed(cfg.seed, TAG_DENSITY + cell);
                let mask = if si == 0 {
                    threshold_mask(&layer.dictionary, density)?.array().to_owned()
                } else {
                    helpers::random_mask(m, d, density, &mut rng::stream(seed_cell, 2))?
                };
                let model = helpers::random_masked_network(
                    layer.whiten.clone(),
                    mask,
                    layer.lambda,
                    stack.group,
                    classes,
                    StructureInit::MaskBp,
                    seed_cell,
                )?;
                let tcfg = crate::netprime::TrainConfig {
                    seed: seed_cell,
                    ..tcfg_base
                };
                let (trained, _) = train(model, &data, &tcfg)?;
                accs.push(evaluate(&trained, &eval_data)?);
            }
            rows.push(format!("{source},{},{}", fmt_f64(density), fmt_f64(report::mean(&accs))));
            detail.insert(format!("{source}@{density}"), accs);
        }
    }
    ctx.write_csv("density.csv", "mask_source,density,accuracy", &rows)?;
    ctx.put("lambda", stack.layers[0].lambda);
    ctx.put("split", split);
    ctx.put("per_seed_accuracy", detail);
    Ok(())
}

fn mode_depth_runs(
    ctx: &mut RunContext,
    stack: &StructureStack,
    data: &LabeledData,
    eval_data: &LabeledData,
    depth: usize,
    mode: StructureInit,
    tag: u64,
    base_index: u64,
) -> Result<(Vec<f64>, Vec<u64>)> {
    let cfg = &ctx.cfg;
    let sub = stack.prefix(depth)?;
    let classes = data.classes as usize;
    let tcfg_base = helpers::train_config(&cfg.training, cfg.seed);
    let mut accs = Vec::with_capacity(cfg.experiment.repeats);
    let mut seeds = Vec::with_capacity(cfg.experiment.repeats);
    for s in 0..cfg.experiment.repeats {
        let seed = rng::derive_seed(cfg.seed, tag + base_index + s as u64);
        let model = init_from_structure(&sub, mode, classes, seed)?;
        let tcfg = crate::netprime::TrainConfig { seed, ..tcfg_base };
        let (trained, _) = train(model, data, &tcfg)?;
        accs.push(evaluate(&trained, eval_data)?);
        seeds.push(seed);
    }
    Ok((accs, seeds))
}

/// All five structure-use modes at each requested depth, on one structure
/// stack learned up front (depth forced, so every requested prefix exists).
pub fn exp_mask_role(ctx: &mut RunContext) -> Result<()> {
    let ds = ctx.cfg.dataset()?.clone();
    let data = helpers::load_train(&ds)?;
    let (eval_data, split) = eval_split(&ds, &data)?;
    let depths = ctx.cfg.experiment.mask_depths.clone();
    let max_depth = *depths.iter().max().ok_or_else(|| {
        EffcodeError::invalid("experiment.mask_depths", "need at least one depth")
    })?;
    let stack = helpers::learn_stack(&ctx.cfg, &data.data, max_depth, FORCE_DEPTH_EPS)?;

    let mut rows = Vec::new();
    let mut detail = BTreeMap::new();
    let repeats = ctx.cfg.experiment.repeats as u64;
    for (ki, &depth) in depths.iter().enumerate() {
        for (mi, &mode) in StructureInit::ALL.iter().enumerate() {
            let base = ((ki * StructureInit::ALL.len() + mi) as u64) * repeats;
            let (accs, seeds) =
                mode_depth_runs(ctx, &stack, &data, &eval_data, depth, mode, TAG_MASK_ROLE, base)?;
            let seed_list = seeds
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(";");
            rows.push(format!(
                "{},{depth},{},{seed_list}",
                mode.label(),
                fmt_f64(report::mean(&accs))
            ));
            detail.insert(format!("{}@{depth}", mode.label()), accs);
        }
    }
    ctx.write_csv("mask_role.csv", "mode,depth,accuracy,seeds", &rows)?;
    ctx.put("split", split);
    ctx.put("per_seed_accuracy", detail);
    ctx.put("lambda", stack.layers.iter().map(|l| l.lambda).collect::<Vec<_>>());
    Ok(())
}

/// Accuracy and code entropy as the network deepens along one forced-depth
/// structure stack.
pub fn exp_depth(ctx: &mut RunContext) -> Result<()> {
    let ds = ctx.cfg.dataset()?.clone();
    let data = helpers::load_train(&ds)?;
    let (eval_data, split) = eval_split(&ds, &data)?;
    let grid = ctx.cfg.experiment.depth_grid.clone();
    let max_depth = *grid.iter().max().ok_or_else(|| {
        EffcodeError::invalid("experiment.depth_grid", "need at least one depth")
    })?;
    let stack = helpers::learn_stack(&ctx.cfg, &data.data, max_depth, FORCE_DEPTH_EPS)?;
    let mode = StructureInit::parse(&ctx.cfg.training.mode)?;

    let mut rows = Vec::new();
    let mut detail = BTreeMap::new();
    let repeats = ctx.cfg.experiment.repeats as u64;
    for (ki, &depth) in grid.iter().enumerate() {
        let base = ki as u64 * repeats;
        let (accs, _) =
            mode_depth_runs(ctx, &stack, &data, &eval_data, depth, mode, TAG_DEPTH, base)?;
        let entropy = stack.entropy_trace[depth].value;
        rows.push(format!(
            "{depth},{},{}",
            fmt_f64(report::mean(&accs)),
            fmt_f64(entropy)
        ));
        detail.insert(depth.to_string(), accs);
    }
    ctx.write_csv("depth.csv", "depth,accuracy,entropy", &rows)?;
    ctx.put("split", split);
    ctx.put("mode", mode.label());
    ctx.put("per_seed_accuracy", detail);
    ctx.put(
        "entropy_trace",
        stack.entropy_trace.iter().map(|e| e.value).collect::<Vec<_>>(),
    );
    Ok(())
}

/// Dictionary learning on images stitched from independent blocks. Atoms
/// are scored by how much of their energy falls inside their strongest
/// block; a random dictionary serves as the dispersion baseline. ZCA
/// whitening of block-independent data is itself block-diagonal, so the
/// whitened coordinates stay pixel-aligned and the block score remains
/// meaningful.
pub fn exp_blocks(ctx: &mut RunContext) -> Result<()> {
    let ds = ctx.cfg.dataset()?.clone();
    let cfg = &ctx.cfg;
    let grid = cfg.experiment.block_grid;
    let mut opts = helpers::cifar_options(&ds);
    opts.grayscale = true;
    opts.downsample = None;
    let source = crate::dataio::load_cifar10(&ds.path, &opts)?.data;
    let synth = synth_blocks(&BlockSynthConfig {
        grid,
        block_px: cfg.experiment.block_px,
        n_images: cfg.experiment.block_images,
        source,
        seed: rng::derive_seed(cfg.seed, TAG_BLOCKS),
    })?;
    let whiten = whiten_fit(&synth, cfg.structure.whiten_eps)?;
    let white = whiten_apply(&whiten, &synth)?;

    let atoms = cfg.experiment.block_atoms;
    let lambda = helpers::resolve_lambda(&cfg.coding, &white, atoms, cfg.seed)?;
    let ccfg = helpers::coding_config(&cfg.coding, lambda, cfg.seed)?;
    let learned = learn_dictionary_batched(
        &white,
        atoms,
        &ccfg,
        cfg.coding.epochs,
        cfg.coding.batch_size,
    )?;
    let localization = block_localization(&learned.dictionary, grid)?;

    let d = white.rows();
    let random = crate::sparsecode::Dictionary::new({
        let mut rng = rng::stream(cfg.seed, 3);
        let mut w = ndarray::Array2::from_shape_fn((atoms, d), |_| -> f64 {
            rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng)
        });
        for mut row in w.rows_mut() {
            let norm = row.dot(&row).sqrt();
            if norm > 0.0 {
                row.mapv_inplace(|v| v / norm);
            }
        }
        w
    })?;
    let baseline = block_localization(&random, grid)?;

    let rows: Vec<String> = localization
        .iter()
        .enumerate()
        .map(|(a, &f)| format!("{a},{}", fmt_f64(f)))
        .collect();
    ctx.write_csv("block_localization.csv", "atom,max_block_fraction", &rows)?;

    let side = grid * cfg.experiment.block_px;
    let (w, h, pixels) = report::atom_sheet(&learned.dictionary.array().to_owned(), side)?;
    report::write_pgm(ctx.path("atoms.pgm"), w, h, &pixels)?;

    ctx.put("lambda", lambda);
    ctx.put("mean_localization", report::mean(&localization));
    ctx.put(
        "fraction_above_0.8",
        localization.iter().filter(|&&f| f >= 0.8).count() as f64 / localization.len() as f64,
    );
    ctx.put("random_baseline_mean", report::mean(&baseline));
    Ok(())
}
