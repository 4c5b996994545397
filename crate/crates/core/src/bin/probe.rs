//! Scratch diagnostic: per-depth train/test accuracy of primed networks.

use effcode::dataio::{load_cifar10, CifarOptions};
use effcode::infotheory::EntropyParams;
use effcode::netprime::{evaluate, forward, init_from_structure, train, StructureInit, TrainConfig};
use effcode::sparsecode::CodingConfig;
use effcode::structlearn::{learn_structure_with, StopCriterion, StructureOptions};

fn main() {
    let opts = CifarOptions {
        max_images: Some(10000),
        grayscale: true,
        downsample: Some(16),
    };
    let train_data = load_cifar10("/root/scratch/corpus_full", &opts).unwrap();
    let test_opts = CifarOptions {
        max_images: Some(2000),
        ..opts
    };
    let test_data = load_cifar10("/root/scratch/corpus_full/test_batch.bin", &test_opts).unwrap();

    let mut cfg = CodingConfig::new(0.41);
    cfg.seed = 11;
    let ep = EntropyParams {
        k: 5,
        feature_subsample: Some(32),
        seed: 11,
    };
    let stop = StopCriterion {
        epsilon: 1e-12,
        max_depth: 3,
    };
    let sopts = StructureOptions {
        epochs: 6,
        deep_lambda_scale: Some(0.05),
        deep_lambda_decay: 0.8,
        ..StructureOptions::default()
    };
    let stack = learn_structure_with(
        &train_data.data,
        &[256, 256, 256],
        &cfg,
        &stop,
        0.1,
        &ep,
        &sopts,
    )
    .unwrap();
    for (i, e) in stack.entropy_trace.iter().enumerate() {
        println!("trace[{}] = {:.4}", i, e.value);
    }

    for depth in 1..=3 {
        let prefix = stack.prefix(depth).unwrap();
        let model = init_from_structure(
            &prefix,
            StructureInit::WeightMaskBp,
            train_data.classes as usize,
            1000 + depth as u64,
        )
        .unwrap();
        let (_, cache) = forward(&model, &train_data.data).unwrap();
        let top = cache.top();
        let arr = top.view();
        let nz = arr.iter().filter(|v| **v != 0.0).count();
        let total = arr.len();
        let mean_abs_nz = if nz > 0 {
            arr.iter().map(|v| v.abs()).sum::<f64>() / nz as f64
        } else {
            0.0
        };
        let max_abs = arr.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        println!(
            "depth {} lambda {:.4}: frac_nz {:.4} mean|nz| {:.4} max {:.4}",
            depth,
            stack.layers[depth - 1].lambda,
            nz as f64 / total as f64,
            mean_abs_nz,
            max_abs
        );
        for (gamma, epochs, wd) in [] as [(f64, usize, f64); 0] {
            let tcfg = TrainConfig {
                gamma,
                epochs,
                batch_size: 128,
                seed: 500,
                weight_decay: wd,
                momentum: 0.0,
            };
            let model = init_from_structure(
                &prefix,
                StructureInit::WeightMaskBp,
                train_data.classes as usize,
                1000 + depth as u64,
            )
            .unwrap();
            let (trained, _) = train(model, &train_data, &tcfg).unwrap();
            let tr = evaluate(&trained, &train_data).unwrap();
            let te = evaluate(&trained, &test_data).unwrap();
            println!(
                "depth {} gamma {} epochs {} wd {}: train {:.4} test {:.4}",
                depth, gamma, epochs, wd, tr, te
            );
        }
    }
}
