//! The four non-experiment commands: learn-structure, train, eval, gen-data.

use crate::dataio::{generate_corpus, CorpusConfig};
use crate::error::{EffcodeError, Result};
use crate::netprime::{evaluate, init_from_structure, load_model, save_model, train, StructureInit};
use crate::structlearn::{load_structure, save_structure, StructureStack};

use super::context::RunContext;
use super::helpers;
use super::report::fmt_f64;

/// `layer,entropy,gain` rows; layer 0 is the whitened input, so its gain
/// column is empty.
pub(super) fn trace_rows(stack: &StructureStack) -> Vec<String> {
    let gains = stack.gains();
    let mut rows = Vec::with_capacity(stack.entropy_trace.len());
    rows.push(format!("0,{},", fmt_f64(stack.entropy_trace[0].value)));
    for (k, est) in stack.entropy_trace.iter().enumerate().skip(1) {
        rows.push(format!(
            "{},{},{}",
            k,
            fmt_f64(est.value),
            fmt_f64(gains[k - 1])
        ));
    }
    rows
}

pub fn learn_structure_cmd(ctx: &mut RunContext) -> Result<()> {
    let ds = ctx.cfg.dataset()?.clone();
    let data = helpers::load_train(&ds)?;
    let stack = helpers::learn_stack(
        &ctx.cfg,
        &data.data,
        ctx.cfg.structure.max_depth,
        ctx.cfg.structure.epsilon,
    )?;
    save_structure(ctx.path("structure.nslf"), &stack)?;
    ctx.write_csv("entropy_trace.csv", "layer,entropy,gain", &trace_rows(&stack))?;
    ctx.put("depth", stack.depth());
    ctx.put(
        "lambda",
        stack.layers.iter().map(|l| l.lambda).collect::<Vec<_>>(),
    );
    ctx.put(
        "entropy_trace",
        stack
            .entropy_trace
            .iter()
            .map(|e| e.value)
            .collect::<Vec<_>>(),
    );
    ctx.put("gains", stack.gains());
    ctx.put("structure_file", "structure.nslf");
    Ok(())
}

pub fn train_cmd(ctx: &mut RunContext) -> Result<()> {
    let ds = ctx.cfg.dataset()?.clone();
    let spath = ctx.cfg.training.structure.clone().ok_or_else(|| {
        EffcodeError::invalid("training.structure", "train requires a structure file")
    })?;
    let stack = load_structure(&spath)?;
    let data = helpers::load_train(&ds)?;
    let mode = StructureInit::parse(&ctx.cfg.training.mode)?;
    let model = init_from_structure(&stack, mode, data.classes as usize, ctx.cfg.seed)?;
    let tcfg = helpers::train_config(&ctx.cfg.training, ctx.cfg.seed);
    let (model, history) = train(model, &data, &tcfg)?;
    save_model(ctx.path("model.nslf"), &model)?;

    let rows: Vec<String> = history
        .iter()
        .map(|e| format!("{},{},{}", e.epoch, fmt_f64(e.loss), fmt_f64(e.train_acc)))
        .collect();
    ctx.write_csv("history.csv", "epoch,loss,train_acc", &rows)?;

    ctx.put("mode", mode.label());
    ctx.put("depth", stack.depth());
    if let Some(last) = history.last() {
        ctx.put("final_train_accuracy", last.train_acc);
        ctx.put("final_loss", last.loss);
    }
    if let Some(test) = helpers::load_test(&ds)? {
        ctx.put("test_accuracy", evaluate(&model, &test)?);
        ctx.put("test_examples", test.len());
    }
    ctx.put("model_file", "model.nslf");
    Ok(())
}

pub fn eval_cmd(ctx: &mut RunContext) -> Result<()> {
    let ds = ctx.cfg.dataset()?.clone();
    let mpath = ctx.cfg.training.model.clone().ok_or_else(|| {
        EffcodeError::invalid("training.model", "eval requires a model file")
    })?;
    let model = load_model(&mpath)?;
    // Prefer the held-out batch; fall back to the training batch so a
    // dataset without one can still be scored.
    let (data, split) = match helpers::load_test(&ds)? {
        Some(test) => (test, "test"),
        None => (helpers::load_train(&ds)?, "train"),
    };
    let accuracy = evaluate(&model, &data)?;
    let row = format!("{},{}", data.len(), fmt_f64(accuracy));
    ctx.write_csv("eval.csv", "examples,accuracy", &[row])?;
    ctx.put("accuracy", accuracy);
    ctx.put("examples", data.len());
    ctx.put("split", split);
    Ok(())
}

pub fn gen_data_cmd(ctx: &mut RunContext) -> Result<()> {
    let cfg = CorpusConfig {
        n_train: ctx.cfg.corpus.n_train,
        n_test: ctx.cfg.corpus.n_test,
        seed: ctx.cfg.seed,
    };
    generate_corpus(&ctx.out, &cfg)?;
    ctx.put("n_train", cfg.n_train);
    ctx.put("n_test", cfg.n_test);
    Ok(())
}
