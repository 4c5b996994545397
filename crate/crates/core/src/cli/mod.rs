//! Command implementations for the `effcode` binary.
//!
//! Every command reads one JSON config, writes into a fresh output
//! directory (existing non-empty directories need `--force`), and seals the
//! run with `resolved_config.json` and `summary.json`. Outputs are
//! deterministic in the (config, seed) pair except for the wall-clock
//! fields in sidecars and summaries.

mod commands;
mod config;
mod context;
mod experiments;
mod helpers;
mod report;

use std::path::PathBuf;

pub use config::{
    CodingSection, CorpusSection, DatasetSection, ExperimentConfig, ExperimentSection,
    LambdaSpec, StructureSection, TrainingSection,
};
pub use context::RunContext;
pub use report::{fmt_f64, spearman_rho, write_pgm};

use crate::error::Result;

/// Everything a command needs besides its name.
#[derive(Debug, Clone)]
pub struct RunArgs {
    pub config: PathBuf,
    pub out: PathBuf,
    /// Overrides the config's seed when set.
    pub seed: Option<u64>,
    pub force: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    LearnStructure,
    Train,
    Eval,
    ExpEntropyAccuracy,
    ExpMiDecay,
    ExpDensity,
    ExpMaskRole,
    ExpDepth,
    ExpBlocks,
    GenData,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::LearnStructure => "learn-structure",
            Command::Train => "train",
            Command::Eval => "eval",
            Command::ExpEntropyAccuracy => "exp-entropy-accuracy",
            Command::ExpMiDecay => "exp-mi-decay",
            Command::ExpDensity => "exp-density",
            Command::ExpMaskRole => "exp-mask-role",
            Command::ExpDepth => "exp-depth",
            Command::ExpBlocks => "exp-blocks",
            Command::GenData => "gen-data",
        }
    }
}

/// Runs one command end to end: prepare the output directory, execute,
/// seal the run records.
pub fn run(cmd: Command, args: &RunArgs) -> Result<()> {
    let mut ctx = RunContext::prepare(args)?;
    match cmd {
        Command::LearnStructure => commands::learn_structure_cmd(&mut ctx)?,
        Command::Train => commands::train_cmd(&mut ctx)?,
        Command::Eval => commands::eval_cmd(&mut ctx)?,
        Command::ExpEntropyAccuracy => experiments::exp_entropy_accuracy(&mut ctx)?,
        Command::ExpMiDecay => experiments::exp_mi_decay(&mut ctx)?,
        Command::ExpDensity => experiments::exp_density(&mut ctx)?,
        Command::ExpMaskRole => experiments::exp_mask_role(&mut ctx)?,
        Command::ExpDepth => experiments::exp_depth(&mut ctx)?,
        Command::ExpBlocks => experiments::exp_blocks(&mut ctx)?,
        Command::GenData => commands::gen_data_cmd(&mut ctx)?,
    }
    ctx.finish(cmd.name())
}
