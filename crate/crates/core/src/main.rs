use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use effcode::cli::{self, Command, RunArgs};

#[derive(Parser)]
#[command(
    name = "effcode",
    about = "Entropy-guided structure learning for sparse networks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created; refuses non-empty without --force).
    #[arg(long)]
    out: PathBuf,
    /// Overrides the seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Overwrite files in an existing output directory.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Learn a layered structure (dictionaries + masks) from images.
    LearnStructure(CommonArgs),
    /// Train a classifier network initialized from a learned structure.
    Train(CommonArgs),
    /// Score a saved model on a dataset.
    Eval(CommonArgs),
    /// Code entropy of random structures vs. reachable accuracy.
    ExpEntropyAccuracy(CommonArgs),
    /// Mutual information vs. spatial offset, pixels and learned features.
    ExpMiDecay(CommonArgs),
    /// Learned vs. random masks across a connection-density sweep.
    ExpDensity(CommonArgs),
    /// All structure-use modes across network depths.
    ExpMaskRole(CommonArgs),
    /// Accuracy and code entropy as depth grows.
    ExpDepth(CommonArgs),
    /// Atom localization on block-structured synthetic images.
    ExpBlocks(CommonArgs),
    /// Write a synthetic image corpus in CIFAR-10 batch format.
    GenData(CommonArgs),
}

impl Cmd {
    fn split(self) -> (Command, CommonArgs) {
        match self {
            Cmd::LearnStructure(a) => (Command::LearnStructure, a),
            Cmd::Train(a) => (Command::Train, a),
            Cmd::Eval(a) => (Command::Eval, a),
            Cmd::ExpEntropyAccuracy(a) => (Command::ExpEntropyAccuracy, a),
            Cmd::ExpMiDecay(a) => (Command::ExpMiDecay, a),
            Cmd::ExpDensity(a) => (Command::ExpDensity, a),
            Cmd::ExpMaskRole(a) => (Command::ExpMaskRole, a),
            Cmd::ExpDepth(a) => (Command::ExpDepth, a),
            Cmd::ExpBlocks(a) => (Command::ExpBlocks, a),
            Cmd::GenData(a) => (Command::GenData, a),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = cli.command.split();
    if let Some(threads) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: could not set thread count: {e}");
            return ExitCode::FAILURE;
        }
    }
    let run_args = RunArgs {
        config: args.config,
        out: args.out,
        seed: args.seed,
        force: args.force,
    };
    match cli::run(command, &run_args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
