use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use ltlp_cli::commands;
use ltlp_cli::RunConfig;

#[derive(Parser)]
#[command(name = "ltlp", version, about = "Long-tailed link prediction: pretrain, augment, retrain, evaluate")]
struct Cli {
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run a single seed instead of the configured list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output root; overrides the config file and LTLP_OUT.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Dataset name or edge-list path.
    #[arg(long, global = true)]
    dataset: Option<String>,
    /// Only generate candidates around tail pairs.
    #[arg(long, global = true)]
    tail_only: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Degree and common-neighbor bucket tables for the baseline.
    Analyze,
    /// Pretrain and store the final parameters and last five snapshots.
    Pretrain,
    /// Select edges with stored snapshots and write the augmented graph.
    Augment,
    /// Continue training on the augmented graph.
    Train,
    /// Evaluate stored parameters on the test split.
    Eval,
    /// Every stage end to end, with baseline and augmented reports.
    Pipeline,
    /// Label-error rates of hard negatives during pretraining.
    HardNegatives {
        /// Comma-separated difficulty levels.
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<usize>>,
    },
    /// Pipeline results under downsampled training edges.
    Sparsity {
        /// Comma-separated ratios in (0, 1].
        #[arg(long, value_delimiter = ',')]
        ratios: Option<Vec<f64>>,
    },
}

fn build_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path, cli.dataset.as_deref())?,
        None => RunConfig::for_dataset(cli.dataset.as_deref().unwrap_or("cora")),
    };
    cfg.apply_env();
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seeds = vec![seed];
    }
    if cli.tail_only {
        cfg.tail_only = true;
    }
    match &cli.command {
        Command::HardNegatives { levels: Some(l) } => cfg.hard_negative.levels = l.clone(),
        Command::Sparsity { ratios: Some(r) } => cfg.sparsity_ratios = r.clone(),
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = build_config(&cli)?;
    match cli.command {
        Command::Analyze => commands::analyze(&cfg),
        Command::Pretrain => commands::pretrain_cmd(&cfg),
        Command::Augment => commands::augment_cmd(&cfg),
        Command::Train => commands::train_cmd(&cfg),
        Command::Eval => commands::eval_cmd(&cfg),
        Command::Pipeline => commands::pipeline_cmd(&cfg).map(|_| ()),
        Command::HardNegatives { .. } => commands::hard_negatives_cmd(&cfg),
        Command::Sparsity { .. } => commands::sparsity_cmd(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
