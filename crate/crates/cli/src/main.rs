use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use mvsdf::pipeline::{ExperimentConfig, Outcome, Pipeline, Stage};

/// Multi-sweep implicit vehicle reconstruction.
///
/// Every stage command first brings the stages it depends on up to date.
/// Stages whose config, inputs and outputs match their manifest are skipped.
#[derive(Debug, Parser)]
#[command(name = "mvsdf", version)]
struct Cli {
    /// JSON file with config overrides, merged over the selected profile.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Experiment seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Base profile (`desk` or `full`).
    #[arg(long, global = true)]
    profile: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate procedural training and held-out vehicle meshes.
    GenShapes,
    /// Draw SDF samples from the training meshes.
    SampleSdf,
    /// Train the decoder and the training-shape codebook.
    TrainDecoder,
    /// Simulate LiDAR sweep instances.
    GenSweeps,
    /// Infer per-sweep latent codes and the stacked-sweep baseline code.
    InferLatents,
    /// Train every aggregator variant.
    TrainAggregator,
    /// Reconstruct held-out instances with every method.
    Predict,
    /// Score the reconstructions and write reports/results.{csv,json}.
    Eval,
    /// Run the ablation grid and write reports/ablation.{csv,json}.
    Ablate,
    /// Write OBJ meshes and an HTML summary to export/.
    Export,
    /// Run every stage.
    Run,
    /// Print the resolved config as JSON.
    ShowConfig,
}

fn resolve_config(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let file = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let value: serde_json::Value =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            Some(value)
        }
        None => None,
    };
    Ok(ExperimentConfig::resolve(cli.profile.as_deref(), file.as_ref(), cli.seed)?)
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let config = resolve_config(cli).context("config")?;
    let stage = match cli.command {
        Command::ShowConfig => {
            println!("{}", serde_json::to_string_pretty(&config)?);
            return Ok(());
        }
        Command::Run => None,
        Command::GenShapes => Some(Stage::GenShapes),
        Command::SampleSdf => Some(Stage::SampleSdf),
        Command::TrainDecoder => Some(Stage::TrainDecoder),
        Command::GenSweeps => Some(Stage::GenSweeps),
        Command::InferLatents => Some(Stage::InferLatents),
        Command::TrainAggregator => Some(Stage::TrainAggregator),
        Command::Predict => Some(Stage::Predict),
        Command::Eval => Some(Stage::Eval),
        Command::Ablate => Some(Stage::Ablate),
        Command::Export => Some(Stage::Export),
    };
    let pipeline = Pipeline::new(config, &cli.out)?;
    let log = match stage {
        Some(s) => pipeline.run(s)?,
        None => pipeline.run_all()?,
    };
    for (stage, outcome) in log {
        let status = match outcome {
            Outcome::Ran => "done",
            Outcome::Skipped => "up to date",
        };
        println!("{stage}: {status}");
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
