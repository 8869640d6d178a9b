use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use latent_edit::pipeline::{self, Variant};
use latent_edit::{PipelineError, RunConfig};
use serde_json::json;

#[derive(Parser)]
#[command(name = "latent-edit", version, about = "Gesture-preserving latent editing pipeline")]
struct Cli {
    /// TOML run config; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set directions.iterations=500`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the effective config as TOML.
    Config,
    /// Render the training dataset.
    SynthDataset,
    /// Train the regressor and landmark detector, initialize the rest.
    TrainModels,
    /// Train a direction matrix.
    TrainDirections {
        #[arg(long, value_enum)]
        variant: Variant,
    },
    /// Generate edited images with labels carried over.
    Augment {
        #[arg(long)]
        matrix: String,
        /// `a..b` or a comma-separated list.
        #[arg(long)]
        seeds: String,
        /// `feature=strength`, repeatable; none copies the originals.
        #[arg(long = "edit")]
        edits: Vec<String>,
        /// Output batch name; defaults to the matrix id.
        #[arg(long)]
        name: Option<String>,
    },
    /// Opposite-set evaluation of one or more matrices.
    Evaluate {
        #[arg(long = "matrix")]
        matrices: Vec<String>,
        #[arg(long = "target")]
        targets: Vec<String>,
    },
    /// Every stage in order: dataset, models, both variants, evaluation.
    Run,
    /// Serve the read-only HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = RunConfig::load(cli.config.as_deref(), &cli.overrides)?;
    match cli.command {
        Command::Config => print!("{}", cfg.to_toml()),
        Command::SynthDataset => synth(&cfg)?,
        Command::TrainModels => models(&cfg)?,
        Command::TrainDirections { variant } => directions(&cfg, variant)?,
        Command::Augment { matrix, seeds, edits, name } => {
            let seeds = pipeline::parse_seeds(&seeds)?;
            let edits = edits.iter().map(|e| pipeline::parse_edit(e)).collect::<Result<Vec<_>, _>>()?;
            let records = pipeline::augment(&cfg, &matrix, &seeds, &edits, name.as_deref().unwrap_or(&matrix))?;
            let drift = records.iter().map(|r| r.gesture_drift).sum::<f64>() / records.len().max(1) as f64;
            eprintln!("augment: {} images, mean gesture drift {drift:.5}", records.len());
        }
        Command::Evaluate { matrices, targets } => evaluate(&cfg, &matrices, &targets)?,
        Command::Run => {
            synth(&cfg)?;
            models(&cfg)?;
            directions(&cfg, Variant::Baseline)?;
            directions(&cfg, Variant::Hfld)?;
            evaluate(&cfg, &[], &[])?;
        }
        Command::Serve { addr } => {
            let rt = tokio::runtime::Builder::new_current_thread().enable_all().build()?;
            rt.block_on(latent_edit::serve::serve(&cfg, &addr))?;
        }
    }
    Ok(())
}

fn synth(cfg: &RunConfig) -> anyhow::Result<()> {
    let records = pipeline::synth_dataset(cfg)?;
    eprintln!("synth-dataset: {} images in {}", records.len(), cfg.output_dir.join("dataset").display());
    Ok(())
}

fn models(cfg: &RunConfig) -> anyhow::Result<()> {
    let s = pipeline::train_models(cfg)?;
    let m = |w: &latent_edit_core::nn::NetworkWeights| w.metrics.clone().expect("trained weights carry metrics");
    let (r, l) = (m(&s.regressor), m(&s.landmarker));
    eprintln!("train-models: regressor worst slot MAE {:.4} (mean {:.4})", r.worst_output_error(), r.validation_error);
    eprintln!("train-models: landmarker mean error {:.3} px", l.validation_error);
    if !s.regressor_ok {
        eprintln!("warning: regressor MAE exceeds networks.max_slot_mae = {}", cfg.networks.max_slot_mae);
    }
    if !s.landmarker_ok {
        eprintln!("warning: landmark error exceeds networks.max_landmark_error_px = {}", cfg.networks.max_landmark_error_px);
    }
    Ok(())
}

fn directions(cfg: &RunConfig, variant: Variant) -> anyhow::Result<()> {
    let s = pipeline::train_directions(cfg, variant)?;
    eprintln!(
        "train-directions {}: {} iterations in {:.1}s, regressor loss {:.4} -> {:.4}",
        variant.name(),
        s.sidecar.iterations,
        s.wall_time_secs,
        s.first_regressor_loss,
        s.final_regressor_loss
    );
    Ok(())
}

fn evaluate(cfg: &RunConfig, matrices: &[String], targets: &[String]) -> anyhow::Result<()> {
    let report = pipeline::evaluate(cfg, matrices, targets)?;
    eprint!("{}", pipeline::render_markdown(&report));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = e.downcast_ref::<PipelineError>().map_or("runtime", PipelineError::code);
            eprintln!("{}", json!({ "error": { "code": code, "message": format!("{e:#}") } }));
            ExitCode::FAILURE
        }
    }
}
