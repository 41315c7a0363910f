use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use gtslatent::harness::{
    emit_all, generate_dataset, run_prediction_experiment, run_reconstruction_experiment, ExperimentConfig,
    ExperimentOutput,
};

#[derive(Parser)]
#[command(name = "gtslatent", version, about = "Latent representations of graph time series: reconstruction and prediction experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test-set reconstruction MSE per (method, m).
    Reconstruct(RunArgs),
    /// FC-LSTM free-run prediction MSE per (method, m).
    Predict(RunArgs),
    /// Write the configured dataset as a GTS1 tensor (`dataset.gts`).
    GenData(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut config = ExperimentConfig::load(&self.config)
            .with_context(|| format!("loading config {}", self.config.display()))?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(out) = &self.out {
            config.output_dir = out.clone();
        }
        config.validate()?;
        Ok(config)
    }
}

fn print_table(output: &ExperimentOutput) {
    println!("{:<10} {:>6} {:>14} {:>14}", "method", "m", "recon_mse", "pred_mse");
    for row in &output.report.rows {
        let pred = row.pred_mse.map(|v| format!("{v:.6e}")).unwrap_or_else(|| "-".into());
        println!("{:<10} {:>6} {:>14.6e} {:>14}", row.method.name(), row.m, row.recon_mse, pred);
    }
}

fn finish(output: ExperimentOutput, dir: &Path) -> Result<()> {
    print_table(&output);
    let written = emit_all(&output, dir).with_context(|| format!("writing results to {}", dir.display()))?;
    eprintln!(
        "wrote {} files to {} ({:.1}s)",
        written.len(),
        dir.display(),
        output.report.wall_time_secs
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Reconstruct(args) => {
            let config = args.load()?;
            let output = run_reconstruction_experiment(&config)?;
            finish(output, &config.output_dir)
        }
        Command::Predict(args) => {
            let config = args.load()?;
            let output = run_prediction_experiment(&config)?;
            finish(output, &config.output_dir)
        }
        Command::GenData(args) => {
            let config = args.load()?;
            let dataset = generate_dataset(&config)?;
            let dir = &config.output_dir;
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let path = dir.join("dataset.gts");
            dataset.save(&path)?;
            let shape = match dataset.frame_shape() {
                Some((h, w)) => format!("{h}x{w}"),
                None => dataset.frame_dim().to_string(),
            };
            println!(
                "{}: {} sequences of {} frames ({shape})",
                path.display(),
                dataset.len(),
                dataset.frames_per_sequence()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
