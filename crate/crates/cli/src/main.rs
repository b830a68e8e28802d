//! `ganmut`: build manifests, train, generate expression grids and evaluate
//! checkpoints.

mod common;
mod evaluate;
mod extras;
mod generate;
mod manifest;
mod train;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "ganmut",
    version,
    about = "Learnable polar emotion space GAN",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Pair video frames with annotations, crop faces and write a manifest CSV.
    Manifest(manifest::Args),
    /// Train the generator, discriminator and emotion directions.
    Train(train::Args),
    /// Render expression grids, intensity ladders or gamut rasters.
    Generate(generate::Args),
    /// Compute FED, smoothness and discriminator F1 reports.
    Evaluate(evaluate::Args),
    /// Fit the reference emotion classifier used by the metrics.
    TrainClassifier(extras::ClassifierArgs),
    /// Write the procedural three-expression dataset with its manifest.
    Synth(extras::SynthArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Manifest(a) => manifest::run(a),
        Command::Train(a) => train::run(a),
        Command::Generate(a) => generate::run(a),
        Command::Evaluate(a) => evaluate::run(a),
        Command::TrainClassifier(a) => extras::train_classifier(a),
        Command::Synth(a) => extras::synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.code())
        }
    }
}
