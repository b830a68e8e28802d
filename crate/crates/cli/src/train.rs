use std::path::PathBuf;

use anyhow::Context;
use ganmut_core::datapipe::{Augmentation, BatchSource, Manifest, ManifestLoader};
use ganmut_core::emotion_space::DirectionTable;
use ganmut_core::losses::LossWeights;
use ganmut_core::networks::ModelConfig;
use ganmut_core::rng;
use ganmut_core::trainer::{train, TrainConfig};
use serde_json::json;

use crate::common::{guard_dir, require_file, usage, Outcome};

#[derive(clap::Args, Debug)]
pub struct Args {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 128)]
    image_size: usize,
    #[arg(long, default_value_t = 10_000)]
    steps: u64,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = LossWeights::default().lambda_cls)]
    lambda_cls: f64,
    #[arg(long, default_value_t = LossWeights::default().lambda_rec)]
    lambda_rec: f64,
    #[arg(long, default_value_t = LossWeights::default().lambda_gp)]
    lambda_gp: f64,
    #[arg(long, default_value_t = LossWeights::default().lambda_info_d)]
    lambda_info_d: f64,
    #[arg(long, default_value_t = LossWeights::default().lambda_info_g)]
    lambda_info_g: f64,
    #[arg(long, default_value_t = LossWeights::default().lambda_rho)]
    lambda_rho: f64,
    /// Discriminator steps per generator step.
    #[arg(long, default_value_t = 5)]
    n_critic: u64,
    #[arg(long, default_value_t = 1e-4)]
    lr_g: f64,
    #[arg(long, default_value_t = 1e-4)]
    lr_d: f64,
    #[arg(long, default_value_t = ModelConfig::default().base_channels)]
    base_channels: usize,
    #[arg(long, default_value_t = ModelConfig::default().num_residual_blocks)]
    residual_blocks: usize,
    /// Checkpoint period in steps; 0 keeps only the initial and final ones.
    #[arg(long, default_value_t = 1000)]
    checkpoint_every: u64,
    /// Random rotation, translation and zoom on every loaded image.
    #[arg(long)]
    augment: bool,
    /// Decode the whole manifest into memory once.
    #[arg(long, conflicts_with = "augment")]
    preload: bool,
    #[arg(long)]
    force: bool,
}

pub fn run(a: Args) -> Outcome {
    let model = ModelConfig {
        image_size: a.image_size,
        base_channels: a.base_channels,
        num_residual_blocks: a.residual_blocks,
        num_labels: 7,
        seed: a.seed,
    };
    model.validate()?;
    let config = TrainConfig {
        total_steps: a.steps,
        n_critic: a.n_critic,
        learning_rate_g: a.lr_g,
        learning_rate_d: a.lr_d,
        weights: LossWeights {
            lambda_cls: a.lambda_cls,
            lambda_rec: a.lambda_rec,
            lambda_gp: a.lambda_gp,
            lambda_info_d: a.lambda_info_d,
            lambda_info_g: a.lambda_info_g,
            lambda_rho: a.lambda_rho,
        },
        batch_size: a.batch_size,
        seed: a.seed,
        checkpoint_every: a.checkpoint_every,
    };
    config.validate()?;
    require_file(&a.manifest, "manifest")?;
    guard_dir(&a.out_dir, a.force)?;

    let manifest = Manifest::read(&a.manifest)?;
    if manifest.is_empty() {
        return Err(usage(format!("manifest {} has no records", a.manifest.display())));
    }
    let counts = manifest.label_counts();
    let records = manifest.len();
    let augment = a.augment.then(Augmentation::default);
    let loader = ManifestLoader::new(manifest, a.image_size, a.batch_size, augment, a.seed)?;
    let mut data: Box<dyn BatchSource> = if a.preload {
        Box::new(loader.into_memory()?)
    } else {
        Box::new(loader)
    };
    log::info!("training on {records} records for {} steps", a.steps);

    let provenance = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "manifest": a.manifest.display().to_string(),
        "records": records,
        "label_counts": counts,
        "augment": a.augment,
        "rng_streams": {
            "seed": a.seed,
            "generator_init": rng::GENERATOR_INIT,
            "discriminator_init": rng::DISCRIMINATOR_INIT,
            "training": rng::TRAINING,
            "loader": rng::LOADER,
        },
        "model": model,
        "train": config,
    });
    let outcome = train(&model, config, DirectionTable::canonical(), data.as_mut(), &a.out_dir)?;
    outcome.trace.write_csv(&a.out_dir.join("trace.csv"))?;

    let mut run = provenance;
    run["checkpoints"] = json!(outcome
        .checkpoints
        .iter()
        .map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect::<Vec<_>>());
    run["directions"] = json!(outcome.state.table.directions());
    let run_path = a.out_dir.join("run.json");
    std::fs::write(
        &run_path,
        serde_json::to_string_pretty(&run).context("encoding run.json")? + "\n",
    )
    .with_context(|| format!("writing {}", run_path.display()))?;
    if let Some(last) = outcome.checkpoints.last() {
        println!("{}", last.display());
    }
    Ok(())
}
