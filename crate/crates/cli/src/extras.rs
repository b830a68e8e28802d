use std::path::PathBuf;

use ganmut_core::datapipe::{load_batch, Augmentation, BatchSource, Manifest, ManifestLoader};
use ganmut_core::metrics::{ClassifierConfig, FeatureLayer, ReferenceClassifier};
use ganmut_core::rng;
use ganmut_core::synthetic::{write_synthetic_dataset, SyntheticConfig};

use crate::common::{guard_dir, guard_file, require_file, usage, Outcome};

#[derive(clap::Args, Debug)]
pub struct ClassifierArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Classifier JSON.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 128)]
    image_size: usize,
    #[arg(long, default_value_t = 2000)]
    steps: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = ClassifierConfig::default().channels)]
    channels: usize,
    #[arg(long, default_value_t = ClassifierConfig::default().hidden)]
    hidden: usize,
    /// Activations later used as FED features.
    #[arg(long, default_value_t = FeatureLayer::Penultimate)]
    feature_layer: FeatureLayer,
    #[arg(long)]
    augment: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    force: bool,
}

pub fn train_classifier(a: ClassifierArgs) -> Outcome {
    require_file(&a.manifest, "manifest")?;
    if a.steps == 0 {
        return Err(usage("--steps must be positive"));
    }
    if !(a.lr.is_finite() && a.lr > 0.0) {
        return Err(usage("--lr must be a positive number"));
    }
    let mut classifier = ReferenceClassifier::new(ClassifierConfig {
        image_size: a.image_size,
        num_classes: 7,
        channels: a.channels,
        hidden: a.hidden,
        seed: a.seed,
    })?
    .with_feature_layer(a.feature_layer);
    guard_file(&a.out, a.force)?;

    let manifest = Manifest::read(&a.manifest)?;
    if manifest.is_empty() {
        return Err(usage(format!("manifest {} has no records", a.manifest.display())));
    }
    let augment = a.augment.then(Augmentation::default);
    let mut loader = ManifestLoader::new(manifest.clone(), a.image_size, a.batch_size, augment, a.seed)?;
    log::info!("fitting classifier on {} records for {} steps", loader.len(), a.steps);
    let losses = classifier.fit(&mut loader, a.steps, a.lr)?;

    let mut rng = rng::stream(a.seed, rng::CLASSIFIER);
    let probe: Vec<usize> = (0..manifest.len().min(512)).collect();
    let batch = load_batch(&manifest, &probe, a.image_size, None, &mut rng)?;
    let accuracy = classifier.accuracy(&batch.images, &batch.labels)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    classifier.save(&a.out)?;
    println!(
        "final_loss={:.4} train_accuracy={accuracy:.4}",
        losses.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

#[derive(clap::Args, Debug)]
pub struct SynthArgs {
    /// Receives `images/` and `manifest.csv`.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = SyntheticConfig::default().count)]
    count: usize,
    #[arg(long, default_value_t = SyntheticConfig::default().image_size)]
    image_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    force: bool,
}

pub fn synth(a: SynthArgs) -> Outcome {
    if a.count == 0 {
        return Err(usage("--count must be positive"));
    }
    guard_dir(&a.out_dir, a.force)?;
    let manifest = write_synthetic_dataset(
        &SyntheticConfig {
            count: a.count,
            image_size: a.image_size,
            seed: a.seed,
        },
        &a.out_dir,
    )?;
    println!("{}", manifest.display());
    Ok(())
}
