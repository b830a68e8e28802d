use std::collections::BTreeSet;
use std::path::PathBuf;

use ganmut_core::datapipe::{load_batch, Manifest};
use ganmut_core::emotion_space::sample_condition;
use ganmut_core::metrics::{
    discriminator_f1, fed_score, smoothness_by_emotion, EmotionClassifier, FeatureLayer, MetricReport,
    ReferenceClassifier, ReportConfig, DEFAULT_CALIBRATION_FRACTION,
};
use ganmut_core::rng;
use ganmut_core::trainer::{generate_batch, load_checkpoint};
use rand::seq::SliceRandom;
use serde_json::json;

use crate::common::{check_unit, guard_file, require_file, usage, Failure, Outcome};

#[derive(clap::ValueEnum, Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Metric {
    /// Fréchet distance between classifier features of real and generated faces.
    Fed,
    /// Abruptness of classifier confidence along each emotion's intensity ladder.
    Smoothness,
    /// F1 of the trained critic separating real from generated faces.
    DiscF1,
}

impl Metric {
    fn file_stem(self) -> &'static str {
        match self {
            Metric::Fed => "fed",
            Metric::Smoothness => "smoothness",
            Metric::DiscF1 => "disc_f1",
        }
    }
}

#[derive(clap::Args, Debug)]
pub struct Args {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Real faces; neutral records seed the smoothness ladders.
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "fed,smoothness,disc-f1")]
    metrics: Vec<Metric>,
    /// Reference classifier JSON; needed by fed and smoothness.
    #[arg(long)]
    classifier: Option<PathBuf>,
    /// Classifier activations used as FED features.
    #[arg(long)]
    feature_layer: Option<FeatureLayer>,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cap on the real images drawn from the manifest.
    #[arg(long, default_value_t = 500)]
    max_images: usize,
    /// Share of each score set used to place the F1 threshold.
    #[arg(long, default_value_t = DEFAULT_CALIBRATION_FRACTION)]
    calibration_fraction: f64,
    #[arg(long)]
    force: bool,
}

pub fn run(a: Args) -> Outcome {
    let metrics: BTreeSet<Metric> = a.metrics.iter().copied().collect();
    require_file(&a.checkpoint, "checkpoint")?;
    require_file(&a.manifest, "manifest")?;
    check_unit(a.calibration_fraction, "--calibration-fraction")?;
    if a.max_images < 2 {
        return Err(usage("--max-images must be at least 2"));
    }
    let needs_classifier = metrics.contains(&Metric::Fed) || metrics.contains(&Metric::Smoothness);
    let classifier = match (&a.classifier, needs_classifier) {
        (Some(path), true) => {
            require_file(path, "classifier")?;
            let c = ReferenceClassifier::load(path)?;
            Some(match a.feature_layer {
                Some(layer) => c.with_feature_layer(layer),
                None => c,
            })
        }
        (None, true) => return Err(usage("fed and smoothness need --classifier")),
        _ => None,
    };
    for m in &metrics {
        guard_file(&a.out_dir.join(format!("{}.json", m.file_stem())), a.force)?;
    }

    let state = load_checkpoint(&a.checkpoint)?;
    let size = state.model_config().image_size;
    if let Some(c) = &classifier {
        if c.config().image_size != size {
            return Err(usage(format!(
                "classifier expects {}px images but the checkpoint works at {size}px",
                c.config().image_size
            )));
        }
    }
    let manifest = Manifest::read(&a.manifest)?;
    if manifest.is_empty() {
        return Err(usage(format!("manifest {} has no records", a.manifest.display())));
    }

    let mut rng = rng::stream(a.seed, rng::EVALUATION);
    let mut indices: Vec<usize> = (0..manifest.len()).collect();
    indices.shuffle(&mut rng);
    indices.truncate(a.max_images);
    let real = load_batch(&manifest, &indices, size, None, &mut rng)?;
    let codes = real
        .labels
        .iter()
        .map(|_| sample_condition(&state.table, None, &mut rng))
        .collect::<Result<Vec<_>, _>>()?;
    let generated = generate_batch(&state.generator, &real.images, &codes, 16)?;
    let n = real.len();
    log::info!("evaluating on {n} real and {n} generated images");

    std::fs::create_dir_all(&a.out_dir)?;
    let provenance = json!({
        "checkpoint": a.checkpoint.display().to_string(),
        "manifest": a.manifest.display().to_string(),
        "step": state.step(),
        "seed": a.seed,
        "rng_stream": rng::EVALUATION,
        "max_images": a.max_images,
    });
    let base = ReportConfig {
        feature_layer: None,
        threshold: None,
        seed: a.seed,
    };
    for metric in metrics {
        let report = match metric {
            Metric::Fed => {
                let c = classifier.as_ref().expect("checked above");
                MetricReport {
                    metric: "fed".into(),
                    value: fed_score(c, &real.images, &generated)?,
                    config: ReportConfig {
                        feature_layer: Some(c.feature_layer()),
                        ..base.clone()
                    },
                    n_real: n,
                    n_generated: n,
                    details: json!({ "provenance": provenance }),
                }
            }
            Metric::Smoothness => {
                let c = classifier.as_ref().expect("checked above");
                let neutral_label = state.table.labels().neutral();
                let neutral: Vec<usize> = real
                    .labels
                    .iter()
                    .enumerate()
                    .filter(|(_, &l)| l == neutral_label)
                    .map(|(i, _)| i)
                    .collect();
                if neutral.is_empty() {
                    return Err(Failure::Usage("smoothness needs neutral faces in the manifest".into()));
                }
                let faces = real.images.select(&neutral)?;
                let scores = smoothness_by_emotion(&state.generator, &state.table, c, &faces)?;
                let value = scores.iter().map(|(_, s)| s).sum::<f64>() / scores.len() as f64;
                let per_emotion: serde_json::Map<_, _> = scores
                    .iter()
                    .map(|(l, s)| (state.table.labels().name(*l).unwrap_or("?").to_string(), json!(s)))
                    .collect();
                MetricReport {
                    metric: "smoothness".into(),
                    value,
                    config: base.clone(),
                    n_real: faces.batch_size(),
                    n_generated: faces.batch_size() * 10 * scores.len(),
                    details: json!({ "per_emotion": per_emotion, "provenance": provenance }),
                }
            }
            Metric::DiscF1 => {
                let r = discriminator_f1(
                    &state.discriminator,
                    &real.images,
                    &generated,
                    a.calibration_fraction,
                    a.seed,
                )?;
                MetricReport {
                    metric: "disc_f1".into(),
                    value: r.f1_average,
                    config: ReportConfig {
                        threshold: Some(r.threshold),
                        ..base.clone()
                    },
                    n_real: r.n_real,
                    n_generated: r.n_fake,
                    details: json!({
                        "f1_real": r.f1_real,
                        "f1_fake": r.f1_fake,
                        "calibration_fraction": a.calibration_fraction,
                        "provenance": provenance,
                    }),
                }
            }
        };
        let path = a.out_dir.join(format!("{}.json", metric.file_stem()));
        report.write(&path)?;
        println!("{} {}", report.metric, report.value);
    }
    Ok(())
}
