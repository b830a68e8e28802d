use std::time::Instant;

use ganmut_core::emotion_space::{draw_condition, DirectionTable, EmotionCode, EmotionLabel};
use ganmut_core::metrics::{discriminator_f1, MetricReport, ReportConfig, DEFAULT_CALIBRATION_FRACTION};
use ganmut_core::networks::{ImageBatch, ModelConfig};
use ganmut_core::synthetic::{synthetic_dataset, synthetic_loader, SyntheticConfig};
use ganmut_core::trainer::{generate_batch, train, TrainConfig, TrainOutcome};
use ndarray::{stack, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{ensure, Context, Outcome};

const DATASET: usize = 600;
const STEPS: u64 = 2000;
const BATCH: usize = 16;
const SEED: u64 = 0;
const HELD_OUT: usize = 120;
const TIME_LIMIT: f64 = 600.0;

/// Artifacts of one smoke run kept for the determinism check.
pub struct SmokeRun {
    pub trace_csv: String,
    pub final_checkpoint: Vec<u8>,
    pub seconds: f64,
}

fn model() -> ModelConfig {
    ModelConfig {
        image_size: 16,
        base_channels: 8,
        num_residual_blocks: 3,
        num_labels: 7,
        seed: SEED,
    }
}

fn config() -> TrainConfig {
    TrainConfig {
        total_steps: STEPS,
        n_critic: 5,
        learning_rate_g: 1e-4,
        learning_rate_d: 1e-4,
        batch_size: BATCH,
        seed: SEED,
        checkpoint_every: 0,
        ..TrainConfig::default()
    }
}

fn smoke_train() -> Result<(TrainOutcome, SmokeRun), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = SyntheticConfig {
        count: DATASET,
        image_size: 16,
        seed: SEED,
    };
    let mut loader = synthetic_loader(&data, BATCH, SEED).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let outcome =
        train(&model(), config(), DirectionTable::canonical(), &mut loader, dir.path()).map_err(|e| e.to_string())?;
    let seconds = start.elapsed().as_secs_f64();
    let last = outcome.checkpoints.last().ok_or("no checkpoint written")?;
    let final_checkpoint = std::fs::read(last).map_err(|e| e.to_string())?;
    let run = SmokeRun {
        trace_csv: outcome.trace.to_csv(),
        final_checkpoint,
        seconds,
    };
    Ok((outcome, run))
}

fn epoch_means(series: &[(u64, f64)], iterations_per_epoch: u64) -> (f64, f64) {
    let mean = |it: Vec<f64>| it.iter().sum::<f64>() / it.len() as f64;
    let first = mean(
        series
            .iter()
            .filter(|(s, _)| *s < iterations_per_epoch)
            .map(|p| p.1)
            .collect(),
    );
    let last = mean(
        series
            .iter()
            .filter(|(s, _)| *s >= STEPS - iterations_per_epoch)
            .map(|p| p.1)
            .collect(),
    );
    (first, last)
}

fn held_out() -> Result<(ImageBatch, Vec<EmotionLabel>), String> {
    let (images, labels) = synthetic_dataset(&SyntheticConfig {
        count: HELD_OUT,
        image_size: 16,
        seed: 1,
    })
    .map_err(|e| e.to_string())?;
    let views: Vec<_> = images.iter().map(|a| a.view()).collect();
    let batch = ImageBatch::new(stack(Axis(0), &views).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    Ok((batch, labels))
}

pub fn run_smoke(ctx: &mut Context) -> Outcome {
    let (outcome, run) = smoke_train()?;
    let mut notes = vec![format!("{STEPS} steps in {:.0}s", run.seconds)];
    ensure!(
        run.seconds <= TIME_LIMIT,
        "training took {:.0}s (limit {TIME_LIMIT}s)",
        run.seconds
    );

    let trace = &outcome.trace;
    ensure!(trace.len() as u64 == STEPS, "trace has {} records", trace.len());
    for record in &trace.records {
        for (name, value) in record.losses.entries() {
            ensure!(value.is_finite(), "(a) {name} is {value} at step {}", record.step);
        }
    }
    notes.push("(a) all losses finite".into());

    let per_epoch = (DATASET as u64).div_ceil(BATCH as u64);
    for term in ["d_info", "g_info"] {
        let (first, last) = epoch_means(&trace.series(term), per_epoch);
        ensure!(
            last < first,
            "(b) {term} final-epoch mean {last:.4} >= first-epoch mean {first:.4}"
        );
        notes.push(format!("(b) {term} {first:.4} -> {last:.4}"));
    }

    let state = &outcome.state;
    let (images, _) = held_out()?;
    let theta = state
        .table
        .direction(EmotionLabel::HAPPINESS)
        .ok_or("happiness has no direction")?;
    let n = images.batch_size();
    let along = vec![EmotionCode::new(theta, 1.0).map_err(|e| e.to_string())?; n];
    let opposite = vec![EmotionCode::new(theta + std::f64::consts::PI, 1.0).map_err(|e| e.to_string())?; n];
    let a = generate_batch(&state.generator, &images, &along, 32).map_err(|e| e.to_string())?;
    let b = generate_batch(&state.generator, &images, &opposite, 32).map_err(|e| e.to_string())?;
    let diff = (a.data() - b.data()).mapv(f64::abs).mean().unwrap_or(0.0);
    ensure!(diff > 0.05, "(c) opposite directions differ by only {diff:.4}");
    notes.push(format!("(c) opposite-direction diff {diff:.3}"));

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let codes: Vec<EmotionCode> = (0..n)
        .map(|_| draw_condition(&state.table, None, &mut rng).map(|d| d.code))
        .collect::<ganmut_core::Result<_>>()
        .map_err(|e| e.to_string())?;
    let generated = generate_batch(&state.generator, &images, &codes, 32).map_err(|e| e.to_string())?;
    let report = discriminator_f1(
        &state.discriminator,
        &images,
        &generated,
        DEFAULT_CALIBRATION_FRACTION,
        SEED,
    )
    .map_err(|e| e.to_string())?;
    let metric = MetricReport {
        metric: "disc_f1".into(),
        value: report.f1_average,
        config: ReportConfig {
            feature_layer: None,
            threshold: Some(report.threshold),
            seed: SEED,
        },
        n_real: n,
        n_generated: n,
        details: serde_json::to_value(&report).map_err(|e| e.to_string())?,
    };
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("disc_f1.json");
    metric.write(&path).map_err(|e| e.to_string())?;
    let back = MetricReport::read(&path).map_err(|e| e.to_string())?;
    ensure!(back == metric, "(d) report did not survive a roundtrip");
    for (name, v) in [
        ("f1_real", report.f1_real),
        ("f1_fake", report.f1_fake),
        ("f1_average", report.f1_average),
    ] {
        ensure!((0.0..=1.0).contains(&v), "(d) {name} = {v} outside [0, 1]");
    }
    notes.push(format!(
        "(d) F1 real {:.3} fake {:.3} avg {:.3}",
        report.f1_real, report.f1_fake, report.f1_average
    ));

    ctx.smoke = Some(run);
    Ok(notes.join("; "))
}

pub fn run_determinism(ctx: &mut Context) -> Outcome {
    let first = match ctx.smoke.take() {
        Some(run) => run,
        None => smoke_train()?.1,
    };
    let (_, second) = smoke_train()?;
    ensure!(!first.trace_csv.is_empty(), "empty trace");
    if first.trace_csv != second.trace_csv {
        let line = first
            .trace_csv
            .lines()
            .zip(second.trace_csv.lines())
            .position(|(a, b)| a != b)
            .unwrap_or(0);
        return Err(format!("trace CSVs diverge at line {line}"));
    }
    ensure!(
        first.final_checkpoint == second.final_checkpoint,
        "final checkpoints differ"
    );
    Ok(format!(
        "trace CSVs byte-identical ({} bytes), final checkpoints identical",
        first.trace_csv.len()
    ))
}
