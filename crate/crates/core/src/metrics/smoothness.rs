use ndarray::Axis;

use super::{EmotionClassifier, ImageGenerator};
use crate::emotion_space::{DirectionTable, EmotionCode, EmotionLabel};
use crate::error::{validation, Result};
use crate::networks::ImageBatch;

pub const INTENSITY_STEPS: usize = 10;

/// Below this confidence range a series counts as degenerate.
pub const DEGENERATE_RANGE: f64 = 1e-6;

/// Intensities `0.1, 0.2, ..., 1.0`.
pub fn intensity_ladder() -> [f64; INTENSITY_STEPS] {
    std::array::from_fn(|j| (j + 1) as f64 / INTENSITY_STEPS as f64)
}

/// Classifier confidence of one emotion along the intensity ladder.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfidenceSeries([f64; INTENSITY_STEPS]);

impl ConfidenceSeries {
    pub fn new(scores: &[f64]) -> Result<Self> {
        let scores: [f64; INTENSITY_STEPS] = scores.try_into().map_err(|_| {
            validation(format!(
                "a confidence series has {INTENSITY_STEPS} values, got {}",
                scores.len()
            ))
        })?;
        if scores.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err(validation("confidence values must lie in [0, 1]"));
        }
        Ok(ConfidenceSeries(scores))
    }

    pub fn scores(&self) -> &[f64] {
        &self.0
    }

    /// Largest consecutive jump over the range of the series; 1.0 when the
    /// range is degenerate.
    pub fn smoothness(&self) -> f64 {
        series_smoothness(&self.0)
    }
}

pub fn series_smoothness(scores: &[f64]) -> f64 {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let range = max - min;
    if range.is_nan() || range < DEGENERATE_RANGE {
        return 1.0;
    }
    let jump = scores.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
    jump / range
}

/// Confidence series of `emotion` for each neutral image, generated at the
/// emotion's direction with increasing intensity.
pub fn confidence_series(
    generator: &dyn ImageGenerator,
    table: &DirectionTable,
    classifier: &dyn EmotionClassifier,
    neutral_images: &ImageBatch,
    emotion: EmotionLabel,
) -> Result<Vec<ConfidenceSeries>> {
    let theta = table
        .direction(emotion)
        .ok_or_else(|| validation(format!("label {} has no direction (neutral or unknown)", emotion.id())))?;
    if emotion.id() >= classifier.num_classes() {
        return Err(validation("classifier does not cover the requested emotion"));
    }
    let n = neutral_images.batch_size();
    let mut scores = vec![[0.0; INTENSITY_STEPS]; n];
    for (j, rho) in intensity_ladder().into_iter().enumerate() {
        let codes = vec![EmotionCode::new(theta, rho)?; n];
        let generated = generator.generate_images(neutral_images, &codes)?;
        let probs = classifier.classify(&generated)?;
        for (i, row) in probs.axis_iter(Axis(0)).enumerate() {
            scores[i][j] = row[emotion.id()].clamp(0.0, 1.0);
        }
    }
    scores.iter().map(|s| ConfidenceSeries::new(s)).collect()
}

/// Mean smoothness over the neutral images for one emotion.
pub fn smoothness_score(
    generator: &dyn ImageGenerator,
    table: &DirectionTable,
    classifier: &dyn EmotionClassifier,
    neutral_images: &ImageBatch,
    emotion: EmotionLabel,
) -> Result<f64> {
    if emotion == table.labels().neutral() {
        return Err(validation("smoothness is undefined for the neutral label"));
    }
    let series = confidence_series(generator, table, classifier, neutral_images, emotion)?;
    Ok(series.iter().map(ConfidenceSeries::smoothness).sum::<f64>() / series.len() as f64)
}

/// Per-emotion smoothness for every non-neutral label.
pub fn smoothness_by_emotion(
    generator: &dyn ImageGenerator,
    table: &DirectionTable,
    classifier: &dyn EmotionClassifier,
    neutral_images: &ImageBatch,
) -> Result<Vec<(EmotionLabel, f64)>> {
    table
        .labels()
        .emotions()
        .map(|e| Ok((e, smoothness_score(generator, table, classifier, neutral_images, e)?)))
        .collect()
}

pub fn average_smoothness(
    generator: &dyn ImageGenerator,
    table: &DirectionTable,
    classifier: &dyn EmotionClassifier,
    neutral_images: &ImageBatch,
) -> Result<f64> {
    let scores = smoothness_by_emotion(generator, table, classifier, neutral_images)?;
    Ok(scores.iter().map(|(_, s)| s).sum::<f64>() / scores.len() as f64)
}
