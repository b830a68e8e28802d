//! Evaluation metrics: Fréchet emotion distance, interpolation smoothness
//! and critic F1.

mod classifier;
mod f1;
mod frechet;
mod smoothness;

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::emotion_space::EmotionCode;
use crate::error::Result;
use crate::networks::{Generator, ImageBatch};

pub use classifier::{softmax_rows, ClassifierConfig, FeatureLayer, ReferenceClassifier};
pub use f1::{discriminator_f1, f1, f1_at_threshold, f1_from_scores, Critic, F1Report, DEFAULT_CALIBRATION_FRACTION};
pub use frechet::{feature_stats, fed_score, frechet_distance, FeatureStats};
pub use smoothness::{
    average_smoothness, confidence_series, intensity_ladder, series_smoothness, smoothness_by_emotion,
    smoothness_score, ConfidenceSeries, DEGENERATE_RANGE, INTENSITY_STEPS,
};

/// Emotion recognizer plugged into the metrics.
pub trait EmotionClassifier {
    fn num_classes(&self) -> usize;

    /// Class probabilities `(B, M)`; rows sum to one.
    fn classify(&self, images: &ImageBatch) -> Result<Array2<f64>>;

    /// Feature vectors `(B, d)` used for the Fréchet distance.
    fn extract_features(&self, images: &ImageBatch) -> Result<Array2<f64>>;

    fn feature_layer(&self) -> String {
        "penultimate".to_string()
    }
}

/// Image translation under emotion codes.
pub trait ImageGenerator {
    fn generate_images(&self, images: &ImageBatch, codes: &[EmotionCode]) -> Result<ImageBatch>;
}

impl ImageGenerator for Generator {
    fn generate_images(&self, images: &ImageBatch, codes: &[EmotionCode]) -> Result<ImageBatch> {
        crate::trainer::generate_batch(self, images, codes, 32)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub feature_layer: Option<String>,
    pub threshold: Option<f64>,
    pub seed: u64,
}

/// One metric result as written to disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: String,
    pub value: f64,
    pub config: ReportConfig,
    pub n_real: usize,
    pub n_generated: usize,
    /// Metric-specific breakdown.
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub details: serde_json::Value,
}

impl MetricReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
