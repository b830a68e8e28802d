//! Small convolutional emotion classifier used as the reference plugin for
//! the metrics.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ganmut_autograd::{grad, no_grad, Tensor};
use ndarray::{Array2, ArrayD, Ix2, IxDyn};
use serde::{Deserialize, Serialize};

use super::EmotionClassifier;
use crate::datapipe::BatchSource;
use crate::emotion_space::EmotionLabel;
use crate::error::{config, validation, Error, Result};
use crate::losses::classification_loss;
use crate::networks::layers::{Conv2d, Linear};
use crate::networks::{ImageBatch, ParamStore, SUPPORTED_SIZES};
use crate::rng;
use crate::trainer::{Adam, AdamConfig};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureLayer {
    /// Activations of the hidden dense layer.
    #[default]
    Penultimate,
    /// Spatially pooled activations of the last convolution.
    LastConv,
}

impl fmt::Display for FeatureLayer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureLayer::Penultimate => "penultimate",
            FeatureLayer::LastConv => "last-conv",
        })
    }
}

impl FromStr for FeatureLayer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "penultimate" | "dense" => Ok(FeatureLayer::Penultimate),
            "last-conv" | "conv" => Ok(FeatureLayer::LastConv),
            _ => Err(config(format!("unknown feature layer `{s}` (penultimate, last-conv)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub image_size: usize,
    pub num_classes: usize,
    pub channels: usize,
    pub hidden: usize,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            image_size: 128,
            num_classes: 7,
            channels: 8,
            hidden: 32,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ReferenceClassifier {
    config: ClassifierConfig,
    feature_layer: FeatureLayer,
    params: ParamStore,
    conv1: Conv2d,
    conv2: Conv2d,
    hidden: Linear,
    out: Linear,
}

struct Activations {
    pooled: Tensor,
    hidden: Tensor,
    logits: Tensor,
}

#[derive(Serialize, Deserialize)]
struct SavedParam {
    name: String,
    shape: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SavedClassifier {
    config: ClassifierConfig,
    feature_layer: FeatureLayer,
    params: Vec<SavedParam>,
}

impl ReferenceClassifier {
    pub fn new(cfg: ClassifierConfig) -> Result<Self> {
        if !SUPPORTED_SIZES.contains(&cfg.image_size) {
            return Err(config(format!("unsupported image size {}", cfg.image_size)));
        }
        if cfg.num_classes < 2 || cfg.channels == 0 || cfg.hidden == 0 {
            return Err(config("classifier needs >= 2 classes and non-empty layers"));
        }
        let mut rng = rng::stream(cfg.seed, rng::CLASSIFIER);
        let mut p = ParamStore::new();
        let c = cfg.channels;
        let conv1 = Conv2d::new(&mut p, "conv1", 3, c, 3, 2, 1, true, &mut rng);
        let conv2 = Conv2d::new(&mut p, "conv2", c, 2 * c, 3, 2, 1, true, &mut rng);
        let hidden = Linear::new(&mut p, "hidden", 2 * c, cfg.hidden, &mut rng);
        let out = Linear::new(&mut p, "out", cfg.hidden, cfg.num_classes, &mut rng);
        Ok(ReferenceClassifier {
            config: cfg,
            feature_layer: FeatureLayer::default(),
            params: p,
            conv1,
            conv2,
            hidden,
            out,
        })
    }

    pub fn with_feature_layer(mut self, layer: FeatureLayer) -> Self {
        self.feature_layer = layer;
        self
    }

    pub fn config(&self) -> &ClassifierConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    fn activations(&self, x: &Tensor) -> Activations {
        let p = &self.params;
        let x = self.conv1.forward(p, x).leaky_relu(0.1);
        let x = self.conv2.forward(p, &x).leaky_relu(0.1);
        let pooled = x.mean_axes(&[2, 3], false);
        let hidden = self.hidden.forward(p, &pooled).relu();
        let logits = self.out.forward(p, &hidden);
        Activations { pooled, hidden, logits }
    }

    fn check(&self, images: &ImageBatch) -> Result<()> {
        if images.image_size() != self.config.image_size {
            return Err(validation(format!(
                "classifier expects {}px images, got {}px",
                self.config.image_size,
                images.image_size()
            )));
        }
        Ok(())
    }

    /// Logits `(B, M)` without gradient tracking.
    pub fn logits(&self, images: &ImageBatch) -> Result<Array2<f64>> {
        self.check(images)?;
        let logits = no_grad(|| self.activations(&images.to_tensor()).logits);
        Ok(to_2d(&logits))
    }

    /// Fraction of images whose arg-max class matches the label.
    pub fn accuracy(&self, images: &ImageBatch, labels: &[EmotionLabel]) -> Result<f64> {
        if labels.len() != images.batch_size() {
            return Err(validation("labels and images differ in count"));
        }
        let logits = self.logits(images)?;
        let hits = logits
            .rows()
            .into_iter()
            .zip(labels)
            .filter(|(row, l)| argmax(row.as_slice().expect("row")) == l.id())
            .count();
        Ok(hits as f64 / labels.len() as f64)
    }

    /// Cross-entropy training with Adam. Returns the loss of every step.
    pub fn fit(&mut self, data: &mut dyn BatchSource, steps: usize, learning_rate: f64) -> Result<Vec<f64>> {
        let mut opt = Adam::for_tensors(AdamConfig::with_learning_rate(learning_rate), self.params.tensors());
        let mut history = Vec::with_capacity(steps);
        for _ in 0..steps {
            let batch = data.next_batch()?;
            self.check(&batch.images)?;
            if let Some(l) = batch.labels.iter().find(|l| l.id() >= self.config.num_classes) {
                return Err(validation(format!("label {} out of range", l.id())));
            }
            let logits = self.activations(&batch.images.to_tensor()).logits;
            let loss = classification_loss(&logits, &batch.labels);
            if !loss.all_finite() {
                return Err(Error::NonFinite {
                    term: "classifier".to_string(),
                    step: history.len() as u64,
                    diagnostic: format!("loss={}", loss.item()),
                });
            }
            let inputs: Vec<&Tensor> = self.params.tensors().iter().collect();
            let grads = grad(&loss, &inputs, false);
            let updated = opt.update(self.params.tensors(), &grads)?;
            for (i, v) in updated.into_iter().enumerate() {
                self.params.set(i, v)?;
            }
            history.push(loss.item());
        }
        Ok(history)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let saved = SavedClassifier {
            config: self.config.clone(),
            feature_layer: self.feature_layer,
            params: self
                .params
                .iter()
                .map(|(name, t)| SavedParam {
                    name: name.to_string(),
                    shape: t.shape().to_vec(),
                    values: t.to_vec(),
                })
                .collect(),
        };
        std::fs::write(path, serde_json::to_vec(&saved)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let saved: SavedClassifier = serde_json::from_slice(&std::fs::read(path)?)?;
        let mut model = ReferenceClassifier::new(saved.config)?.with_feature_layer(saved.feature_layer);
        if saved.params.len() != model.params.len() {
            return Err(validation(format!("{}: wrong number of parameters", path.display())));
        }
        for (i, p) in saved.params.into_iter().enumerate() {
            if p.name != model.params.names()[i] {
                return Err(validation(format!(
                    "{}: unexpected parameter `{}`",
                    path.display(),
                    p.name
                )));
            }
            let data = ArrayD::from_shape_vec(IxDyn(&p.shape), p.values)
                .map_err(|e| validation(format!("parameter `{}`: {e}", p.name)))?;
            model.params.set(i, data)?;
        }
        Ok(model)
    }
}

fn to_2d(t: &Tensor) -> Array2<f64> {
    t.data().clone().into_dimensionality::<Ix2>().expect("2-D activations")
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    row.iter()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |best, (i, &v)| if v > best.1 { (i, v) } else { best },
        )
        .0
}

impl EmotionClassifier for ReferenceClassifier {
    fn num_classes(&self) -> usize {
        self.config.num_classes
    }

    fn classify(&self, images: &ImageBatch) -> Result<Array2<f64>> {
        let logits = self.logits(images)?;
        Ok(softmax_rows(&logits))
    }

    fn extract_features(&self, images: &ImageBatch) -> Result<Array2<f64>> {
        self.check(images)?;
        let act = no_grad(|| self.activations(&images.to_tensor()));
        Ok(match self.feature_layer {
            FeatureLayer::Penultimate => to_2d(&act.hidden),
            FeatureLayer::LastConv => to_2d(&act.pooled),
        })
    }

    fn feature_layer(&self) -> String {
        self.feature_layer.to_string()
    }
}

/// Row-wise softmax, stable for large logits.
pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let total = row.sum();
        row.mapv_inplace(|v| v / total);
    }
    out
}
