//! Procedural cartoon faces with three expressions: a smile (happiness), a
//! frown with lowered brows (sadness) and a flat mouth (neutral).

use std::path::{Path, PathBuf};

use ndarray::Array3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datapipe::{write_manifest, InMemoryLoader, ManifestRecord};
use crate::emotion_space::EmotionLabel;
use crate::error::{validation, Result};
use crate::render::to_rgb_image;
use crate::rng;

pub const SYNTHETIC_LABELS: [EmotionLabel; 3] = [EmotionLabel::HAPPINESS, EmotionLabel::SADNESS, EmotionLabel::NEUTRAL];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub count: usize,
    pub image_size: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            count: 600,
            image_size: 16,
            seed: 0,
        }
    }
}

fn mouth_offset(label: EmotionLabel, dx: f64) -> f64 {
    match label {
        EmotionLabel::HAPPINESS => 0.05 - 5.0 * dx * dx,
        EmotionLabel::SADNESS => -0.04 + 5.0 * dx * dx,
        _ => 0.0,
    }
}

/// One face in `[-1, 1]`, shape `(3, size, size)`.
pub fn render_face<R: Rng + ?Sized>(label: EmotionLabel, size: usize, rng: &mut R) -> Array3<f64> {
    let background = rng.gen_range(-0.9..-0.5);
    let skin = [
        rng.gen_range(0.4..0.8),
        rng.gen_range(0.1..0.4),
        rng.gen_range(-0.2..0.1),
    ];
    let cx = 0.5 + rng.gen_range(-0.03..0.03);
    let cy = 0.5 + rng.gen_range(-0.03..0.03);
    let radius = rng.gen_range(0.38..0.44);
    let brow_tilt = if label == EmotionLabel::SADNESS { 0.6 } else { 0.0 };
    let noise: f64 = 0.03;

    let mut img = Array3::zeros((3, size, size));
    let px = 1.0 / size as f64;
    for y in 0..size {
        for x in 0..size {
            let u = (x as f64 + 0.5) * px;
            let v = (y as f64 + 0.5) * px;
            let (dx, dy) = (u - cx, v - cy);
            let mut colour: [f64; 3] = [background; 3];
            if dx * dx + dy * dy <= radius * radius {
                colour = skin;
                let eye_dy = dy + 0.1;
                let in_eye = [-0.14, 0.14]
                    .iter()
                    .any(|ex| (dx - ex).powi(2) + eye_dy * eye_dy <= 0.055 * 0.055);
                let brow = [-0.14f64, 0.14].iter().any(|&ex| {
                    let local = dx - ex;
                    let line = -0.2 + brow_tilt * local * ex.signum();
                    local.abs() <= 0.08 && (dy - line).abs() <= px * 0.6
                });
                let in_mouth = dx.abs() <= 0.2 && (dy - 0.17 + mouth_offset(label, dx)).abs() <= 0.045;
                if in_eye || in_mouth || brow {
                    colour = [-0.95, -0.95, -0.9];
                }
            }
            for (c, value) in colour.iter().enumerate() {
                img[[c, y, x]] = (value + rng.gen_range(-noise..noise)).clamp(-1.0, 1.0);
            }
        }
    }
    img
}

/// Balanced images and labels, cycling through [`SYNTHETIC_LABELS`].
pub fn synthetic_dataset(config: &SyntheticConfig) -> Result<(Vec<Array3<f64>>, Vec<EmotionLabel>)> {
    if config.count == 0 || config.image_size < 8 {
        return Err(validation("synthetic dataset needs count > 0 and image_size >= 8"));
    }
    let mut rng = rng::stream(config.seed, rng::SYNTHETIC);
    let labels: Vec<EmotionLabel> = (0..config.count)
        .map(|i| SYNTHETIC_LABELS[i % SYNTHETIC_LABELS.len()])
        .collect();
    let images = labels
        .iter()
        .map(|&l| render_face(l, config.image_size, &mut rng))
        .collect();
    Ok((images, labels))
}

pub fn synthetic_loader(config: &SyntheticConfig, batch_size: usize, seed: u64) -> Result<InMemoryLoader> {
    let (images, labels) = synthetic_dataset(config)?;
    InMemoryLoader::new(images, labels, batch_size, seed)
}

/// Writes the dataset as PNG files under `dir/images` plus `dir/manifest.csv`.
/// Returns the manifest path.
pub fn write_synthetic_dataset(config: &SyntheticConfig, dir: &Path) -> Result<PathBuf> {
    let (images, labels) = synthetic_dataset(config)?;
    let image_dir = dir.join("images");
    std::fs::create_dir_all(&image_dir)?;
    let mut records = Vec::with_capacity(images.len());
    for (i, (img, label)) in images.iter().zip(&labels).enumerate() {
        let name = format!("{i:05}.png");
        to_rgb_image(img).save(image_dir.join(&name))?;
        records.push(ManifestRecord {
            path: format!("images/{name}"),
            label: *label,
        });
    }
    let manifest = dir.join("manifest.csv");
    write_manifest(&manifest, &records)?;
    Ok(manifest)
}
