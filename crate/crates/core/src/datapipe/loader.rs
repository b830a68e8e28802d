//! Decoding, normalization, augmentation and shuffled batching.

use std::path::Path;

use image::imageops::FilterType;
use ndarray::{Array3, Array4, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::detector::decode_image;
use super::manifest::Manifest;
use crate::emotion_space::EmotionLabel;
use crate::error::{validation, Error, Result};
use crate::networks::ImageBatch;
use crate::rng;

/// Images with aligned canonical labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub images: ImageBatch,
    pub labels: Vec<EmotionLabel>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Hex SHA-256 over labels and pixel values.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for l in &self.labels {
            h.update((l.id() as u64).to_le_bytes());
        }
        for v in self.images.data().iter() {
            h.update(v.to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub trait BatchSource {
    /// Number of records in one epoch.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn next_batch(&mut self) -> Result<Batch>;
}

/// Random affine jitter applied by inverse mapping with bilinear sampling.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Augmentation {
    pub max_rotation_deg: f64,
    /// Fraction of the image side.
    pub max_translation: f64,
    pub zoom: (f64, f64),
}

impl Default for Augmentation {
    fn default() -> Self {
        Augmentation {
            max_rotation_deg: 10.0,
            max_translation: 0.05,
            zoom: (0.9, 1.1),
        }
    }
}

impl Augmentation {
    pub fn apply<R: Rng + ?Sized>(&self, image: &Array3<f64>, rng: &mut R) -> Array3<f64> {
        let angle = rng
            .gen_range(-self.max_rotation_deg..=self.max_rotation_deg)
            .to_radians();
        let (_, h, w) = image.dim();
        let tx = rng.gen_range(-self.max_translation..=self.max_translation) * w as f64;
        let ty = rng.gen_range(-self.max_translation..=self.max_translation) * h as f64;
        let zoom = rng.gen_range(self.zoom.0..=self.zoom.1);
        warp(image, angle, zoom, tx, ty)
    }
}

/// Rotates by `angle` and scales by `zoom` about the centre, then shifts by
/// `(tx, ty)` pixels. Samples outside the image repeat the border.
pub fn warp(image: &Array3<f64>, angle: f64, zoom: f64, tx: f64, ty: f64) -> Array3<f64> {
    let (c, h, w) = image.dim();
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let (sin, cos) = angle.sin_cos();
    let mut out = Array3::zeros((c, h, w));
    for y in 0..h {
        for x in 0..w {
            let dx = x as f64 - cx - tx;
            let dy = y as f64 - cy - ty;
            let sx = (cos * dx + sin * dy) / zoom + cx;
            let sy = (-sin * dx + cos * dy) / zoom + cy;
            let sx = sx.clamp(0.0, (w - 1) as f64);
            let sy = sy.clamp(0.0, (h - 1) as f64);
            let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
            let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
            for ch in 0..c {
                let top = image[[ch, y0, x0]] * (1.0 - fx) + image[[ch, y0, x1]] * fx;
                let bottom = image[[ch, y1, x0]] * (1.0 - fx) + image[[ch, y1, x1]] * fx;
                out[[ch, y, x]] = top * (1.0 - fy) + bottom * fy;
            }
        }
    }
    out
}

/// Decodes an image, resizes it to `size` x `size` and scales to `[-1, 1]`.
pub fn load_image(path: &Path, size: usize) -> Result<Array3<f64>> {
    let rgb = decode_image(path)?.to_rgb8();
    let rgb = if rgb.width() as usize == size && rgb.height() as usize == size {
        rgb
    } else {
        image::imageops::resize(&rgb, size as u32, size as u32, FilterType::Triangle)
    };
    Ok(Array3::from_shape_fn((3, size, size), |(c, y, x)| {
        rgb.get_pixel(x as u32, y as u32)[c] as f64 / 127.5 - 1.0
    }))
}

fn stack(images: &[Array3<f64>]) -> Result<ImageBatch> {
    let views: Vec<_> = images.iter().map(|a| a.view()).collect();
    let data: Array4<f64> = ndarray::stack(Axis(0), &views).map_err(|e| validation(e.to_string()))?;
    ImageBatch::new(data.mapv(|v| v.clamp(-1.0, 1.0)))
}

/// Loads the given manifest records. Unreadable files are skipped with a
/// warning; an error is returned only when none can be read.
pub fn load_batch<R: Rng + ?Sized>(
    manifest: &Manifest,
    indices: &[usize],
    image_size: usize,
    augment: Option<&Augmentation>,
    rng: &mut R,
) -> Result<Batch> {
    if manifest.is_empty() {
        return Err(validation("manifest is empty"));
    }
    let mut images = Vec::with_capacity(indices.len());
    let mut labels = Vec::with_capacity(indices.len());
    for &i in indices {
        let record = manifest
            .records
            .get(i)
            .ok_or_else(|| validation(format!("record {i} out of range")))?;
        match load_image(&manifest.resolve(record), image_size) {
            Ok(img) => {
                images.push(match augment {
                    Some(a) => a.apply(&img, rng),
                    None => img,
                });
                labels.push(record.label);
            }
            Err(e) => log::warn!("skipping record: {e}"),
        }
    }
    if images.is_empty() {
        return Err(Error::Ingestion {
            path: manifest.root.clone(),
            reason: "no record in the batch could be read".to_string(),
        });
    }
    Ok(Batch {
        images: stack(&images)?,
        labels,
    })
}

/// Endless stream of record indices: one fresh permutation per epoch.
#[derive(Clone, Debug)]
struct EpochOrder {
    order: Vec<usize>,
    cursor: usize,
}

impl EpochOrder {
    fn new(len: usize) -> Self {
        EpochOrder {
            order: (0..len).collect(),
            cursor: len,
        }
    }

    fn next<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize {
        if self.cursor == self.order.len() {
            self.order.shuffle(rng);
            self.cursor = 0;
        }
        self.cursor += 1;
        self.order[self.cursor - 1]
    }
}

/// Preloaded images in `[-1, 1]`, shape `(3, S, S)` each.
#[derive(Clone, Debug)]
pub struct InMemoryLoader {
    images: Vec<Array3<f64>>,
    labels: Vec<EmotionLabel>,
    batch_size: usize,
    augment: Option<Augmentation>,
    order: EpochOrder,
    rng: rng::Rng,
}

impl InMemoryLoader {
    pub fn new(images: Vec<Array3<f64>>, labels: Vec<EmotionLabel>, batch_size: usize, seed: u64) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(validation("images and labels differ in count"));
        }
        if batch_size == 0 {
            return Err(validation("batch_size must be positive"));
        }
        let order = EpochOrder::new(images.len());
        Ok(InMemoryLoader {
            images,
            labels,
            batch_size,
            augment: None,
            order,
            rng: rng::stream(seed, rng::LOADER),
        })
    }

    pub fn with_augmentation(mut self, augment: Augmentation) -> Self {
        self.augment = Some(augment);
        self
    }

    pub fn images(&self) -> &[Array3<f64>] {
        &self.images
    }

    pub fn labels(&self) -> &[EmotionLabel] {
        &self.labels
    }
}

impl BatchSource for InMemoryLoader {
    fn len(&self) -> usize {
        self.images.len()
    }

    fn next_batch(&mut self) -> Result<Batch> {
        if self.images.is_empty() {
            return Err(validation("dataset is empty"));
        }
        let mut images = Vec::with_capacity(self.batch_size);
        let mut labels = Vec::with_capacity(self.batch_size);
        for _ in 0..self.batch_size {
            let i = self.order.next(&mut self.rng);
            images.push(match &self.augment {
                Some(a) => a.apply(&self.images[i], &mut self.rng),
                None => self.images[i].clone(),
            });
            labels.push(self.labels[i]);
        }
        Ok(Batch {
            images: stack(&images)?,
            labels,
        })
    }
}

/// Streams batches from a manifest, decoding on demand.
#[derive(Clone, Debug)]
pub struct ManifestLoader {
    manifest: Manifest,
    image_size: usize,
    batch_size: usize,
    augment: Option<Augmentation>,
    order: EpochOrder,
    rng: rng::Rng,
}

impl ManifestLoader {
    pub fn new(
        manifest: Manifest,
        image_size: usize,
        batch_size: usize,
        augment: Option<Augmentation>,
        seed: u64,
    ) -> Result<Self> {
        if manifest.is_empty() {
            return Err(validation("manifest is empty"));
        }
        if batch_size == 0 {
            return Err(validation("batch_size must be positive"));
        }
        let order = EpochOrder::new(manifest.len());
        Ok(ManifestLoader {
            manifest,
            image_size,
            batch_size,
            augment,
            order,
            rng: rng::stream(seed, rng::LOADER),
        })
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    /// Decodes every record up front, keeping the loader's settings.
    pub fn into_memory(self) -> Result<InMemoryLoader> {
        let mut images = Vec::with_capacity(self.manifest.len());
        let mut labels = Vec::with_capacity(self.manifest.len());
        for record in &self.manifest.records {
            match load_image(&self.manifest.resolve(record), self.image_size) {
                Ok(img) => {
                    images.push(img);
                    labels.push(record.label);
                }
                Err(e) => log::warn!("skipping record: {e}"),
            }
        }
        if images.is_empty() {
            return Err(Error::Ingestion {
                path: self.manifest.root.clone(),
                reason: "no manifest record could be read".to_string(),
            });
        }
        Ok(InMemoryLoader {
            order: EpochOrder::new(images.len()),
            images,
            labels,
            batch_size: self.batch_size,
            augment: self.augment,
            rng: self.rng,
        })
    }
}

impl BatchSource for ManifestLoader {
    fn len(&self) -> usize {
        self.manifest.len()
    }

    fn next_batch(&mut self) -> Result<Batch> {
        let mut images = Vec::with_capacity(self.batch_size);
        let mut labels = Vec::with_capacity(self.batch_size);
        let mut failures = 0;
        while images.len() < self.batch_size {
            let i = self.order.next(&mut self.rng);
            let record = &self.manifest.records[i];
            match load_image(&self.manifest.resolve(record), self.image_size) {
                Ok(img) => {
                    images.push(match &self.augment {
                        Some(a) => a.apply(&img, &mut self.rng),
                        None => img,
                    });
                    labels.push(record.label);
                }
                Err(e) => {
                    log::warn!("skipping record: {e}");
                    failures += 1;
                    if failures >= self.manifest.len() {
                        return Err(Error::Ingestion {
                            path: self.manifest.root.clone(),
                            reason: "no manifest record could be read".to_string(),
                        });
                    }
                }
            }
        }
        Ok(Batch {
            images: stack(&images)?,
            labels,
        })
    }
}
