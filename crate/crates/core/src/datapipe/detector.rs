//! Face detectors behind a small client interface.
//!
//! Real detectors run as external programs: the program receives the image
//! path as its last argument and prints one JSON object per detection,
//! `{"bbox":[x,y,w,h],"confidence":p,"landmarks":[[x,y],...]}`. Empty output
//! with exit status 0 means no faces.

use std::path::{Path, PathBuf};
use std::process::Command;

use image::DynamicImage;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    /// `(x, y, w, h)` in pixels.
    pub bbox: [f64; 4],
    pub confidence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landmarks: Option<Vec<[f64; 2]>>,
}

impl Detection {
    pub fn new(bbox: [f64; 4], confidence: f64) -> Self {
        Detection {
            bbox,
            confidence,
            landmarks: None,
        }
    }

    /// Integer pixel rectangle `(x0, y0, x1, y1)` covering the box.
    pub fn pixel_rect(&self) -> (u32, u32, u32, u32) {
        let [x, y, w, h] = self.bbox;
        (
            x.floor().max(0.0) as u32,
            y.floor().max(0.0) as u32,
            (x + w).ceil().max(0.0) as u32,
            (y + h).ceil().max(0.0) as u32,
        )
    }

    /// Clips the box to a `width` x `height` image. Returns `None` when
    /// nothing of it is left.
    pub fn clamped(mut self, width: u32, height: u32) -> Option<Self> {
        let [x, y, w, h] = self.bbox;
        let x0 = x.clamp(0.0, width as f64);
        let y0 = y.clamp(0.0, height as f64);
        let x1 = (x + w).clamp(0.0, width as f64);
        let y1 = (y + h).clamp(0.0, height as f64);
        if !(x1 > x0 && y1 > y0) {
            return None;
        }
        self.bbox = [x0, y0, x1 - x0, y1 - y0];
        Some(self)
    }
}

pub trait DetectorBackend: Send + Sync {
    fn name(&self) -> &str;

    /// Raw detections in any order.
    fn raw_detect(&self, path: &Path, image: &DynamicImage) -> Result<Vec<Detection>>;
}

/// Treats the whole frame as one face with confidence 1. Useful for
/// pre-cropped datasets and tests.
#[derive(Clone, Copy, Debug, Default)]
pub struct WholeFrame;

impl DetectorBackend for WholeFrame {
    fn name(&self) -> &str {
        "whole-frame"
    }

    fn raw_detect(&self, _path: &Path, image: &DynamicImage) -> Result<Vec<Detection>> {
        let bbox = [0.0, 0.0, image.width() as f64, image.height() as f64];
        Ok(vec![Detection::new(bbox, 1.0)])
    }
}

/// Returns the same detections for every image.
#[derive(Clone, Debug, Default)]
pub struct FixedDetections(pub Vec<Detection>);

impl DetectorBackend for FixedDetections {
    fn name(&self) -> &str {
        "fixed"
    }

    fn raw_detect(&self, _path: &Path, _image: &DynamicImage) -> Result<Vec<Detection>> {
        Ok(self.0.clone())
    }
}

#[derive(Clone, Debug)]
pub struct ExternalCommand {
    name: String,
    program: PathBuf,
    args: Vec<String>,
}

impl ExternalCommand {
    pub fn new(program: impl Into<PathBuf>, args: Vec<String>) -> Self {
        let program = program.into();
        let name = program
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "external".to_string());
        ExternalCommand { name, program, args }
    }

    fn fail(&self, reason: impl Into<String>) -> Error {
        Error::Detector {
            name: self.name.clone(),
            reason: reason.into(),
        }
    }
}

pub fn parse_detections(output: &str) -> std::result::Result<Vec<Detection>, String> {
    output
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| format!("bad detection line `{l}`: {e}")))
        .collect()
}

impl DetectorBackend for ExternalCommand {
    fn name(&self) -> &str {
        &self.name
    }

    fn raw_detect(&self, path: &Path, _image: &DynamicImage) -> Result<Vec<Detection>> {
        let out = Command::new(&self.program)
            .args(&self.args)
            .arg(path)
            .output()
            .map_err(|e| self.fail(format!("cannot run {}: {e}", self.program.display())))?;
        if !out.status.success() {
            return Err(self.fail(format!(
                "exited with {}: {}",
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        let stdout = String::from_utf8(out.stdout).map_err(|_| self.fail("output is not UTF-8"))?;
        parse_detections(&stdout).map_err(|e| self.fail(e))
    }
}

pub struct DetectorClient {
    backend: Box<dyn DetectorBackend>,
    min_confidence: f64,
}

impl std::fmt::Debug for DetectorClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DetectorClient")
            .field("name", &self.backend.name())
            .field("min_confidence", &self.min_confidence)
            .finish()
    }
}

impl DetectorClient {
    pub fn new(backend: Box<dyn DetectorBackend>, min_confidence: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&min_confidence) {
            return Err(config(format!("min_confidence {min_confidence} is outside [0, 1]")));
        }
        Ok(DetectorClient {
            backend,
            min_confidence,
        })
    }

    pub fn whole_frame() -> Self {
        DetectorClient {
            backend: Box::new(WholeFrame),
            min_confidence: 0.0,
        }
    }

    pub fn name(&self) -> &str {
        self.backend.name()
    }

    pub fn min_confidence(&self) -> f64 {
        self.min_confidence
    }

    /// Detections at or above `min_confidence`, clipped to the image and
    /// sorted by decreasing confidence.
    pub fn detect(&self, path: &Path, image: &DynamicImage) -> Result<Vec<Detection>> {
        let raw = self.backend.raw_detect(path, image)?;
        let mut kept = Vec::with_capacity(raw.len());
        for d in raw {
            if !(0.0..=1.0).contains(&d.confidence) {
                return Err(Error::Detector {
                    name: self.name().to_string(),
                    reason: format!("confidence {} is outside [0, 1]", d.confidence),
                });
            }
            if d.confidence < self.min_confidence {
                continue;
            }
            if let Some(d) = d.clamped(image.width(), image.height()) {
                kept.push(d);
            }
        }
        kept.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
        Ok(kept)
    }
}

/// The most confident face in the image at `path`, if any passes the
/// client's threshold.
pub fn detect_primary_face(client: &DetectorClient, path: &Path) -> Result<Option<Detection>> {
    let image = decode_image(path)?;
    Ok(client.detect(path, &image)?.into_iter().next())
}

pub(crate) fn decode_image(path: &Path) -> Result<DynamicImage> {
    image::open(path).map_err(|e| Error::Ingestion {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

pub fn crop(image: &DynamicImage, detection: &Detection) -> DynamicImage {
    let (x0, y0, x1, y1) = detection.pixel_rect();
    let x1 = x1.min(image.width());
    let y1 = y1.min(image.height());
    image.crop_imm(x0, y0, x1.saturating_sub(x0).max(1), y1.saturating_sub(y0).max(1))
}
