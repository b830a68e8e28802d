//! Training manifests: CSV files with header `path,label`.
//!
//! Expected input layout for [`build_manifest`]:
//!
//! ```text
//! frames_root/<video>/<n>.png      frame n, 1-based
//! annotations_root/<video>.txt     header line, then one label per frame
//! ```

use std::fmt;
use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::detector::{crop, decode_image, DetectorClient};
use super::labels::RemapRegistry;
use crate::emotion_space::{EmotionLabel, CANONICAL_LABELS};
use crate::error::{config, validation, Error, Result};

const FRAME_EXTENSIONS: [&str; 4] = ["png", "jpg", "jpeg", "bmp"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestRecord {
    /// Relative to the manifest's directory, `/`-separated.
    pub path: String,
    pub label: EmotionLabel,
}

#[derive(Serialize, Deserialize)]
struct Row {
    path: String,
    label: usize,
}

/// Records plus the directory their paths are relative to.
#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub root: PathBuf,
    pub records: Vec<ManifestRecord>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let headers = reader.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["path", "label"] {
            return Err(validation(format!("{}: expected header `path,label`", path.display())));
        }
        let mut records = Vec::new();
        for row in reader.deserialize::<Row>() {
            let row = row?;
            if row.label >= CANONICAL_LABELS.len() {
                return Err(validation(format!(
                    "{}: label {} out of range for `{}`",
                    path.display(),
                    row.label,
                    row.path
                )));
            }
            records.push(ManifestRecord {
                path: row.path,
                label: EmotionLabel(row.label),
            });
        }
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Manifest { root, records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn resolve(&self, record: &ManifestRecord) -> PathBuf {
        let p = Path::new(&record.path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    /// Count of records per canonical label id.
    pub fn label_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; CANONICAL_LABELS.len()];
        for r in &self.records {
            counts[r.label.id()] += 1;
        }
        counts
    }
}

pub fn write_manifest(path: &Path, records: &[ManifestRecord]) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    writer.write_record(["path", "label"])?;
    for r in records {
        writer.serialize(Row {
            path: r.path.clone(),
            label: r.label.id(),
        })?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestStats {
    pub videos_seen: usize,
    /// Videos without an annotation file; their frames are not counted.
    pub videos_skipped: usize,
    pub frames_seen: usize,
    pub written: usize,
    pub dropped_label: usize,
    pub dropped_no_face: usize,
    pub decode_errors: usize,
}

impl ManifestStats {
    pub fn is_balanced(&self) -> bool {
        self.frames_seen == self.written + self.dropped_label + self.dropped_no_face + self.decode_errors
    }
}

impl fmt::Display for ManifestStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "written={} dropped_label={} dropped_no_face={} decode_errors={} frames_seen={} videos_seen={} videos_skipped={}",
            self.written,
            self.dropped_label,
            self.dropped_no_face,
            self.decode_errors,
            self.frames_seen,
            self.videos_seen,
            self.videos_skipped
        )
    }
}

#[derive(Clone, Debug)]
pub struct ManifestOptions {
    /// Label scheme of the annotation files.
    pub scheme: String,
    pub registry: RemapRegistry,
    /// Where face crops go; defaults to `crops/` next to the manifest.
    pub crop_dir: Option<PathBuf>,
}

impl Default for ManifestOptions {
    fn default() -> Self {
        ManifestOptions {
            scheme: "aff_wild2".to_string(),
            registry: RemapRegistry::default(),
            crop_dir: None,
        }
    }
}

/// Reads an annotation file: a header line, then one integer per frame.
/// Lines that do not parse become `None`.
pub fn read_annotations(path: &Path) -> Result<Vec<Option<i64>>> {
    let text = std::fs::read_to_string(path)?;
    Ok(text.lines().skip(1).map(|l| l.trim().parse::<i64>().ok()).collect())
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?;
    entries.sort();
    Ok(entries)
}

fn is_frame(path: &Path) -> bool {
    path.is_file()
        && path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| FRAME_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

fn frame_index(path: &Path) -> Option<usize> {
    path.file_stem()?.to_str()?.parse::<usize>().ok().filter(|&n| n >= 1)
}

/// `/`-joined path of `path` relative to `base`, or the absolute path when
/// `path` is not below `base`.
fn relative_path(path: &Path, base: &Path) -> String {
    let abs = |p: &Path| std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf());
    let (path_abs, base_abs) = (abs(path), abs(base));
    match path_abs.strip_prefix(&base_abs) {
        Ok(rel) => rel
            .components()
            .filter_map(|c| match c {
                Component::Normal(s) => Some(s.to_string_lossy().into_owned()),
                _ => None,
            })
            .collect::<Vec<_>>()
            .join("/"),
        Err(_) => path_abs.to_string_lossy().into_owned(),
    }
}

/// Pairs every frame with its annotation, keeps the relevant ones, crops
/// the most confident face and writes the manifest to `out_path`.
pub fn build_manifest(
    frames_root: &Path,
    annotations_root: &Path,
    client: &DetectorClient,
    out_path: &Path,
    options: &ManifestOptions,
) -> Result<ManifestStats> {
    for (what, dir) in [("frames", frames_root), ("annotations", annotations_root)] {
        if !dir.is_dir() {
            return Err(config(format!("{what} directory {} does not exist", dir.display())));
        }
    }
    let table = options.registry.get(&options.scheme)?;
    let manifest_dir = out_path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."))
        .to_path_buf();
    let crop_dir = options.crop_dir.clone().unwrap_or_else(|| manifest_dir.join("crops"));

    let mut stats = ManifestStats::default();
    let mut records = Vec::new();
    for video in sorted_entries(frames_root)?.into_iter().filter(|p| p.is_dir()) {
        stats.videos_seen += 1;
        let name = video
            .file_name()
            .expect("directory entry")
            .to_string_lossy()
            .into_owned();
        let annotation = annotations_root.join(format!("{name}.txt"));
        if !annotation.is_file() {
            log::warn!("no annotation file for video {name}; skipping");
            stats.videos_skipped += 1;
            continue;
        }
        let labels = read_annotations(&annotation)?;
        for frame in sorted_entries(&video)?.into_iter().filter(|p| is_frame(p)) {
            stats.frames_seen += 1;
            let label = frame_index(&frame)
                .and_then(|n| labels.get(n - 1).copied().flatten())
                .and_then(|id| table.remap(id));
            let Some(label) = label else {
                stats.dropped_label += 1;
                continue;
            };
            let image = match decode_image(&frame) {
                Ok(image) => image,
                Err(e) => {
                    log::warn!("{e}");
                    stats.decode_errors += 1;
                    continue;
                }
            };
            let Some(face) = client.detect(&frame, &image)?.into_iter().next() else {
                stats.dropped_no_face += 1;
                continue;
            };
            let stem = frame.file_stem().expect("frame file").to_string_lossy().into_owned();
            let target = crop_dir.join(&name).join(format!("{stem}.png"));
            std::fs::create_dir_all(target.parent().expect("crop dir"))?;
            crop(&image, &face).to_rgb8().save(&target).map_err(Error::from)?;
            records.push(ManifestRecord {
                path: relative_path(&target, &manifest_dir),
                label,
            });
            stats.written += 1;
        }
    }
    records.sort_by(|a, b| a.path.cmp(&b.path));
    std::fs::create_dir_all(&manifest_dir)?;
    write_manifest(out_path, &records)?;
    debug_assert!(stats.is_balanced());
    Ok(stats)
}
