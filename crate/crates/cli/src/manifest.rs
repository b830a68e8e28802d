use std::path::PathBuf;

use anyhow::Context;
use ganmut_core::datapipe::{build_manifest, DetectorClient, ExternalCommand, ManifestOptions, RemapTable, WholeFrame};

use crate::common::{check_unit, guard_file, require_dir, require_file, usage, Outcome};

#[derive(clap::Args, Debug)]
pub struct Args {
    /// One sub-directory of frames per video.
    #[arg(long)]
    frames_dir: PathBuf,
    /// One `<video>.txt` annotation file per video.
    #[arg(long)]
    annotations_dir: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Detections below this confidence are ignored.
    #[arg(long, default_value_t = 0.4)]
    min_confidence: f64,
    /// Labelling scheme of the annotation files.
    #[arg(long, default_value = "aff_wild2")]
    scheme: String,
    /// JSON remap table registered before the scheme is looked up.
    #[arg(long)]
    label_map: Option<PathBuf>,
    /// External face detector; called as `<cmd> [args..] <image>`, prints
    /// one JSON detection per line. Without it every frame is one face.
    #[arg(long)]
    detector_cmd: Option<PathBuf>,
    #[arg(long = "detector-arg", allow_hyphen_values = true)]
    detector_args: Vec<String>,
    /// Where crops go (default: `crops/` next to the manifest).
    #[arg(long)]
    crop_dir: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

pub fn run(a: Args) -> Outcome {
    require_dir(&a.frames_dir, "frames directory")?;
    require_dir(&a.annotations_dir, "annotations directory")?;
    check_unit(a.min_confidence, "--min-confidence")?;
    let mut options = ManifestOptions {
        scheme: a.scheme.clone(),
        crop_dir: a.crop_dir.clone(),
        ..ManifestOptions::default()
    };
    if let Some(path) = &a.label_map {
        require_file(path, "label map")?;
        options.registry.register(RemapTable::from_json_file(path)?);
    }
    options.registry.get(&a.scheme)?;
    if !a.detector_args.is_empty() && a.detector_cmd.is_none() {
        return Err(usage("--detector-arg needs --detector-cmd"));
    }
    guard_file(&a.out, a.force)?;

    let client = match &a.detector_cmd {
        Some(cmd) => DetectorClient::new(
            Box::new(ExternalCommand::new(cmd, a.detector_args.clone())),
            a.min_confidence,
        )?,
        None => DetectorClient::new(Box::new(WholeFrame), a.min_confidence)?,
    };
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let stats = build_manifest(&a.frames_dir, &a.annotations_dir, &client, &a.out, &options)?;
    println!("{stats}");
    Ok(())
}
