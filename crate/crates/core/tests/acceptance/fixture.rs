use std::path::Path;

use ganmut_core::datapipe::{build_manifest, DetectorClient, Manifest, ManifestOptions};

use crate::{ensure, Context, Outcome};

pub fn run(_: &mut Context) -> Outcome {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/affwild");
    let expected = std::fs::read(root.join("expected_manifest.csv")).map_err(|e| e.to_string())?;
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    let manifest_path = out.path().join("manifest.csv");
    let stats = build_manifest(
        &root.join("frames"),
        &root.join("annotations"),
        &DetectorClient::whole_frame(),
        &manifest_path,
        &ManifestOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    let written = std::fs::read(&manifest_path).map_err(|e| e.to_string())?;
    ensure!(
        written == expected,
        "manifest differs from expected:\n{}",
        String::from_utf8_lossy(&written)
    );
    ensure!(
        stats.frames_seen == stats.written + stats.dropped_label + stats.dropped_no_face + stats.decode_errors,
        "accounting identity broken: {stats}"
    );
    ensure!(
        stats.written == 2 && stats.dropped_label == 1,
        "unexpected counts: {stats}"
    );

    let manifest = Manifest::read(&manifest_path).map_err(|e| e.to_string())?;
    for record in &manifest.records {
        let crop = manifest.resolve(record);
        ensure!(crop.is_file(), "crop {} missing", crop.display());
    }
    Ok(format!("byte-identical manifest; {stats}"))
}
