//! Manifest building, face detection and batch loading.

mod detector;
mod labels;
mod loader;
mod manifest;

pub use detector::{
    crop, detect_primary_face, parse_detections, Detection, DetectorBackend, DetectorClient, ExternalCommand,
    FixedDetections, WholeFrame,
};
pub use labels::{aff_wild2_table, affectnet_table, canonical_table, remap_label, RemapRegistry, RemapTable};
pub use loader::{load_batch, load_image, warp, Augmentation, Batch, BatchSource, InMemoryLoader, ManifestLoader};
pub use manifest::{
    build_manifest, read_annotations, write_manifest, Manifest, ManifestOptions, ManifestRecord, ManifestStats,
};
