//! Remapping of dataset-specific label ids into the canonical label order.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::emotion_space::EmotionLabel;
use crate::error::{config, Result};

/// Source id to canonical label; ids missing from `map` are dropped.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemapTable {
    pub scheme: String,
    pub map: BTreeMap<i64, usize>,
    /// Set when the table is a guess rather than documented by the dataset.
    #[serde(default)]
    pub assumed: bool,
}

impl RemapTable {
    pub fn remap(&self, source_id: i64) -> Option<EmotionLabel> {
        self.map.get(&source_id).map(|&l| EmotionLabel(l))
    }

    /// True when every canonical label is hit exactly once.
    pub fn is_bijective_onto(&self, label_count: usize) -> bool {
        let mut hits = vec![0usize; label_count];
        for &l in self.map.values() {
            match hits.get_mut(l) {
                Some(h) => *h += 1,
                None => return false,
            }
        }
        hits.iter().all(|&h| h == 1)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let table: RemapTable = serde_json::from_str(&text)?;
        if table
            .map
            .values()
            .any(|&l| l >= crate::emotion_space::CANONICAL_LABELS.len())
        {
            return Err(config(format!(
                "remap table `{}` targets an unknown label",
                table.scheme
            )));
        }
        Ok(table)
    }
}

fn table(scheme: &str, pairs: &[(i64, usize)], assumed: bool) -> RemapTable {
    RemapTable {
        scheme: scheme.to_string(),
        map: pairs.iter().copied().collect(),
        assumed,
    }
}

/// Identity over the canonical ids.
pub fn canonical_table() -> RemapTable {
    table(
        "canonical",
        &[(0, 0), (1, 1), (2, 2), (3, 3), (4, 4), (5, 5), (6, 6)],
        false,
    )
}

/// Aff-Wild2 expression annotations: Neutral, Anger, Disgust, Fear,
/// Happiness, Sadness, Surprise, Other. `7` (other) and `-1` (unannotated)
/// are dropped.
pub fn aff_wild2_table() -> RemapTable {
    table(
        "aff_wild2",
        &[(0, 4), (1, 0), (2, 1), (3, 2), (4, 3), (5, 5), (6, 6)],
        true,
    )
}

/// AffectNet expression ids: Neutral, Happy, Sad, Surprise, Fear, Disgust,
/// Anger, Contempt. Contempt has no canonical counterpart and is dropped.
pub fn affectnet_table() -> RemapTable {
    table(
        "affectnet",
        &[(0, 4), (1, 3), (2, 5), (3, 6), (4, 2), (5, 1), (6, 0)],
        true,
    )
}

/// Registered schemes by name.
#[derive(Clone, Debug)]
pub struct RemapRegistry {
    tables: BTreeMap<String, RemapTable>,
}

impl Default for RemapRegistry {
    fn default() -> Self {
        let mut r = RemapRegistry {
            tables: BTreeMap::new(),
        };
        for t in [canonical_table(), aff_wild2_table(), affectnet_table()] {
            r.register(t);
        }
        r
    }
}

impl RemapRegistry {
    /// Adds or replaces a scheme.
    pub fn register(&mut self, table: RemapTable) {
        self.tables.insert(table.scheme.clone(), table);
    }

    pub fn get(&self, scheme: &str) -> Result<&RemapTable> {
        self.tables.get(scheme).ok_or_else(|| {
            config(format!(
                "no remap table registered for scheme `{scheme}` (known: {})",
                self.schemes().join(", ")
            ))
        })
    }

    pub fn schemes(&self) -> Vec<String> {
        self.tables.keys().cloned().collect()
    }

    pub fn remap(&self, scheme: &str, source_id: i64) -> Result<Option<EmotionLabel>> {
        Ok(self.get(scheme)?.remap(source_id))
    }
}

/// Remaps with the built-in tables. `Ok(None)` means the frame is dropped.
pub fn remap_label(scheme: &str, source_id: i64) -> Result<Option<EmotionLabel>> {
    RemapRegistry::default().remap(scheme, source_id)
}
