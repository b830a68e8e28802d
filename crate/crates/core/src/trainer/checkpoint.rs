//! Versioned binary checkpoint container.
//!
//! Layout (little endian):
//!
//! ```text
//! "GMUT" | version u32 | config digest u64 | step u64
//! metadata length u64 | metadata (JSON)
//! blob length u64     | f64 values of every tensor listed in the metadata
//! SHA-256 of everything above
//! ```

use std::path::Path;

use ndarray::{ArrayD, IxDyn};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::optim::{Adam, AdamConfig};
use super::{TrainConfig, TrainState};
use crate::emotion_space::DirectionTable;
use crate::error::{config, Error, Result};
use crate::networks::{ModelConfig, ParamStore};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"GMUT";
pub const CHECKPOINT_VERSION: u32 = 1;

const HEADER_LEN: usize = 4 + 4 + 8 + 8;
const CHECKSUM_LEN: usize = 32;

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct OptimizerMeta {
    config: AdamConfig,
    steps: u64,
}

#[derive(Serialize, Deserialize)]
struct RngState {
    seed: [u8; 32],
    stream: u64,
    word_pos: u128,
}

#[derive(Serialize, Deserialize)]
struct Metadata {
    model: ModelConfig,
    train: TrainConfig,
    table: DirectionTable,
    step: u64,
    rng: RngState,
    optimizers: Vec<OptimizerMeta>,
    tensors: Vec<TensorEntry>,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

struct BlobWriter {
    entries: Vec<TensorEntry>,
    blob: Vec<u8>,
}

impl BlobWriter {
    fn push(&mut self, name: String, shape: &[usize], values: &[f64]) {
        self.entries.push(TensorEntry {
            name,
            shape: shape.to_vec(),
        });
        for v in values {
            self.blob.extend_from_slice(&v.to_le_bytes());
        }
    }

    fn push_params(&mut self, group: &str, store: &ParamStore) {
        for (name, t) in store.iter() {
            self.push(format!("{group}/{name}"), t.shape(), t.values());
        }
    }

    fn push_optimizer(&mut self, group: &str, opt: &Adam) {
        for (i, (m, v)) in opt.first.iter().zip(&opt.second).enumerate() {
            self.push(format!("{group}/m{i}"), &[m.len()], m);
            self.push(format!("{group}/v{i}"), &[v.len()], v);
        }
    }
}

pub fn save_checkpoint(state: &TrainState, path: &Path) -> Result<()> {
    let mut writer = BlobWriter {
        entries: Vec::new(),
        blob: Vec::new(),
    };
    writer.push_params("generator", state.generator.params());
    writer.push_params("discriminator", state.discriminator.params());
    let optimizers = [
        ("opt_g", &state.opt_g),
        ("opt_d", &state.opt_d),
        ("opt_dir", &state.opt_dir),
    ];
    for (group, opt) in optimizers {
        writer.push_optimizer(group, opt);
    }
    let meta = Metadata {
        model: state.model_config().clone(),
        train: state.config.clone(),
        table: state.table.clone(),
        step: state.step,
        rng: RngState {
            seed: state.rng.get_seed(),
            stream: state.rng.get_stream(),
            word_pos: state.rng.get_word_pos(),
        },
        optimizers: optimizers
            .iter()
            .map(|(_, o)| OptimizerMeta {
                config: o.config,
                steps: o.steps,
            })
            .collect(),
        tensors: writer.entries,
    };
    let meta_json = serde_json::to_vec(&meta)?;

    let mut bytes = Vec::with_capacity(HEADER_LEN + meta_json.len() + writer.blob.len() + 64);
    bytes.extend_from_slice(CHECKPOINT_MAGIC);
    bytes.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&meta.model.digest().to_le_bytes());
    bytes.extend_from_slice(&state.step.to_le_bytes());
    bytes.extend_from_slice(&(meta_json.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&meta_json);
    bytes.extend_from_slice(&(writer.blob.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&writer.blob);
    let checksum = Sha256::digest(&bytes);
    bytes.extend_from_slice(&checksum);

    // Write-then-rename so a crash never leaves a half-written checkpoint.
    let tmp = path.with_extension("partial");
    std::fs::write(&tmp, &bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| corrupt("checkpoint is truncated"))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Reads a checkpoint, verifying magic, version, checksum and config digest.
pub fn load_checkpoint(path: &Path) -> Result<TrainState> {
    let bytes = std::fs::read(path)?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };
    if cur.take(4)? != CHECKPOINT_MAGIC {
        return Err(corrupt("not a checkpoint (bad magic bytes)"));
    }
    let version = cur.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(corrupt(format!(
            "unsupported checkpoint version {version} (expected {CHECKPOINT_VERSION})"
        )));
    }
    let digest = cur.u64()?;
    let step = cur.u64()?;
    let meta_len = cur.u64()? as usize;
    let meta_bytes = cur.take(meta_len)?;
    let blob_len = cur.u64()? as usize;
    let blob = cur.take(blob_len)?;
    let body_end = cur.pos;
    let stored = cur.take(CHECKSUM_LEN)?;
    if cur.pos != bytes.len() {
        return Err(corrupt("trailing bytes after checksum"));
    }
    if Sha256::digest(&bytes[..body_end]).as_slice() != stored {
        return Err(corrupt("checksum mismatch (file is corrupted)"));
    }

    let meta: Metadata = serde_json::from_slice(meta_bytes).map_err(|e| corrupt(format!("bad metadata: {e}")))?;
    if meta.model.digest() != digest {
        return Err(corrupt("config digest mismatch"));
    }
    if meta.step != step {
        return Err(corrupt("header step does not match metadata"));
    }
    if blob.len() % 8 != 0 {
        return Err(corrupt("tensor blob is not a whole number of f64 values"));
    }

    let mut state = TrainState::new(&meta.model, meta.train, meta.table)?;
    let mut values = blob
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let mut entries = meta.tensors.iter();
    let mut next_tensor = |expected_name: &str, expected_shape: &[usize]| -> Result<Vec<f64>> {
        let entry = entries
            .next()
            .ok_or_else(|| corrupt("checkpoint has fewer tensors than the model"))?;
        if entry.name != expected_name || entry.shape != expected_shape {
            return Err(corrupt(format!(
                "tensor `{}` {:?} does not match expected `{expected_name}` {expected_shape:?}",
                entry.name, entry.shape
            )));
        }
        let n: usize = entry.shape.iter().product();
        let data: Vec<f64> = values.by_ref().take(n).collect();
        if data.len() != n {
            return Err(corrupt("tensor blob is truncated"));
        }
        Ok(data)
    };

    for (group, store) in [
        ("generator", state.generator.params_mut()),
        ("discriminator", state.discriminator.params_mut()),
    ] {
        let specs: Vec<(String, Vec<usize>)> = store.iter().map(|(n, t)| (n.to_string(), t.shape().to_vec())).collect();
        for (i, (name, shape)) in specs.iter().enumerate() {
            let data = next_tensor(&format!("{group}/{name}"), shape)?;
            let array = ArrayD::from_shape_vec(IxDyn(shape), data).expect("shape checked");
            store.set(i, array)?;
        }
    }
    if meta.optimizers.len() != 3 {
        return Err(corrupt("expected three optimizer states"));
    }
    for ((group, opt), om) in [
        ("opt_g", &mut state.opt_g),
        ("opt_d", &mut state.opt_d),
        ("opt_dir", &mut state.opt_dir),
    ]
    .into_iter()
    .zip(&meta.optimizers)
    {
        opt.config = om.config;
        opt.steps = om.steps;
        for i in 0..opt.first.len() {
            let n = opt.first[i].len();
            opt.first[i] = next_tensor(&format!("{group}/m{i}"), &[n])?;
            opt.second[i] = next_tensor(&format!("{group}/v{i}"), &[n])?;
        }
    }
    if entries.next().is_some() || values.next().is_some() {
        return Err(corrupt("checkpoint has more tensors than the model"));
    }

    let mut rng = <ChaCha8Rng as rand::SeedableRng>::from_seed(meta.rng.seed);
    rng.set_stream(meta.rng.stream);
    rng.set_word_pos(meta.rng.word_pos);
    state.rng = rng;
    state.step = step;
    Ok(state)
}

/// Loads a checkpoint and checks that it was trained at `image_size`.
pub fn load_checkpoint_for_size(path: &Path, image_size: usize) -> Result<TrainState> {
    let state = load_checkpoint(path)?;
    let trained = state.model_config().image_size;
    if trained != image_size {
        return Err(config(format!(
            "checkpoint was trained at {trained}px but {image_size}px was requested"
        )));
    }
    Ok(state)
}
