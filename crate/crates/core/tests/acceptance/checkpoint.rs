use ganmut_autograd::no_grad;
use ganmut_core::datapipe::{Batch, BatchSource};
use ganmut_core::emotion_space::{DirectionTable, EmotionCode};
use ganmut_core::networks::{codes_tensor, ImageBatch, ModelConfig};
use ganmut_core::synthetic::{synthetic_dataset, synthetic_loader, SyntheticConfig};
use ganmut_core::trainer::{load_checkpoint, save_checkpoint, TrainConfig, TrainState};
use ndarray::{stack, Axis};

use crate::{ensure, Context, Outcome};

fn tiny_state() -> Result<(TrainState, Batch), String> {
    let model = ModelConfig {
        image_size: 16,
        base_channels: 4,
        num_residual_blocks: 1,
        num_labels: 7,
        seed: 9,
    };
    let config = TrainConfig {
        total_steps: 5,
        n_critic: 2,
        batch_size: 4,
        seed: 9,
        checkpoint_every: 0,
        ..TrainConfig::default()
    };
    let data = SyntheticConfig {
        count: 24,
        image_size: 16,
        seed: 9,
    };
    let mut loader = synthetic_loader(&data, 4, 9).map_err(|e| e.to_string())?;
    let mut state = TrainState::new(&model, config, DirectionTable::canonical()).map_err(|e| e.to_string())?;
    for _ in 0..5 {
        let batch = loader.next_batch().map_err(|e| e.to_string())?;
        state.train_iteration(&batch).map_err(|e| e.to_string())?;
    }
    let next = loader.next_batch().map_err(|e| e.to_string())?;
    Ok((state, next))
}

fn probe_batch() -> Result<(ImageBatch, Vec<EmotionCode>), String> {
    let (images, _) = synthetic_dataset(&SyntheticConfig {
        count: 6,
        image_size: 16,
        seed: 77,
    })
    .map_err(|e| e.to_string())?;
    let views: Vec<_> = images.iter().map(|a| a.view()).collect();
    let batch = ImageBatch::new(stack(Axis(0), &views).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let codes = (0..6)
        .map(|i| EmotionCode::new(i as f64, 0.15 * i as f64 + 0.1))
        .collect::<ganmut_core::Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    Ok((batch, codes))
}

/// Bit patterns of every network output on the probe batch.
fn probe_outputs(state: &TrainState) -> Result<Vec<u64>, String> {
    let (images, codes) = probe_batch()?;
    let x = images.to_tensor();
    let z = codes_tensor(&codes);
    let (fake, out) = no_grad(|| {
        let fake = state.generator.forward(&x, &z);
        (fake, state.discriminator.forward(&x))
    });
    let mut bits: Vec<u64> = Vec::new();
    for t in [fake, out.src, out.cls, out.coor] {
        bits.extend(t.to_vec().iter().map(|v| v.to_bits()));
    }
    bits.extend(state.table.directions().iter().map(|v| v.to_bits()));
    Ok(bits)
}

fn rejected(bytes: &[u8], dir: &std::path::Path, name: &str) -> bool {
    let path = dir.join(name);
    std::fs::write(&path, bytes).expect("write corrupted copy");
    load_checkpoint(&path).is_err()
}

pub fn run(_: &mut Context) -> Outcome {
    let (state, next) = tiny_state()?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("state.gmut");
    save_checkpoint(&state, &path).map_err(|e| e.to_string())?;
    let loaded = load_checkpoint(&path).map_err(|e| e.to_string())?;

    ensure!(
        loaded.step() == state.step(),
        "step {} != {}",
        loaded.step(),
        state.step()
    );
    ensure!(
        probe_outputs(&loaded)? == probe_outputs(&state)?,
        "probe outputs differ after reload"
    );
    ensure!(
        loaded.generator.params().digest() == state.generator.params().digest()
            && loaded.discriminator.params().digest() == state.discriminator.params().digest(),
        "parameter digests differ"
    );

    let (mut a, mut b) = (state, loaded);
    let ra = a.train_iteration(&next).map_err(|e| e.to_string())?;
    let rb = b.train_iteration(&next).map_err(|e| e.to_string())?;
    ensure!(ra == rb, "training diverges right after reload");
    ensure!(
        probe_outputs(&a)? == probe_outputs(&b)?,
        "states diverge after one more iteration"
    );

    let bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
    let mut cases = 0;
    for (i, pos) in [0, 5, 12, 30, bytes.len() / 2, bytes.len() - 40, bytes.len() - 1]
        .into_iter()
        .enumerate()
    {
        let mut flipped = bytes.clone();
        flipped[pos] ^= 0x10;
        ensure!(
            rejected(&flipped, dir.path(), &format!("flip{i}")),
            "byte flip at {pos} accepted"
        );
        cases += 1;
    }
    for cut in [0, 3, 16, bytes.len() / 3, bytes.len() - 1] {
        ensure!(
            rejected(&bytes[..cut], dir.path(), "cut"),
            "truncation to {cut} bytes accepted"
        );
        cases += 1;
    }
    let mut magic = bytes.clone();
    magic[..4].copy_from_slice(b"NOPE");
    ensure!(rejected(&magic, dir.path(), "magic"), "bad magic accepted");
    let mut version = bytes.clone();
    version[4..8].copy_from_slice(&99u32.to_le_bytes());
    ensure!(rejected(&version, dir.path(), "version"), "bad version accepted");
    let mut extended = bytes.clone();
    extended.push(0);
    ensure!(rejected(&extended, dir.path(), "extended"), "trailing byte accepted");
    cases += 3;

    Ok(format!(
        "probe outputs and next iteration bit-identical; {cases} corrupted variants rejected"
    ))
}
