use ganmut_autograd::{no_grad, Tensor};

use super::layers::{Conv2d, Linear, ParamStore};
use super::{ImageBatch, ModelConfig};
use crate::error::{validation, Result};
use crate::rng;

const LEAK: f64 = 0.01;

/// Per-sample outputs of the three heads.
#[derive(Clone, Debug)]
pub struct DiscriminatorOutput {
    /// Unbounded critic score, `(B,)`.
    pub src: Tensor,
    /// Emotion logits, `(B, M)`.
    pub cls: Tensor,
    /// Cartesian estimate of the condition, `(B, 2)`.
    pub coor: Tensor,
}

/// Strided-convolution critic trunk (no normalization) down to 2×2, with the
/// source, classification and coordinate heads branching at the end.
#[derive(Clone, Debug)]
pub struct Discriminator {
    config: ModelConfig,
    params: ParamStore,
    trunk: Vec<Conv2d>,
    src: Conv2d,
    cls: Linear,
    coor: Linear,
    final_channels: usize,
}

impl Discriminator {
    pub(super) fn new(config: &ModelConfig) -> Self {
        let mut rng = rng::stream(config.seed, rng::DISCRIMINATOR_INIT);
        let mut p = ParamStore::new();
        let layers = config.image_size.trailing_zeros() as usize - 1;
        let mut trunk = Vec::with_capacity(layers);
        let mut in_ch = 3;
        let mut out_ch = config.base_channels;
        for i in 0..layers {
            trunk.push(Conv2d::new(
                &mut p,
                &format!("trunk{i}"),
                in_ch,
                out_ch,
                4,
                2,
                1,
                true,
                &mut rng,
            ));
            in_ch = out_ch;
            out_ch *= 2;
        }
        let final_channels = in_ch;
        // A bias on the critic head would cancel in the Wasserstein objective
        // and never receive gradient.
        let src = Conv2d::new(&mut p, "src", final_channels, 1, 3, 1, 1, false, &mut rng);
        let flat = final_channels * 4;
        let cls = Linear::new(&mut p, "cls", flat, config.num_labels, &mut rng);
        let coor = Linear::new(&mut p, "coor", flat, 2, &mut rng);
        Discriminator {
            config: config.clone(),
            params: p,
            trunk,
            src,
            cls,
            coor,
            final_channels,
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Differentiable forward pass over `(B, 3, S, S)` images.
    pub fn forward(&self, images: &Tensor) -> DiscriminatorOutput {
        let p = &self.params;
        let b = images.shape()[0];
        let mut h = images.clone();
        for conv in &self.trunk {
            h = conv.forward(p, &h).leaky_relu(LEAK);
        }
        let src = self.src.forward(p, &h).mean_axes(&[1, 2, 3], false);
        let flat = h.reshape(&[b, self.final_channels * 4]);
        DiscriminatorOutput {
            src,
            cls: self.cls.forward(p, &flat),
            coor: self.coor.forward(p, &flat),
        }
    }

    pub fn check_inputs(&self, images: &Tensor) -> Result<()> {
        let s = self.config.image_size;
        let batch = images.shape().first().copied().unwrap_or(0);
        if batch == 0 || images.shape() != [batch, 3, s, s] {
            return Err(validation(format!(
                "discriminator expects images (B, 3, {s}, {s}), got {:?}",
                images.shape()
            )));
        }
        Ok(())
    }

    /// Inference on a validated batch.
    pub fn evaluate(&self, images: &ImageBatch) -> Result<DiscriminatorOutput> {
        let x = images.to_tensor();
        self.check_inputs(&x)?;
        Ok(no_grad(|| self.forward(&x)))
    }

    /// Critic scores of every image, evaluated in chunks.
    pub fn critic_scores(&self, images: &ImageBatch, chunk: usize) -> Result<Vec<f64>> {
        let mut scores = Vec::with_capacity(images.batch_size());
        for part in images.chunks(chunk) {
            scores.extend(self.evaluate(&part)?.src.to_vec());
        }
        Ok(scores)
    }
}
