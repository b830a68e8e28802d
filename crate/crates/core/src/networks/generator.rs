use ganmut_autograd::{no_grad, Tensor};

use super::layers::{Conv2d, ConvTranspose2d, InstanceNorm, ParamStore};
use super::{codes_tensor, ImageBatch, ModelConfig};
use crate::emotion_space::EmotionCode;
use crate::error::{validation, Result};
use crate::rng;

const SAMPLING_STEPS: usize = 2;

#[derive(Clone, Debug)]
struct ResidualBlock {
    conv1: Conv2d,
    norm1: InstanceNorm,
    conv2: Conv2d,
    norm2: InstanceNorm,
}

/// Encoder / residual / decoder image translator conditioned on a 2-D code.
///
/// The Cartesian code is tiled into two constant planes and concatenated to
/// the RGB input.
#[derive(Clone, Debug)]
pub struct Generator {
    config: ModelConfig,
    params: ParamStore,
    stem: (Conv2d, InstanceNorm),
    down: Vec<(Conv2d, InstanceNorm)>,
    blocks: Vec<ResidualBlock>,
    up: Vec<(ConvTranspose2d, InstanceNorm)>,
    head: Conv2d,
}

impl Generator {
    pub(super) fn new(config: &ModelConfig) -> Self {
        let mut rng = rng::stream(config.seed, rng::GENERATOR_INIT);
        let mut p = ParamStore::new();
        let c = config.base_channels;

        let stem = (
            Conv2d::new(&mut p, "stem.conv", 3 + 2, c, 7, 1, 3, false, &mut rng),
            InstanceNorm::new(&mut p, "stem.norm", c),
        );
        let mut ch = c;
        let mut down = Vec::new();
        for i in 0..SAMPLING_STEPS {
            down.push((
                Conv2d::new(&mut p, &format!("down{i}.conv"), ch, ch * 2, 4, 2, 1, false, &mut rng),
                InstanceNorm::new(&mut p, &format!("down{i}.norm"), ch * 2),
            ));
            ch *= 2;
        }
        let blocks = (0..config.num_residual_blocks)
            .map(|i| ResidualBlock {
                conv1: Conv2d::new(&mut p, &format!("res{i}.conv1"), ch, ch, 3, 1, 1, false, &mut rng),
                norm1: InstanceNorm::new(&mut p, &format!("res{i}.norm1"), ch),
                conv2: Conv2d::new(&mut p, &format!("res{i}.conv2"), ch, ch, 3, 1, 1, false, &mut rng),
                norm2: InstanceNorm::new(&mut p, &format!("res{i}.norm2"), ch),
            })
            .collect();
        let mut up = Vec::new();
        for i in 0..SAMPLING_STEPS {
            up.push((
                ConvTranspose2d::new(&mut p, &format!("up{i}.conv"), ch, ch / 2, 4, 2, 1, &mut rng),
                InstanceNorm::new(&mut p, &format!("up{i}.norm"), ch / 2),
            ));
            ch /= 2;
        }
        let head = Conv2d::new(&mut p, "head.conv", ch, 3, 7, 1, 3, false, &mut rng);

        Generator {
            config: config.clone(),
            params: p,
            stem,
            down,
            blocks,
            up,
            head,
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

    /// Differentiable forward pass: images `(B, 3, S, S)`, codes `(B, 2)`.
    pub fn forward(&self, images: &Tensor, codes: &Tensor) -> Tensor {
        let p = &self.params;
        let [b, _, h, w]: [usize; 4] = images.shape().try_into().expect("NCHW images");
        let planes = codes.reshape(&[b, 2, 1, 1]).broadcast_to(&[b, 2, h, w]);
        let mut x = Tensor::concat(&[images.clone(), planes], 1);

        x = self.stem.1.forward(p, &self.stem.0.forward(p, &x)).relu();
        for (conv, norm) in &self.down {
            x = norm.forward(p, &conv.forward(p, &x)).relu();
        }
        for block in &self.blocks {
            let y = block.norm1.forward(p, &block.conv1.forward(p, &x)).relu();
            let y = block.norm2.forward(p, &block.conv2.forward(p, &y));
            x = x.add(&y);
        }
        for (conv, norm) in &self.up {
            x = norm.forward(p, &conv.forward(p, &x)).relu();
        }
        self.head.forward(p, &x).tanh()
    }

    /// Checks shapes of a `(images, codes)` pair before a forward pass.
    pub fn check_inputs(&self, images: &Tensor, codes: &Tensor) -> Result<()> {
        let s = self.config.image_size;
        let batch = images.shape().first().copied().unwrap_or(0);
        if images.shape() != [batch, 3, s, s] || batch == 0 {
            return Err(validation(format!(
                "generator expects images (B, 3, {s}, {s}), got {:?}",
                images.shape()
            )));
        }
        if codes.shape() != [batch, 2] {
            return Err(validation(format!(
                "generator expects codes ({batch}, 2), got {:?}",
                codes.shape()
            )));
        }
        Ok(())
    }

    /// Inference: translates each image under its paired code.
    pub fn generate(&self, images: &ImageBatch, codes: &[EmotionCode]) -> Result<ImageBatch> {
        if codes.len() != images.batch_size() {
            return Err(validation(format!(
                "{} images but {} codes",
                images.batch_size(),
                codes.len()
            )));
        }
        let x = images.to_tensor();
        let z = codes_tensor(codes);
        self.check_inputs(&x, &z)?;
        let out = no_grad(|| self.forward(&x, &z));
        ImageBatch::from_tensor(&out)
    }
}
