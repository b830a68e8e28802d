//! Generator and three-headed discriminator.

mod discriminator;
mod generator;
pub(crate) mod layers;

use ganmut_autograd::Tensor;
use ndarray::{Array4, ArrayD, Ix4, IxDyn};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::emotion_space::EmotionCode;
use crate::error::{config, validation, Result};

pub use discriminator::{Discriminator, DiscriminatorOutput};
pub use generator::Generator;
pub use layers::{ParamId, ParamStore};

pub const SUPPORTED_SIZES: [usize; 4] = [16, 32, 64, 128];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub image_size: usize,
    pub base_channels: usize,
    pub num_residual_blocks: usize,
    /// Number of emotion labels, neutral included.
    pub num_labels: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            image_size: 128,
            base_channels: 16,
            num_residual_blocks: 3,
            num_labels: 7,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if !SUPPORTED_SIZES.contains(&self.image_size) {
            return Err(config(format!(
                "unsupported image size {} (supported: {SUPPORTED_SIZES:?})",
                self.image_size
            )));
        }
        if self.base_channels == 0 {
            return Err(config("base_channels must be positive"));
        }
        if self.num_labels < 2 {
            return Err(config("need at least two labels"));
        }
        Ok(())
    }

    /// First eight bytes of SHA-256 over the canonical JSON encoding.
    pub fn digest(&self) -> u64 {
        let json = serde_json::to_vec(self).expect("config serializes");
        let hash = Sha256::digest(&json);
        u64::from_le_bytes(hash[..8].try_into().expect("8 bytes"))
    }
}

/// Builds freshly initialized networks; initialization is a pure function of
/// `config` (including its seed).
pub fn build_models(config: &ModelConfig) -> Result<(Generator, Discriminator)> {
    config.validate()?;
    Ok((Generator::new(config), Discriminator::new(config)))
}

/// A batch of RGB images, `(batch, 3, S, S)`, values in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageBatch {
    data: Array4<f64>,
}

impl ImageBatch {
    pub fn new(data: Array4<f64>) -> Result<Self> {
        let (b, c, h, w) = data.dim();
        if b == 0 {
            return Err(validation("image batch is empty"));
        }
        if c != 3 || h != w {
            return Err(validation(format!(
                "image batch must be (B, 3, S, S), got ({b}, {c}, {h}, {w})"
            )));
        }
        if !SUPPORTED_SIZES.contains(&h) {
            return Err(validation(format!("unsupported image side {h}")));
        }
        if let Some(v) = data.iter().find(|v| v.is_nan() || v.abs() > 1.0) {
            return Err(validation(format!("pixel value {v} outside [-1, 1]")));
        }
        Ok(ImageBatch { data })
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let data = t
            .data()
            .clone()
            .into_dimensionality::<Ix4>()
            .map_err(|_| validation(format!("expected a 4-D tensor, got {:?}", t.shape())))?;
        ImageBatch::new(data)
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(self.data.clone().into_dyn())
    }

    pub fn data(&self) -> &Array4<f64> {
        &self.data
    }

    pub fn into_inner(self) -> Array4<f64> {
        self.data
    }

    pub fn batch_size(&self) -> usize {
        self.data.dim().0
    }

    pub fn image_size(&self) -> usize {
        self.data.dim().2
    }

    /// Sub-batch with the given sample indices, in order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&i) = indices.iter().find(|&&i| i >= self.batch_size()) {
            return Err(validation(format!("sample index {i} out of range")));
        }
        ImageBatch::new(self.data.select(ndarray::Axis(0), indices))
    }

    pub fn concat(batches: &[ImageBatch]) -> Result<Self> {
        let views: Vec<_> = batches.iter().map(|b| b.data.view()).collect();
        let data = ndarray::concatenate(ndarray::Axis(0), &views)
            .map_err(|e| validation(format!("cannot concatenate batches: {e}")))?;
        ImageBatch::new(data)
    }

    /// Splits into consecutive chunks of at most `size` samples.
    pub fn chunks(&self, size: usize) -> Vec<ImageBatch> {
        self.data
            .axis_chunks_iter(ndarray::Axis(0), size.max(1))
            .map(|c| ImageBatch { data: c.to_owned() })
            .collect()
    }
}

/// Cartesian view of a batch of codes, shape `(B, 2)`.
pub fn codes_tensor(codes: &[EmotionCode]) -> Tensor {
    let mut values = Vec::with_capacity(codes.len() * 2);
    for c in codes {
        let (x, y) = c.to_cartesian();
        values.push(x);
        values.push(y);
    }
    Tensor::new(ArrayD::from_shape_vec(IxDyn(&[codes.len(), 2]), values).expect("shape"))
}
