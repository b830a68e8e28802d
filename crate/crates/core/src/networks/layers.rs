use ganmut_autograd::Tensor;
use ndarray::{ArrayD, IxDyn};
use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use sha2::{Digest, Sha256};

use crate::error::{validation, Result};

/// Handle to a tensor in a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamId(usize);

/// Named, ordered collection of trainable tensors.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore::default()
    }

    pub fn add(&mut self, name: impl Into<String>, data: ArrayD<f64>) -> ParamId {
        self.names.push(name.into());
        self.values.push(Tensor::parameter(data));
        ParamId(self.values.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Tensor::numel).sum()
    }

    /// Replaces the value of parameter `index`; the shape must not change.
    pub fn set(&mut self, index: usize, data: ArrayD<f64>) -> Result<()> {
        let current = self
            .values
            .get(index)
            .ok_or_else(|| validation(format!("no parameter #{index}")))?;
        if current.shape() != data.shape() {
            return Err(validation(format!(
                "parameter `{}` has shape {:?}, got {:?}",
                self.names[index],
                current.shape(),
                data.shape()
            )));
        }
        self.values[index] = Tensor::parameter(data);
        Ok(())
    }

    /// SHA-256 over names, shapes and exact bit patterns of every value.
    pub fn digest(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        for (name, t) in self.iter() {
            hasher.update(name.as_bytes());
            for &d in t.shape() {
                hasher.update((d as u64).to_le_bytes());
            }
            for v in t.values() {
                hasher.update(v.to_bits().to_le_bytes());
            }
        }
        hasher.finalize().into()
    }
}

fn uniform_array<R: Rng>(shape: &[usize], bound: f64, rng: &mut R) -> ArrayD<f64> {
    let dist = Uniform::new_inclusive(-bound, bound);
    let n: usize = shape.iter().product();
    let values = (0..n).map(|_| dist.sample(rng)).collect();
    ArrayD::from_shape_vec(IxDyn(shape), values).expect("shape")
}

#[derive(Clone, Debug)]
pub(crate) struct Conv2d {
    weight: ParamId,
    bias: Option<ParamId>,
    stride: usize,
    padding: usize,
}

impl Conv2d {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        bias: bool,
        rng: &mut R,
    ) -> Self {
        let bound = 1.0 / ((in_ch * kernel * kernel) as f64).sqrt();
        let weight = store.add(
            format!("{name}.weight"),
            uniform_array(&[out_ch, in_ch, kernel, kernel], bound, rng),
        );
        let bias = bias.then(|| store.add(format!("{name}.bias"), uniform_array(&[out_ch], bound, rng)));
        Conv2d {
            weight,
            bias,
            stride,
            padding,
        }
    }

    pub(crate) fn forward(&self, store: &ParamStore, x: &Tensor) -> Tensor {
        x.conv2d(
            store.get(self.weight),
            self.bias.map(|b| store.get(b)),
            self.stride,
            self.padding,
        )
    }
}

#[derive(Clone, Debug)]
pub(crate) struct ConvTranspose2d {
    weight: ParamId,
    stride: usize,
    padding: usize,
}

impl ConvTranspose2d {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut R,
    ) -> Self {
        let bound = 1.0 / ((out_ch * kernel * kernel) as f64).sqrt();
        let weight = store.add(
            format!("{name}.weight"),
            uniform_array(&[in_ch, out_ch, kernel, kernel], bound, rng),
        );
        ConvTranspose2d {
            weight,
            stride,
            padding,
        }
    }

    pub(crate) fn forward(&self, store: &ParamStore, x: &Tensor) -> Tensor {
        x.conv_transpose2d(store.get(self.weight), None, self.stride, self.padding)
    }
}

/// Per-sample, per-channel normalization with a learned affine transform.
#[derive(Clone, Debug)]
pub(crate) struct InstanceNorm {
    gamma: ParamId,
    beta: ParamId,
}

const NORM_EPS: f64 = 1e-5;

impl InstanceNorm {
    pub(crate) fn new(store: &mut ParamStore, name: &str, channels: usize) -> Self {
        InstanceNorm {
            gamma: store.add(format!("{name}.gamma"), ArrayD::ones(IxDyn(&[channels]))),
            beta: store.add(format!("{name}.beta"), ArrayD::zeros(IxDyn(&[channels]))),
        }
    }

    pub(crate) fn forward(&self, store: &ParamStore, x: &Tensor) -> Tensor {
        let c = x.shape()[1];
        let centered = x.sub(&x.mean_axes(&[2, 3], true));
        let std = centered.square().mean_axes(&[2, 3], true).add_scalar(NORM_EPS).sqrt();
        centered
            .div(&std)
            .mul(&store.get(self.gamma).reshape(&[1, c, 1, 1]))
            .add(&store.get(self.beta).reshape(&[1, c, 1, 1]))
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Linear {
    weight: ParamId,
    bias: ParamId,
}

impl Linear {
    pub(crate) fn new<R: Rng>(store: &mut ParamStore, name: &str, inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        Linear {
            weight: store.add(format!("{name}.weight"), uniform_array(&[inputs, outputs], bound, rng)),
            bias: store.add(format!("{name}.bias"), uniform_array(&[outputs], bound, rng)),
        }
    }

    pub(crate) fn forward(&self, store: &ParamStore, x: &Tensor) -> Tensor {
        x.matmul(store.get(self.weight)).add(store.get(self.bias))
    }
}
