//! Loss terms of the joint objective and their weighted totals.
//!
//! Every function here is a differentiable map built from tensor operations,
//! so gradients flow to whichever inputs carry a graph.

use ganmut_autograd::{grad, Tensor};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::emotion_space::{label_for_code, DirectionTable, EmotionCode, EmotionLabel};
use crate::error::{validation, Result};
use crate::networks::{Discriminator, Generator};

/// Radius above which the intensity regression term applies.
pub const INTERPOLATION_MASK_RADIUS: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_cls: f64,
    pub lambda_rec: f64,
    pub lambda_gp: f64,
    pub lambda_info_d: f64,
    pub lambda_info_g: f64,
    pub lambda_rho: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_cls: 1.0,
            lambda_rec: 10.0,
            lambda_gp: 10.0,
            lambda_info_d: 1.0,
            lambda_info_g: 1.0,
            lambda_rho: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("lambda_cls", self.lambda_cls),
            ("lambda_rec", self.lambda_rec),
            ("lambda_gp", self.lambda_gp),
            ("lambda_info_d", self.lambda_info_d),
            ("lambda_info_g", self.lambda_info_g),
            ("lambda_rho", self.lambda_rho),
        ];
        for (name, v) in all {
            if !v.is_finite() || v < 0.0 {
                return Err(validation(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// `E[D_src(real)] − E[D_src(fake)]`.
pub fn adversarial_loss(src_real: &Tensor, src_fake: &Tensor) -> Tensor {
    src_real.mean().sub(&src_fake.mean())
}

/// Mean negative log softmax probability of each row's target.
pub fn classification_loss(logits: &Tensor, targets: &[EmotionLabel]) -> Tensor {
    let [batch, classes]: [usize; 2] = logits.shape().try_into().expect("logits are (B, M)");
    assert_eq!(batch, targets.len(), "one target per row");
    let ids: Vec<usize> = targets.iter().map(|l| l.id()).collect();
    let picked = logits.log_softmax(1).mul(&Tensor::one_hot(&ids, classes));
    picked.sum().mul_scalar(-1.0 / batch as f64)
}

/// Classification loss on real images against their dataset labels.
pub fn classification_loss_real(logits_real: &Tensor, labels: &[EmotionLabel]) -> Tensor {
    classification_loss(logits_real, labels)
}

/// Target label of each generated sample: the decoded label of its code.
pub fn fake_targets(table: &DirectionTable, codes: &[EmotionCode]) -> Vec<EmotionLabel> {
    codes.iter().map(|&c| label_for_code(table, c)).collect()
}

/// Classification loss on generated images against the label implied by the
/// condition each was generated from.
pub fn classification_loss_fake(logits_fake: &Tensor, codes: &[EmotionCode], table: &DirectionTable) -> Tensor {
    classification_loss(logits_fake, &fake_targets(table, codes))
}

/// Mean squared Euclidean distance between coordinate estimates `(B, 2)` and
/// the Cartesian codes `(B, 2)`.
pub fn info_loss(coor: &Tensor, codes_xy: &Tensor) -> Tensor {
    let batch = coor.shape()[0] as f64;
    coor.sub(codes_xy).square().sum().mul_scalar(1.0 / batch)
}

/// Squared error between the estimated radius `‖coor‖₂` and the sampled
/// intensity, averaged over samples with `rho > mask_radius`. Zero when no
/// sample qualifies.
pub fn interpolation_loss(coor: &Tensor, rho: &[f64], mask_radius: f64) -> Tensor {
    let batch = coor.shape()[0];
    assert_eq!(batch, rho.len(), "one intensity per sample");
    let mask: Vec<f64> = rho.iter().map(|&r| if r > mask_radius { 1.0 } else { 0.0 }).collect();
    let count: f64 = mask.iter().sum();
    if count == 0.0 {
        return Tensor::scalar(0.0);
    }
    let radius = coor.square().sum_axes(&[1], false).sqrt();
    radius
        .sub(&Tensor::from_vec(&[batch], rho.to_vec()))
        .square()
        .mul(&Tensor::from_vec(&[batch], mask))
        .sum()
        .mul_scalar(1.0 / count)
}

/// Mean absolute difference between the input and its reconstruction.
pub fn reconstruction_loss(real: &Tensor, cycled: &Tensor) -> Tensor {
    real.sub(cycled).abs().mean()
}

/// `G(G(x, z), D_coor(x))`: translate, then translate back using the
/// condition the discriminator recovers from the original.
pub fn reconstruction_cycle(
    generator: &Generator,
    discriminator: &Discriminator,
    real: &Tensor,
    codes_xy: &Tensor,
) -> Tensor {
    let original = discriminator.forward(real).coor;
    generator.forward(&generator.forward(real, codes_xy), &original)
}

/// `E[(‖∇ critic(x̂)‖₂ − 1)²]` with `x̂ = ε·real + (1−ε)·fake`, `ε ~ U[0, 1)`
/// per sample. `critic` maps `(B, ...)` to per-sample scores `(B,)`.
pub fn gradient_penalty<F, R>(critic: F, real: &Tensor, fake: &Tensor, rng: &mut R) -> Result<Tensor>
where
    F: Fn(&Tensor) -> Tensor,
    R: Rng + ?Sized,
{
    if real.shape() != fake.shape() || real.ndim() < 2 {
        return Err(validation(format!(
            "gradient penalty needs matching batches, got {:?} and {:?}",
            real.shape(),
            fake.shape()
        )));
    }
    let batch = real.shape()[0];
    let mut eps_shape = vec![1; real.ndim()];
    eps_shape[0] = batch;
    let eps: Vec<f64> = (0..batch).map(|_| rng.gen_range(0.0..1.0)).collect();
    Ok(penalty_at(critic, real, fake, &Tensor::from_vec(&eps_shape, eps)))
}

fn penalty_at<F: Fn(&Tensor) -> Tensor>(critic: F, real: &Tensor, fake: &Tensor, eps: &Tensor) -> Tensor {
    let mixed = real.mul(eps).add(&fake.mul(&eps.neg().add_scalar(1.0)));
    let mixed = if mixed.requires_grad() {
        mixed
    } else {
        Tensor::parameter(mixed.data().clone())
    };
    let scores = critic(&mixed);
    let slope = grad(&scores.sum(), &[&mixed], true).remove(0);
    let axes: Vec<usize> = (1..slope.ndim()).collect();
    slope
        .square()
        .sum_axes(&axes, false)
        .sqrt()
        .add_scalar(-1.0)
        .square()
        .mean()
}

/// Scalar type the totals can be computed over: plain values for reporting,
/// tensors for optimization. Both use the same operation order, so totals
/// agree bit for bit.
pub trait LossValue: Clone {
    fn scaled(&self, w: f64) -> Self;
    fn plus(&self, other: &Self) -> Self;
    fn negated(&self) -> Self;
}

impl LossValue for f64 {
    fn scaled(&self, w: f64) -> Self {
        self * w
    }
    fn plus(&self, other: &Self) -> Self {
        self + other
    }
    fn negated(&self) -> Self {
        -self
    }
}

impl LossValue for Tensor {
    fn scaled(&self, w: f64) -> Self {
        self.mul_scalar(w)
    }
    fn plus(&self, other: &Self) -> Self {
        self.add(other)
    }
    fn negated(&self) -> Self {
        self.neg()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorTerms<T> {
    pub adv: T,
    pub cls_real: T,
    pub info: T,
    pub gp: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorTerms<T> {
    pub adv: T,
    pub cls_fake: T,
    pub info: T,
    pub rho: T,
    pub rec: T,
}

/// `−adv + λ_cls·cls_real + λ_info_D·info + λ_gp·gp`.
///
/// The penalty is added: the discriminator minimizes this quantity.
pub fn total_discriminator_loss<T: LossValue>(terms: &DiscriminatorTerms<T>, w: &LossWeights) -> T {
    terms
        .adv
        .negated()
        .plus(&terms.cls_real.scaled(w.lambda_cls))
        .plus(&terms.info.scaled(w.lambda_info_d))
        .plus(&terms.gp.scaled(w.lambda_gp))
}

/// `adv + λ_cls·cls_fake + λ_rec·rec + λ_info_G·info + λ_ρ·rho`.
pub fn total_generator_loss<T: LossValue>(terms: &GeneratorTerms<T>, w: &LossWeights) -> T {
    terms
        .adv
        .plus(&terms.cls_fake.scaled(w.lambda_cls))
        .plus(&terms.rec.scaled(w.lambda_rec))
        .plus(&terms.info.scaled(w.lambda_info_g))
        .plus(&terms.rho.scaled(w.lambda_rho))
}

impl DiscriminatorTerms<Tensor> {
    pub fn values(&self) -> DiscriminatorTerms<f64> {
        DiscriminatorTerms {
            adv: self.adv.item(),
            cls_real: self.cls_real.item(),
            info: self.info.item(),
            gp: self.gp.item(),
        }
    }
}

impl GeneratorTerms<Tensor> {
    pub fn values(&self) -> GeneratorTerms<f64> {
        GeneratorTerms {
            adv: self.adv.item(),
            cls_fake: self.cls_fake.item(),
            info: self.info.item(),
            rho: self.rho.item(),
            rec: self.rec.item(),
        }
    }
}

impl DiscriminatorTerms<f64> {
    pub fn named(&self) -> [(&'static str, f64); 4] {
        [
            ("adv", self.adv),
            ("cls_real", self.cls_real),
            ("info", self.info),
            ("gp", self.gp),
        ]
    }
}

impl GeneratorTerms<f64> {
    pub fn named(&self) -> [(&'static str, f64); 5] {
        [
            ("adv", self.adv),
            ("cls_fake", self.cls_fake),
            ("info", self.info),
            ("rho", self.rho),
            ("rec", self.rec),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorLosses {
    pub terms: DiscriminatorTerms<f64>,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorLosses {
    pub terms: GeneratorTerms<f64>,
    pub total: f64,
}

/// Loss values of one training step. Generator terms are present only on
/// steps where the generator was updated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub discriminator: DiscriminatorLosses,
    pub generator: Option<GeneratorLosses>,
}

impl LossBreakdown {
    /// Flattened `(term, value)` pairs, `d_*` then `g_*`.
    pub fn entries(&self) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> = self
            .discriminator
            .terms
            .named()
            .iter()
            .map(|(n, v)| (format!("d_{n}"), *v))
            .collect();
        out.push(("d_total".into(), self.discriminator.total));
        if let Some(g) = &self.generator {
            out.extend(g.terms.named().iter().map(|(n, v)| (format!("g_{n}"), *v)));
            out.push(("g_total".into(), g.total));
        }
        out
    }
}
