use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::networks::{Discriminator, ImageBatch};
use crate::rng;

pub const DEFAULT_CALIBRATION_FRACTION: f64 = 0.2;

/// Anything that scores realness.
pub trait Critic {
    fn critic_scores(&self, images: &ImageBatch) -> Result<Vec<f64>>;
}

impl Critic for Discriminator {
    fn critic_scores(&self, images: &ImageBatch) -> Result<Vec<f64>> {
        Discriminator::critic_scores(self, images, 32)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct F1Report {
    pub f1_real: f64,
    pub f1_fake: f64,
    pub f1_average: f64,
    pub threshold: f64,
    /// Samples scored after the calibration split.
    pub n_real: usize,
    pub n_fake: usize,
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// F1 of both classes when a sample is called real iff its score exceeds
/// `threshold`.
pub fn f1_at_threshold(real: &[f64], fake: &[f64], threshold: f64) -> F1Report {
    let tp = real.iter().filter(|&&s| s > threshold).count();
    let fn_ = real.len() - tp;
    let fp = fake.iter().filter(|&&s| s > threshold).count();
    let tn = fake.len() - fp;
    let f1_real = f1(ratio(tp, tp + fp), ratio(tp, tp + fn_));
    let f1_fake = f1(ratio(tn, tn + fn_), ratio(tn, tn + fp));
    F1Report {
        f1_real,
        f1_fake,
        f1_average: (f1_real + f1_fake) / 2.0,
        threshold,
        n_real: real.len(),
        n_fake: fake.len(),
    }
}

fn split(scores: &[f64], fraction: f64, rng: &mut rng::Rng, what: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let k = ((scores.len() as f64 * fraction).round() as usize).max(1);
    if k >= scores.len() {
        return Err(validation(format!(
            "{what} set of {} leaves nothing after a {fraction} calibration split",
            scores.len()
        )));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.shuffle(rng);
    let pick = |ids: &[usize]| ids.iter().map(|&i| scores[i]).collect::<Vec<_>>();
    Ok((pick(&idx[..k]), pick(&idx[k..])))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Calibrates the threshold as the midpoint of the class means on a random
/// held-out split, then scores the remainder.
pub fn f1_from_scores(real: &[f64], fake: &[f64], calibration_fraction: f64, seed: u64) -> Result<F1Report> {
    if real.is_empty() || fake.is_empty() {
        return Err(validation("both score sets must be non-empty"));
    }
    if !(calibration_fraction > 0.0 && calibration_fraction < 1.0) {
        return Err(validation("calibration fraction must lie in (0, 1)"));
    }
    let mut rng = rng::stream(seed, rng::EVALUATION);
    let (cal_real, eval_real) = split(real, calibration_fraction, &mut rng, "real")?;
    let (cal_fake, eval_fake) = split(fake, calibration_fraction, &mut rng, "generated")?;
    let threshold = (mean(&cal_real) + mean(&cal_fake)) / 2.0;
    Ok(f1_at_threshold(&eval_real, &eval_fake, threshold))
}

pub fn discriminator_f1(
    critic: &dyn Critic,
    real: &ImageBatch,
    generated: &ImageBatch,
    calibration_fraction: f64,
    seed: u64,
) -> Result<F1Report> {
    let real_scores = critic.critic_scores(real)?;
    let fake_scores = critic.critic_scores(generated)?;
    f1_from_scores(&real_scores, &fake_scores, calibration_fraction, seed)
}
