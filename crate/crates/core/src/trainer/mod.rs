//! Joint adversarial optimization of the generator, the discriminator and
//! the emotion directions.

mod checkpoint;
mod optim;
mod trace;

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use ganmut_autograd::{grad, no_grad, Tensor};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datapipe::{Batch, BatchSource};
use crate::emotion_space::{draw_condition, ConditionDraw, DirectionTable, EmotionCode, EmotionLabel};
use crate::error::{config, validation, Error, Result};
use crate::losses::{
    adversarial_loss, classification_loss_fake, classification_loss_real, gradient_penalty, info_loss,
    interpolation_loss, reconstruction_loss, total_discriminator_loss, total_generator_loss, DiscriminatorLosses,
    DiscriminatorTerms, GeneratorLosses, GeneratorTerms, LossBreakdown, LossWeights, INTERPOLATION_MASK_RADIUS,
};
use crate::networks::{build_models, codes_tensor, Discriminator, Generator, ImageBatch, ModelConfig};
use crate::rng;

pub use checkpoint::{
    load_checkpoint, load_checkpoint_for_size, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use optim::{Adam, AdamConfig};
pub use trace::{TraceRecord, TrainTrace};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub total_steps: u64,
    /// Discriminator steps per generator step.
    pub n_critic: u64,
    pub learning_rate_g: f64,
    pub learning_rate_d: f64,
    pub weights: LossWeights,
    pub batch_size: usize,
    pub seed: u64,
    /// Checkpoint period in steps; 0 writes only the initial and final ones.
    pub checkpoint_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            total_steps: 10_000,
            n_critic: 5,
            learning_rate_g: 1e-4,
            learning_rate_d: 1e-4,
            weights: LossWeights::default(),
            batch_size: 16,
            seed: 0,
            checkpoint_every: 1000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_critic < 1 {
            return Err(config("n_critic must be at least 1"));
        }
        if !(self.learning_rate_g >= 0.0 && self.learning_rate_d >= 0.0)
            || !self.learning_rate_g.is_finite()
            || !self.learning_rate_d.is_finite()
        {
            return Err(config("learning rates must be finite and non-negative"));
        }
        if self.batch_size < 2 {
            return Err(config("batch_size must be at least 2"));
        }
        self.weights.validate()
    }
}

/// Everything that evolves during training.
#[derive(Clone, Debug)]
pub struct TrainState {
    pub generator: Generator,
    pub discriminator: Discriminator,
    pub table: DirectionTable,
    pub config: TrainConfig,
    pub(crate) opt_g: Adam,
    pub(crate) opt_d: Adam,
    pub(crate) opt_dir: Adam,
    pub(crate) step: u64,
    pub(crate) rng: rng::Rng,
}

impl TrainState {
    pub fn new(model: &ModelConfig, train: TrainConfig, table: DirectionTable) -> Result<Self> {
        train.validate()?;
        if table.labels().len() != model.num_labels {
            return Err(config(format!(
                "model has {} labels but the direction table has {}",
                model.num_labels,
                table.labels().len()
            )));
        }
        let (generator, discriminator) = build_models(model)?;
        let opt_g = Adam::for_tensors(
            AdamConfig::with_learning_rate(train.learning_rate_g),
            generator.params().tensors(),
        );
        let opt_d = Adam::for_tensors(
            AdamConfig::with_learning_rate(train.learning_rate_d),
            discriminator.params().tensors(),
        );
        let opt_dir = Adam::new(
            AdamConfig::with_learning_rate(train.learning_rate_g),
            &[table.directions().len()],
        );
        let rng = rng::stream(train.seed, rng::TRAINING);
        Ok(TrainState {
            generator,
            discriminator,
            table,
            config: train,
            opt_g,
            opt_d,
            opt_dir,
            step: 0,
            rng,
        })
    }

    pub fn model_config(&self) -> &ModelConfig {
        self.generator.config()
    }

    /// Number of completed training steps.
    pub fn step(&self) -> u64 {
        self.step
    }

    /// Conditions for one batch: the first half is drawn per label (uniform
    /// over the label set), the rest from the full gamut.
    fn draw_conditions(&mut self, batch: usize) -> Result<Vec<ConditionDraw>> {
        let labelled = batch / 2;
        let label_count = self.table.labels().len();
        (0..batch)
            .map(|i| {
                let label = (i < labelled).then(|| EmotionLabel(self.rng.gen_range(0..label_count)));
                draw_condition(&self.table, label, &mut self.rng)
            })
            .collect()
    }

    fn check_batch(&self, batch: &Batch) -> Result<()> {
        let s = self.model_config().image_size;
        if batch.images.image_size() != s {
            return Err(config(format!(
                "batch images are {}px but the model expects {s}px",
                batch.images.image_size()
            )));
        }
        if batch.labels.len() != batch.images.batch_size() {
            return Err(validation("labels and images differ in count"));
        }
        if let Some(l) = batch.labels.iter().find(|l| !self.table.labels().contains(**l)) {
            return Err(validation(format!("label id {} out of range", l.id())));
        }
        Ok(())
    }

    fn non_finite(&self, named: &[(&str, f64)]) -> Option<Error> {
        let bad = named.iter().find(|(_, v)| !v.is_finite())?;
        let diagnostic = named
            .iter()
            .map(|(n, v)| format!("{n}={v}"))
            .collect::<Vec<_>>()
            .join(" ");
        Some(Error::NonFinite {
            term: bad.0.to_string(),
            step: self.step,
            diagnostic,
        })
    }

    /// One critic update. Only discriminator parameters change.
    pub fn train_discriminator_step(&mut self, batch: &Batch) -> Result<DiscriminatorLosses> {
        self.check_batch(batch)?;
        let draws = self.draw_conditions(batch.images.batch_size())?;
        let codes: Vec<EmotionCode> = draws.iter().map(|d| d.code).collect();
        let real = batch.images.to_tensor();
        let z = codes_tensor(&codes);
        let fake = no_grad(|| self.generator.forward(&real, &z));

        let d = &self.discriminator;
        let out_real = d.forward(&real);
        let out_fake = d.forward(&fake);
        let terms = DiscriminatorTerms {
            adv: adversarial_loss(&out_real.src, &out_fake.src),
            cls_real: classification_loss_real(&out_real.cls, &batch.labels),
            info: info_loss(&out_fake.coor, &z),
            gp: gradient_penalty(|x| d.forward(x).src, &real, &fake, &mut self.rng)?,
        };
        let total = total_discriminator_loss(&terms, &self.config.weights);
        let values = terms.values();
        let mut named = values.named().to_vec();
        named.push(("total", total.item()));
        if let Some(err) = self.non_finite(&named) {
            return Err(err);
        }

        let params: Vec<&Tensor> = d.params().tensors().iter().collect();
        let grads = grad(&total, &params, false);
        let updated = self.opt_d.update(d.params().tensors(), &grads)?;
        let store = self.discriminator.params_mut();
        for (i, value) in updated.into_iter().enumerate() {
            store.set(i, value)?;
        }
        Ok(DiscriminatorLosses {
            terms: values,
            total: total.item(),
        })
    }

    /// One generator update. Generator parameters and emotion directions
    /// change; the discriminator does not.
    pub fn train_generator_step(&mut self, batch: &Batch) -> Result<GeneratorLosses> {
        self.check_batch(batch)?;
        let draws = self.draw_conditions(batch.images.batch_size())?;
        let codes: Vec<EmotionCode> = draws.iter().map(|d| d.code).collect();
        let rho: Vec<f64> = codes.iter().map(EmotionCode::rho).collect();
        let directions = Tensor::parameter(ndarray::Array1::from(self.table.directions().to_vec()).into_dyn());
        let real = batch.images.to_tensor();
        let z = differentiable_codes(&draws, &directions);

        let (g, d) = (&self.generator, &self.discriminator);
        let fake = g.forward(&real, &z);
        let out_fake = d.forward(&fake);
        let out_real = no_grad(|| d.forward(&real));
        let cycled = g.forward(&fake, &out_real.coor);
        let terms = GeneratorTerms {
            adv: adversarial_loss(&out_real.src, &out_fake.src),
            cls_fake: classification_loss_fake(&out_fake.cls, &codes, &self.table),
            info: info_loss(&out_fake.coor, &z),
            rho: interpolation_loss(&out_fake.coor, &rho, INTERPOLATION_MASK_RADIUS),
            rec: reconstruction_loss(&real, &cycled),
        };
        let total = total_generator_loss(&terms, &self.config.weights);
        let values = terms.values();
        let mut named = values.named().to_vec();
        named.push(("total", total.item()));
        if let Some(err) = self.non_finite(&named) {
            return Err(err);
        }

        let mut inputs: Vec<&Tensor> = g.params().tensors().iter().collect();
        inputs.push(&directions);
        let mut grads = grad(&total, &inputs, false);
        let dir_grad = grads.pop().expect("direction gradient");
        let updated = self.opt_g.update(g.params().tensors(), &grads)?;
        let new_dirs = self.opt_dir.update(&[directions], &[dir_grad])?;

        let store = self.generator.params_mut();
        for (i, value) in updated.into_iter().enumerate() {
            store.set(i, value)?;
        }
        let dirs: Vec<f64> = new_dirs[0].iter().copied().collect();
        self.table.set_directions(&dirs)?;
        Ok(GeneratorLosses {
            terms: values,
            total: total.item(),
        })
    }

    /// One iteration of the schedule: a critic step, plus a generator step
    /// on every `n_critic`-th iteration.
    pub fn train_iteration(&mut self, batch: &Batch) -> Result<TraceRecord> {
        let discriminator = self.train_discriminator_step(batch)?;
        let generator = if (self.step + 1).is_multiple_of(self.config.n_critic) {
            Some(self.train_generator_step(batch)?)
        } else {
            None
        };
        let record = TraceRecord {
            step: self.step,
            losses: LossBreakdown {
                discriminator,
                generator,
            },
            directions: self.table.directions().to_vec(),
        };
        self.step += 1;
        Ok(record)
    }
}

/// Cartesian codes `(B, 2)` whose angles come from `directions` for rows
/// drawn along an emotion direction, so gradients reach those angles.
pub fn differentiable_codes(draws: &[ConditionDraw], directions: &Tensor) -> Tensor {
    let batch = draws.len();
    let slots = directions.numel();
    let mut select = vec![0.0; batch * slots];
    let mut fixed = vec![0.0; batch];
    let mut rho = vec![0.0; batch];
    for (i, d) in draws.iter().enumerate() {
        match d.direction {
            Some(k) => select[i * slots + k] = 1.0,
            None => fixed[i] = d.code.theta(),
        }
        rho[i] = d.code.rho();
    }
    let theta = Tensor::from_vec(&[batch, slots], select)
        .matmul(&directions.reshape(&[slots, 1]))
        .add(&Tensor::from_vec(&[batch, 1], fixed));
    let rho = Tensor::from_vec(&[batch, 1], rho);
    Tensor::concat(&[rho.mul(&theta.cos()), rho.mul(&theta.sin())], 1)
}

/// Result of [`train`].
#[derive(Debug)]
pub struct TrainOutcome {
    pub state: TrainState,
    pub trace: TrainTrace,
    /// Checkpoints written, in order; the last one holds the final state.
    pub checkpoints: Vec<PathBuf>,
}

pub fn checkpoint_path(dir: &Path, step: u64) -> PathBuf {
    dir.join(format!("step_{step:08}.gmut"))
}

/// Runs the full schedule. Writes an initial checkpoint, one every
/// `checkpoint_every` steps and a final one into `out_dir`.
///
/// A non-finite loss aborts the run with an error; checkpoints written before
/// the failure stay on disk.
pub fn train(
    model: &ModelConfig,
    config: TrainConfig,
    table: DirectionTable,
    data: &mut dyn BatchSource,
    out_dir: &Path,
) -> Result<TrainOutcome> {
    if data.is_empty() {
        return Err(validation("training data is empty"));
    }
    let mut state = TrainState::new(model, config, table)?;
    std::fs::create_dir_all(out_dir)?;
    let mut checkpoints = Vec::new();
    let mut trace = TrainTrace::default();

    let initial = checkpoint_path(out_dir, 0);
    save_checkpoint(&state, &initial)?;
    checkpoints.push(initial);

    let every = state.config.checkpoint_every;
    while state.step < state.config.total_steps {
        let batch = data.next_batch()?;
        let record = state.train_iteration(&batch)?;
        log::debug!("step {} d_total={}", record.step, record.losses.discriminator.total);
        trace.push(record);
        let done = state.step == state.config.total_steps;
        if done || (every > 0 && state.step % every == 0) {
            let path = checkpoint_path(out_dir, state.step);
            save_checkpoint(&state, &path)?;
            checkpoints.push(path);
        }
    }
    Ok(TrainOutcome {
        state,
        trace,
        checkpoints,
    })
}

/// Angles are kept in `[0, 2π)`.
pub fn directions_valid(table: &DirectionTable) -> bool {
    table.directions().iter().all(|d| (0.0..TAU).contains(d))
}

/// Generates `images` under `codes` with a trained state, in chunks.
pub fn generate_batch(
    generator: &Generator,
    images: &ImageBatch,
    codes: &[EmotionCode],
    chunk: usize,
) -> Result<ImageBatch> {
    if codes.len() != images.batch_size() {
        return Err(validation(format!(
            "{} codes for {} images",
            codes.len(),
            images.batch_size()
        )));
    }
    let chunk = chunk.max(1);
    let mut parts = Vec::new();
    for (i, part) in images.chunks(chunk).into_iter().enumerate() {
        let start = i * chunk;
        parts.push(generator.generate(&part, &codes[start..start + part.batch_size()])?);
    }
    ImageBatch::concat(&parts)
}
