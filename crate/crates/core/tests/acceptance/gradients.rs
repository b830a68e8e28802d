//! Central finite differences against reverse-mode gradients for every loss
//! term, with respect to the parameters that term trains.

use ganmut_autograd::{grad, no_grad, Tensor};
use ganmut_core::emotion_space::{draw_condition, ConditionDraw, DirectionTable, EmotionCode, EmotionLabel};
use ganmut_core::losses::{
    adversarial_loss, classification_loss_fake, classification_loss_real, gradient_penalty, info_loss,
    interpolation_loss, reconstruction_loss, INTERPOLATION_MASK_RADIUS,
};
use ganmut_core::networks::{build_models, Discriminator, Generator, ModelConfig};
use ganmut_core::trainer::differentiable_codes;
use ndarray::{Array1, ArrayD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{ensure, Context, Outcome};

const SEEDS: [u64; 5] = [11, 22, 33, 44, 55];
const TOLERANCE: f64 = 1e-4;
const STEPS: [f64; 3] = [1e-4, 1e-5, 1e-6];
const SMOOTHNESS: f64 = 1e-6;
const COORDS_PER_TENSOR: usize = 2;
const BATCH: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
enum Term {
    Adv,
    ClsReal,
    ClsFake,
    Info,
    Rho,
    Rec,
    Gp,
}

const TERMS: [Term; 7] = [
    Term::Adv,
    Term::ClsReal,
    Term::ClsFake,
    Term::Info,
    Term::Rho,
    Term::Rec,
    Term::Gp,
];

#[derive(Clone, Copy, PartialEq)]
enum Target {
    Generator,
    Discriminator,
    Directions,
}

impl Term {
    fn targets(self) -> &'static [Target] {
        use Target::*;
        match self {
            Term::Adv => &[Generator, Discriminator],
            Term::ClsReal | Term::Gp => &[Discriminator],
            Term::ClsFake | Term::Rho | Term::Rec => &[Generator, Directions],
            Term::Info => &[Generator, Discriminator, Directions],
        }
    }
}

struct Setup {
    seed: u64,
    table: DirectionTable,
    real: Tensor,
    fixed_fake: Tensor,
    labels: Vec<EmotionLabel>,
    draws: Vec<ConditionDraw>,
}

impl Setup {
    fn codes(&self) -> Vec<EmotionCode> {
        self.draws.iter().map(|d| d.code).collect()
    }
}

fn loss(term: Term, s: &Setup, g: &Generator, d: &Discriminator, dirs: &Tensor) -> Tensor {
    let z = differentiable_codes(&s.draws, dirs);
    let fake = || g.forward(&s.real, &z);
    match term {
        Term::Adv => adversarial_loss(&d.forward(&s.real).src, &d.forward(&fake()).src),
        Term::ClsReal => classification_loss_real(&d.forward(&s.real).cls, &s.labels),
        Term::ClsFake => classification_loss_fake(&d.forward(&fake()).cls, &s.codes(), &s.table),
        Term::Info => info_loss(&d.forward(&fake()).coor, &z),
        Term::Rho => {
            let rho: Vec<f64> = s.draws.iter().map(|d| d.code.rho()).collect();
            interpolation_loss(&d.forward(&fake()).coor, &rho, INTERPOLATION_MASK_RADIUS)
        }
        Term::Rec => {
            let back = no_grad(|| d.forward(&s.real).coor);
            reconstruction_loss(&s.real, &g.forward(&fake(), &back))
        }
        Term::Gp => {
            let mut rng = ChaCha8Rng::seed_from_u64(s.seed ^ 0x9e37);
            gradient_penalty(|x| d.forward(x).src, &s.real, &s.fixed_fake, &mut rng).expect("penalty")
        }
    }
}

fn setup(seed: u64) -> (Setup, Generator, Discriminator) {
    let model = ModelConfig {
        image_size: 16,
        base_channels: 4,
        num_residual_blocks: 1,
        num_labels: 7,
        seed,
    };
    let (g, d) = build_models(&model).expect("models");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let table = DirectionTable::canonical();
    let image = |rng: &mut ChaCha8Rng| {
        Tensor::new(ndarray::Array4::from_shape_simple_fn((BATCH, 3, 16, 16), || rng.gen_range(-0.9..0.9)).into_dyn())
    };
    let real = image(&mut rng);
    let fixed_fake = image(&mut rng);
    let labels = (0..BATCH).map(|_| EmotionLabel(rng.gen_range(0..7))).collect();
    // Two samples along emotion directions, so the radius term is active.
    let draws = (0..BATCH)
        .map(|i| {
            let label = match i {
                0 => Some(EmotionLabel::ANGER),
                1 => Some(EmotionLabel::SURPRISE),
                2 => Some(EmotionLabel::NEUTRAL),
                _ => None,
            };
            draw_condition(&table, label, &mut rng).expect("draw")
        })
        .collect();
    (
        Setup {
            seed,
            table,
            real,
            fixed_fake,
            labels,
            draws,
        },
        g,
        d,
    )
}

/// Mutable view of one parameter collection for perturbation.
struct Probe<'a> {
    g: &'a mut Generator,
    d: &'a mut Discriminator,
    dirs: Tensor,
}

impl Probe<'_> {
    fn value(&self, target: Target, index: usize) -> ArrayD<f64> {
        match target {
            Target::Generator => self.g.params().tensors()[index].data().clone(),
            Target::Discriminator => self.d.params().tensors()[index].data().clone(),
            Target::Directions => self.dirs.data().clone(),
        }
    }

    fn set(&mut self, target: Target, index: usize, value: ArrayD<f64>) {
        match target {
            Target::Generator => self.g.params_mut().set(index, value).expect("shape"),
            Target::Discriminator => self.d.params_mut().set(index, value).expect("shape"),
            Target::Directions => self.dirs = Tensor::parameter(value),
        }
    }

    fn eval(&self, term: Term, s: &Setup) -> f64 {
        loss(term, s, self.g, self.d, &self.dirs).item()
    }

    fn shifted(&mut self, term: Term, s: &Setup, target: Target, index: usize, coord: usize, delta: f64) -> f64 {
        let original = self.value(target, index);
        let mut moved = original.clone();
        moved.as_slice_mut().expect("contiguous")[coord] += delta;
        self.set(target, index, moved);
        let out = self.eval(term, s);
        self.set(target, index, original);
        out
    }

    /// Richardson-extrapolated central difference at the largest step in
    /// [`STEPS`] over which the loss is numerically smooth: the estimates at
    /// `h` and `h/2` must agree to [`SMOOTHNESS`]. `None` when a kink lies
    /// within every stencil.
    fn numeric(&mut self, term: Term, s: &Setup, target: Target, index: usize, coord: usize) -> Option<f64> {
        let level = self.eval(term, s).abs().max(1.0);
        for h in STEPS {
            let mut central = |h: f64| {
                (self.shifted(term, s, target, index, coord, h) - self.shifted(term, s, target, index, coord, -h))
                    / (2.0 * h)
            };
            let wide = central(h);
            let narrow = central(h / 2.0);
            let roundoff = 1e-15 * level / h;
            if (wide - narrow).abs() <= SMOOTHNESS * narrow.abs() + roundoff {
                return Some((4.0 * narrow - wide) / 3.0);
            }
        }
        None
    }
}

fn tensor_count(probe: &Probe, target: Target) -> usize {
    match target {
        Target::Generator => probe.g.params().len(),
        Target::Discriminator => probe.d.params().len(),
        Target::Directions => 1,
    }
}

struct TermReport {
    worst: f64,
    checked: usize,
    skipped: usize,
    nonzero: usize,
}

fn check_term(term: Term, seed: u64) -> TermReport {
    let (s, mut g, mut d) = setup(seed);
    let dirs = Tensor::parameter(Array1::from(s.table.directions().to_vec()).into_dyn());

    let mut inputs: Vec<Tensor> = Vec::new();
    let mut owners: Vec<(Target, usize)> = Vec::new();
    for &target in term.targets() {
        let tensors: Vec<Tensor> = match target {
            Target::Generator => g.params().tensors().to_vec(),
            Target::Discriminator => d.params().tensors().to_vec(),
            Target::Directions => vec![dirs.clone()],
        };
        for (i, t) in tensors.into_iter().enumerate() {
            inputs.push(t);
            owners.push((target, i));
        }
    }
    let total = loss(term, &s, &g, &d, &dirs);
    let refs: Vec<&Tensor> = inputs.iter().collect();
    let analytic = grad(&total, &refs, false);

    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(31) + term as u64);
    let mut probe = Probe {
        g: &mut g,
        d: &mut d,
        dirs,
    };
    let mut report = TermReport {
        worst: 0.0,
        checked: 0,
        skipped: 0,
        nonzero: 0,
    };
    for (k, &(target, index)) in owners.iter().enumerate() {
        debug_assert!(index < tensor_count(&probe, target));
        let a_grad = analytic[k].values().to_vec();
        let mut done = 0;
        let mut attempts = 0;
        while done < COORDS_PER_TENSOR.min(a_grad.len()) && attempts < 10 * COORDS_PER_TENSOR {
            attempts += 1;
            let coord = rng.gen_range(0..a_grad.len());
            let Some(numeric) = probe.numeric(term, &s, target, index, coord) else {
                report.skipped += 1;
                continue;
            };
            let a = a_grad[coord];
            let scale = a.abs().max(numeric.abs()).max(1e-8);
            let rel = (a - numeric).abs() / scale;
            if rel > TOLERANCE {
                eprintln!("{term:?} seed {seed} tensor {index} coord {coord}: analytic {a:e}, numeric {numeric:e}");
            }
            report.worst = report.worst.max(rel);
            report.checked += 1;
            if a.abs() > 1e-8 {
                report.nonzero += 1;
            }
            done += 1;
        }
    }
    report
}

pub fn run(_: &mut Context) -> Outcome {
    let mut lines = Vec::new();
    let mut overall = 0.0f64;
    for term in TERMS {
        let mut worst = 0.0f64;
        let (mut checked, mut skipped, mut nonzero) = (0, 0, 0);
        for seed in SEEDS {
            let r = check_term(term, seed);
            worst = worst.max(r.worst);
            checked += r.checked;
            skipped += r.skipped;
            nonzero += r.nonzero;
        }
        ensure!(nonzero > 0, "{term:?}: every sampled gradient was zero");
        ensure!(
            skipped * 5 <= checked,
            "{term:?}: too many non-smooth samples ({skipped} skipped, {checked} checked)"
        );
        ensure!(
            worst <= TOLERANCE,
            "{term:?}: relative error {worst:.2e} exceeds {TOLERANCE:e}"
        );
        overall = overall.max(worst);
        lines.push(format!("{term:?} {worst:.1e} ({checked} coords, {skipped} non-smooth)"));
    }
    Ok(format!(
        "max rel err {overall:.1e} over 7 terms x 5 seeds; {}",
        lines.join(", ")
    ))
}
