use ganmut_autograd::Tensor;
use ganmut_core::losses::gradient_penalty;
use ndarray::Array4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{ensure, Context, Outcome};

const SHAPE: (usize, usize, usize, usize) = (6, 3, 8, 8);

fn random_images(rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::new(Array4::from_shape_simple_fn(SHAPE, || rng.gen_range(-1.0..1.0)).into_dyn())
}

/// Per-sample score `<w, x>` with a unit-norm `w`.
fn linear_critic(rng: &mut ChaCha8Rng) -> impl Fn(&Tensor) -> Tensor {
    let (_, c, h, w) = SHAPE;
    let mut weights = Array4::from_shape_simple_fn((1, c, h, w), || rng.gen_range(-1.0..1.0));
    let norm = weights.iter().map(|v| v * v).sum::<f64>().sqrt();
    weights /= norm;
    let weights = Tensor::new(weights.into_dyn());
    move |x: &Tensor| x.mul(&weights).sum_axes(&[1, 2, 3], false)
}

pub fn run(_: &mut Context) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst_linear = 0.0f64;
    let mut worst_constant = 0.0f64;
    for _ in 0..50 {
        let real = random_images(&mut rng);
        let fake = random_images(&mut rng);
        let critic = linear_critic(&mut rng);
        let gp = gradient_penalty(&critic, &real, &fake, &mut rng).map_err(|e| e.to_string())?;
        worst_linear = worst_linear.max(gp.item().abs());

        let level = rng.gen_range(-3.0..3.0);
        let constant = |x: &Tensor| Tensor::full(&[x.shape()[0]], level);
        let gp = gradient_penalty(constant, &real, &fake, &mut rng).map_err(|e| e.to_string())?;
        worst_constant = worst_constant.max((gp.item() - 1.0).abs());

        let flat = |x: &Tensor| x.mul_scalar(0.0).sum_axes(&[1, 2, 3], false).add_scalar(level);
        let gp = gradient_penalty(flat, &real, &fake, &mut rng).map_err(|e| e.to_string())?;
        worst_constant = worst_constant.max((gp.item() - 1.0).abs());
    }
    ensure!(
        worst_linear <= 1e-10,
        "unit-norm linear critic gave penalty {worst_linear:e}"
    );
    ensure!(
        worst_constant <= 1e-10,
        "constant critic off from 1 by {worst_constant:e}"
    );
    Ok(format!(
        "linear max {worst_linear:.1e}, constant max |gp-1| {worst_constant:.1e} over 50 draws"
    ))
}
