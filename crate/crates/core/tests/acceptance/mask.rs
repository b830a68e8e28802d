use ganmut_autograd::Tensor;
use ganmut_core::losses::{interpolation_loss, INTERPOLATION_MASK_RADIUS};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{ensure, Context, Outcome};

pub fn run(_: &mut Context) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut trials = 0;
    for batch in 1..=16 {
        for _ in 0..50 {
            let coor = Tensor::new(Array2::from_shape_simple_fn((batch, 2), || rng.gen_range(-2.0..2.0)).into_dyn());
            let mut rho: Vec<f64> = (0..batch)
                .map(|_| rng.gen_range(0.0..=INTERPOLATION_MASK_RADIUS))
                .collect();
            rho[0] = INTERPOLATION_MASK_RADIUS;
            let loss = interpolation_loss(&coor, &rho, INTERPOLATION_MASK_RADIUS).item();
            ensure!(loss == 0.0, "batch {batch} with rho <= 0.2 gave {loss:e}");
            trials += 1;
        }
    }
    let coor = Tensor::new(Array2::from_elem((3, 2), 0.7).into_dyn());
    let exact = interpolation_loss(&coor, &[0.2, 0.2, 0.2], 0.2).item();
    ensure!(exact == 0.0, "rho exactly 0.2 gave {exact:e}");
    let active = interpolation_loss(&coor, &[0.2, 0.2, 0.2 + 1e-12], 0.2).item();
    ensure!(active > 0.0, "rho just above 0.2 should contribute");
    Ok(format!("{trials} masked batches all exactly 0"))
}
