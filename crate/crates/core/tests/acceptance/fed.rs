use std::time::Instant;

use ganmut_core::metrics::{fed_score, frechet_distance, ClassifierConfig, FeatureStats, ReferenceClassifier};
use ganmut_core::networks::ImageBatch;
use nalgebra::{DMatrix, DVector};
use ndarray::Array4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{ensure, Context, Outcome};

fn diag_stats(mean: &[f64], var: &[f64]) -> FeatureStats {
    FeatureStats::new(
        DVector::from_column_slice(mean),
        DMatrix::from_diagonal(&DVector::from_column_slice(var)),
        100,
    )
    .expect("valid stats")
}

/// Closed form for Gaussians with diagonal covariances.
fn diagonal_oracle(m1: &[f64], v1: &[f64], m2: &[f64], v2: &[f64]) -> f64 {
    (0..m1.len())
        .map(|i| (m1[i] - m2[i]).powi(2) + (v1[i].sqrt() - v2[i].sqrt()).powi(2))
        .sum()
}

pub fn run(_: &mut Context) -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);

    let mut worst_1d = 0.0f64;
    for _ in 0..1000 {
        let (m1, m2) = (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let (v1, v2) = (rng.gen_range(0.0..4.0), rng.gen_range(0.0..4.0));
        let got = frechet_distance(&diag_stats(&[m1], &[v1]), &diag_stats(&[m2], &[v2])).map_err(|e| e.to_string())?;
        let want = diagonal_oracle(&[m1], &[v1], &[m2], &[v2]);
        worst_1d = worst_1d.max((got - want).abs());
    }
    ensure!(worst_1d <= 1e-8, "1-D closed form off by {worst_1d:e}");

    let mut worst_diag = 0.0f64;
    for d in 1..=8 {
        for _ in 0..100 {
            let draw = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| -> Vec<f64> {
                (0..d).map(|_| rng.gen_range(lo..hi)).collect()
            };
            let (m1, m2) = (draw(&mut rng, -3.0, 3.0), draw(&mut rng, -3.0, 3.0));
            let (v1, v2) = (draw(&mut rng, 0.0, 5.0), draw(&mut rng, 0.0, 5.0));
            let got = frechet_distance(&diag_stats(&m1, &v1), &diag_stats(&m2, &v2)).map_err(|e| e.to_string())?;
            worst_diag = worst_diag.max((got - diagonal_oracle(&m1, &v1, &m2, &v2)).abs());
        }
    }
    ensure!(worst_diag <= 1e-8, "diagonal oracle off by {worst_diag:e}");

    let classifier = ReferenceClassifier::new(ClassifierConfig {
        image_size: 16,
        seed: 5,
        ..ClassifierConfig::default()
    })
    .map_err(|e| e.to_string())?;
    let mut worst_self = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(4..16);
        let data = Array4::from_shape_simple_fn((n, 3, 16, 16), || rng.gen_range(-1.0..=1.0));
        let x = ImageBatch::new(data).map_err(|e| e.to_string())?;
        worst_self = worst_self.max(fed_score(&classifier, &x, &x).map_err(|e| e.to_string())?);
    }
    ensure!(worst_self <= 1e-6, "FED(X, X) reached {worst_self:e}");

    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 30.0, "took {secs:.1}s (limit 30s)");
    Ok(format!(
        "max |err| 1-D {worst_1d:.1e}, diagonal {worst_diag:.1e}; max FED(X,X) {worst_self:.1e}"
    ))
}
