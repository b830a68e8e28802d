use ganmut_core::emotion_space::{DirectionTable, EmotionCode, EmotionLabel};
use ganmut_core::metrics::{series_smoothness, smoothness_score, EmotionClassifier, ImageGenerator, INTENSITY_STEPS};
use ganmut_core::networks::ImageBatch;
use ganmut_core::Result;
use ndarray::{Array2, Array4, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{ensure, Context, Outcome};

/// Writes the intensity of each code into every pixel.
struct IntensityPainter;

impl ImageGenerator for IntensityPainter {
    fn generate_images(&self, images: &ImageBatch, codes: &[EmotionCode]) -> Result<ImageBatch> {
        let mut data = images.data().clone();
        for (mut img, code) in data.axis_iter_mut(Axis(0)).zip(codes) {
            img.fill(code.rho());
        }
        ImageBatch::new(data)
    }
}

/// Reads the intensity back from the pixels and reports a prescribed
/// confidence for it.
struct Scripted {
    target: EmotionLabel,
    series: [f64; INTENSITY_STEPS],
}

impl EmotionClassifier for Scripted {
    fn num_classes(&self) -> usize {
        7
    }

    fn classify(&self, images: &ImageBatch) -> Result<Array2<f64>> {
        let n = images.batch_size();
        let mut probs = Array2::zeros((n, 7));
        for (i, img) in images.data().axis_iter(Axis(0)).enumerate() {
            let rho = img[[0, 0, 0]];
            let step = ((rho * INTENSITY_STEPS as f64).round() as usize).clamp(1, INTENSITY_STEPS) - 1;
            let p = self.series[step];
            let rest = (1.0 - p) / 6.0;
            probs.row_mut(i).fill(rest);
            probs[[i, self.target.id()]] = p;
        }
        Ok(probs)
    }

    fn extract_features(&self, images: &ImageBatch) -> Result<Array2<f64>> {
        Ok(Array2::zeros((images.batch_size(), 1)))
    }
}

fn score(series: [f64; INTENSITY_STEPS]) -> std::result::Result<f64, String> {
    let table = DirectionTable::canonical();
    let neutral = ImageBatch::new(Array4::zeros((3, 3, 16, 16))).map_err(|e| e.to_string())?;
    let classifier = Scripted {
        target: EmotionLabel::HAPPINESS,
        series,
    };
    smoothness_score(
        &IntensityPainter,
        &table,
        &classifier,
        &neutral,
        EmotionLabel::HAPPINESS,
    )
    .map_err(|e| e.to_string())
}

pub fn run(_: &mut Context) -> Outcome {
    let ramp: [f64; INTENSITY_STEPS] = std::array::from_fn(|j| (j + 1) as f64 / 10.0);
    let ramp_score = score(ramp)?;
    ensure!(
        (ramp_score - 1.0 / 9.0).abs() <= 1e-6,
        "linear ramp scored {ramp_score}, want 1/9"
    );

    let step: [f64; INTENSITY_STEPS] = std::array::from_fn(|j| if j < 5 { 0.0 } else { 1.0 });
    let step_score = score(step)?;
    ensure!(step_score == 1.0, "step scored {step_score}, want exactly 1");

    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut counted = 0;
    while counted < 10_000 {
        let series: Vec<f64> = (0..INTENSITY_STEPS).map(|_| rng.gen_range(0.0..=1.0)).collect();
        let range = series.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - series.iter().copied().fold(f64::INFINITY, f64::min);
        if range < 1e-6 {
            continue;
        }
        let s = series_smoothness(&series);
        ensure!(
            (1.0 / 9.0 - 1e-12..=1.0 + 1e-12).contains(&s),
            "series {series:?} scored {s}, outside [1/9, 1]"
        );
        lo = lo.min(s);
        hi = hi.max(s);
        counted += 1;
    }
    Ok(format!(
        "ramp {ramp_score:.9}, step {step_score}, 10^4 random series in [{lo:.4}, {hi:.4}]"
    ))
}
