use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ndarray::Array2;

use super::EmotionClassifier;
use crate::error::{validation, Result};
use crate::networks::ImageBatch;

const EIGEN_EPS: f64 = 1e-13;
const EIGEN_MAX_ITER: usize = 10_000;
const REGULARIZATION: f64 = 1e-6;

/// Gaussian fit of a feature set.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureStats {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub n: usize,
}

impl FeatureStats {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>, n: usize) -> Result<Self> {
        let d = mean.len();
        if d == 0 || covariance.shape() != (d, d) {
            return Err(validation(format!(
                "mean of length {d} needs a {d}x{d} covariance, got {:?}",
                covariance.shape()
            )));
        }
        if n < 2 {
            return Err(validation("feature statistics need at least two samples"));
        }
        let covariance = (&covariance + covariance.transpose()) * 0.5;
        Ok(FeatureStats { mean, covariance, n })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Sample mean and unbiased covariance of the rows of `features`.
pub fn feature_stats(features: &Array2<f64>) -> Result<FeatureStats> {
    let (n, d) = features.dim();
    if n < 2 {
        return Err(validation(format!("need at least 2 feature rows, got {n}")));
    }
    if d == 0 {
        return Err(validation("features have zero width"));
    }
    let x = DMatrix::from_row_iterator(n, d, features.iter().copied());
    let mean = DVector::from_iterator(d, x.column_iter().map(|c| c.mean()));
    let mut centered = x;
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = centered.transpose() * &centered / (n - 1) as f64;
    FeatureStats::new(mean, cov, n)
}

fn eigen(m: &DMatrix<f64>) -> Option<SymmetricEigen<f64, nalgebra::Dyn>> {
    if m.iter().any(|v| !v.is_finite()) {
        return None;
    }
    SymmetricEigen::try_new(m.clone(), EIGEN_EPS, EIGEN_MAX_ITER)
}

/// Square root of a symmetric positive semi-definite matrix, with negative
/// eigenvalues clamped to zero.
fn psd_sqrt(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let e = eigen(m)?;
    let roots = e.eigenvalues.map(|l| l.max(0.0).sqrt());
    Some(&e.eigenvectors * DMatrix::from_diagonal(&roots) * e.eigenvectors.transpose())
}

/// `Tr((A B)^{1/2})` computed as `Tr((A^{1/2} B A^{1/2})^{1/2})`, which is
/// symmetric and shares the eigenvalues of `A B`.
fn trace_sqrt_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<f64> {
    let ra = psd_sqrt(a)?;
    let inner = &ra * b * &ra;
    let inner = (&inner + inner.transpose()) * 0.5;
    let e = eigen(&inner)?;
    Some(e.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum())
}

/// Fréchet distance between two Gaussians, clamped at zero.
pub fn frechet_distance(a: &FeatureStats, b: &FeatureStats) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(validation(format!(
            "feature dimensions differ: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let diff = (&a.mean - &b.mean).norm_squared();
    let trace = a.covariance.trace() + b.covariance.trace();
    let cross = trace_sqrt_product(&a.covariance, &b.covariance).or_else(|| {
        log::warn!("eigendecomposition failed; regularizing covariances");
        let eye = DMatrix::<f64>::identity(a.dim(), a.dim()) * REGULARIZATION;
        trace_sqrt_product(&(&a.covariance + &eye), &(&b.covariance + &eye))
    });
    let cross = cross.ok_or_else(|| validation("covariance matrices are not finite"))?;
    Ok((diff + trace - 2.0 * cross).max(0.0))
}

/// Fréchet distance between classifier features of two image sets.
pub fn fed_score(classifier: &dyn EmotionClassifier, real: &ImageBatch, generated: &ImageBatch) -> Result<f64> {
    if real.batch_size() < 2 || generated.batch_size() < 2 {
        return Err(validation("each image set needs at least two images"));
    }
    let fa = feature_stats(&classifier.extract_features(real)?)?;
    let fb = feature_stats(&classifier.extract_features(generated)?)?;
    frechet_distance(&fa, &fb)
}
