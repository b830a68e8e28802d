//! The two-dimensional polar conditional space.
//!
//! A condition is a point `(theta, rho)` in the unit disk: `theta` selects the
//! kind of expression and `rho` its intensity. Every non-neutral emotion owns
//! a learnable direction; the neutral label occupies the disk of radius
//! `threshold` around the origin.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};

/// Default neutral radius.
pub const DEFAULT_NEUTRAL_THRESHOLD: f64 = 0.2;

/// Canonical label order. Every external labelling scheme maps into it.
pub const CANONICAL_LABELS: [&str; 7] = [
    "anger",
    "disgust",
    "fear",
    "happiness",
    "neutral",
    "sadness",
    "surprise",
];

const ORIGIN_RADIUS: f64 = 1e-9;
const CARTESIAN_SLACK: f64 = 1e-6;
const TIE_TOLERANCE: f64 = 1e-12;

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let w = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs.
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Shortest angular distance between two angles, in `[0, π]`.
pub fn angular_distance(a: f64, b: f64) -> f64 {
    let d = wrap_angle(a - b);
    d.min(TAU - d)
}

/// A point of the conditional space in polar form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmotionCode {
    theta: f64,
    rho: f64,
}

/// Result of [`normalize_code`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Normalized {
    pub code: EmotionCode,
    /// Whether `rho` had to be clamped into `[0, 1]`.
    pub clamped: bool,
}

/// Wraps `theta` into `[0, 2π)` and clamps `rho` into `[0, 1]`.
pub fn normalize_code(theta: f64, rho: f64) -> Result<Normalized> {
    if !theta.is_finite() || !rho.is_finite() {
        return Err(validation(format!(
            "emotion code must be finite, got theta={theta} rho={rho}"
        )));
    }
    let clamped_rho = rho.clamp(0.0, 1.0);
    Ok(Normalized {
        code: EmotionCode {
            theta: wrap_angle(theta),
            rho: clamped_rho,
        },
        clamped: clamped_rho != rho,
    })
}

/// `(rho cos θ, rho sin θ)`.
pub fn polar_to_cartesian(code: EmotionCode) -> (f64, f64) {
    (code.rho * code.theta.cos(), code.rho * code.theta.sin())
}

/// Inverse of [`polar_to_cartesian`]. Radii above one are clamped; the origin
/// maps to `theta = 0`.
pub fn cartesian_to_polar(x: f64, y: f64) -> Result<EmotionCode> {
    if !x.is_finite() || !y.is_finite() {
        return Err(validation(format!("cartesian code must be finite, got ({x}, {y})")));
    }
    let rho = x.hypot(y);
    if rho > 1.0 + CARTESIAN_SLACK {
        log::debug!("cartesian radius {rho} clamped to 1");
    }
    if rho < ORIGIN_RADIUS {
        return Ok(EmotionCode::ORIGIN);
    }
    Ok(EmotionCode {
        theta: wrap_angle(y.atan2(x)),
        rho: rho.min(1.0),
    })
}

impl EmotionCode {
    pub const ORIGIN: EmotionCode = EmotionCode { theta: 0.0, rho: 0.0 };

    /// Builds a code, normalizing as [`normalize_code`] does.
    pub fn new(theta: f64, rho: f64) -> Result<Self> {
        normalize_code(theta, rho).map(|n| n.code)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn to_cartesian(self) -> (f64, f64) {
        polar_to_cartesian(self)
    }
}

/// Index of a label within a [`LabelSet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmotionLabel(pub usize);

impl EmotionLabel {
    pub const ANGER: EmotionLabel = EmotionLabel(0);
    pub const DISGUST: EmotionLabel = EmotionLabel(1);
    pub const FEAR: EmotionLabel = EmotionLabel(2);
    pub const HAPPINESS: EmotionLabel = EmotionLabel(3);
    pub const NEUTRAL: EmotionLabel = EmotionLabel(4);
    pub const SADNESS: EmotionLabel = EmotionLabel(5);
    pub const SURPRISE: EmotionLabel = EmotionLabel(6);

    pub fn id(self) -> usize {
        self.0
    }
}

/// Ordered, duplicate-free label names with exactly one `neutral`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSet {
    names: Vec<String>,
    neutral: usize,
}

impl LabelSet {
    pub fn canonical() -> Self {
        LabelSet::new(CANONICAL_LABELS).expect("canonical labels are valid")
    }

    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let names: Vec<String> = names.into_iter().map(|s| s.as_ref().trim().to_lowercase()).collect();
        if names.len() < 2 {
            return Err(validation("need at least two labels (one of them neutral)"));
        }
        for (i, n) in names.iter().enumerate() {
            if n.is_empty() {
                return Err(validation("empty label name"));
            }
            if names[..i].contains(n) {
                return Err(validation(format!("duplicate label `{n}`")));
            }
        }
        let neutral = match names.iter().position(|n| n == "neutral") {
            Some(i) => i,
            None => return Err(validation("label set has no `neutral` label")),
        };
        Ok(LabelSet { names, neutral })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn neutral(&self) -> EmotionLabel {
        EmotionLabel(self.neutral)
    }

    pub fn name(&self, label: EmotionLabel) -> Option<&str> {
        self.names.get(label.0).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn by_name(&self, name: &str) -> Option<EmotionLabel> {
        let name = name.trim().to_lowercase();
        self.names.iter().position(|n| *n == name).map(EmotionLabel)
    }

    pub fn contains(&self, label: EmotionLabel) -> bool {
        label.0 < self.names.len()
    }

    pub fn labels(&self) -> impl Iterator<Item = EmotionLabel> + '_ {
        (0..self.names.len()).map(EmotionLabel)
    }

    /// Non-neutral labels in id order; position `i` owns direction `i`.
    pub fn emotions(&self) -> impl Iterator<Item = EmotionLabel> + '_ {
        self.labels().filter(move |l| l.0 != self.neutral)
    }
}

/// Learnable emotion directions plus the neutral radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionTable {
    labels: LabelSet,
    directions: Vec<f64>,
    threshold: f64,
}

/// Equally spaced initial directions: the i-th non-neutral label sits at
/// `2πi/(M−1)`.
pub fn init_directions<I, S>(labels: I, threshold: f64) -> Result<DirectionTable>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    DirectionTable::equally_spaced(LabelSet::new(labels)?, threshold)
}

impl DirectionTable {
    pub fn equally_spaced(labels: LabelSet, threshold: f64) -> Result<Self> {
        let count = labels.len() - 1;
        let directions = (0..count).map(|i| TAU * i as f64 / count as f64).collect();
        DirectionTable::with_directions(labels, directions, threshold)
    }

    pub fn with_directions(labels: LabelSet, directions: Vec<f64>, threshold: f64) -> Result<Self> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(validation(format!(
                "neutral threshold must lie in (0, 1), got {threshold}"
            )));
        }
        if directions.len() != labels.len() - 1 {
            return Err(validation(format!(
                "expected {} directions, got {}",
                labels.len() - 1,
                directions.len()
            )));
        }
        if directions.iter().any(|d| !d.is_finite()) {
            return Err(validation("directions must be finite"));
        }
        let directions = directions.into_iter().map(wrap_angle).collect();
        Ok(DirectionTable {
            labels,
            directions,
            threshold,
        })
    }

    pub fn canonical() -> Self {
        DirectionTable::equally_spaced(LabelSet::canonical(), DEFAULT_NEUTRAL_THRESHOLD)
            .expect("canonical table is valid")
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn directions(&self) -> &[f64] {
        &self.directions
    }

    /// Replaces the angles, wrapping each into `[0, 2π)`.
    pub fn set_directions(&mut self, directions: &[f64]) -> Result<()> {
        if directions.len() != self.directions.len() || directions.iter().any(|d| !d.is_finite()) {
            return Err(validation("direction update must keep count and be finite"));
        }
        for (dst, &src) in self.directions.iter_mut().zip(directions) {
            *dst = wrap_angle(src);
        }
        Ok(())
    }

    /// Slot of `label` in [`DirectionTable::directions`]; `None` for neutral.
    pub fn direction_index(&self, label: EmotionLabel) -> Option<usize> {
        let neutral = self.labels.neutral().0;
        match label.0 {
            id if id == neutral || id >= self.labels.len() => None,
            id if id < neutral => Some(id),
            id => Some(id - 1),
        }
    }

    pub fn label_of_direction(&self, index: usize) -> EmotionLabel {
        let neutral = self.labels.neutral().0;
        if index < neutral {
            EmotionLabel(index)
        } else {
            EmotionLabel(index + 1)
        }
    }

    pub fn direction(&self, label: EmotionLabel) -> Option<f64> {
        self.direction_index(label).map(|i| self.directions[i])
    }
}

/// A sampled condition together with the direction slot its angle came from
/// (so training can route gradients into that direction).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConditionDraw {
    pub code: EmotionCode,
    pub direction: Option<usize>,
}

/// Draws a condition.
///
/// * no label: `θ ~ U[0, 2π)`, `ρ ~ U[0, 1)` (full gamut exploration)
/// * neutral: `θ ~ U[0, 2π)`, `ρ ~ U[0, T)`
/// * emotion `c`: `θ = θ_c`, `ρ ~ U[T, 1]`
pub fn draw_condition<R: Rng + ?Sized>(
    table: &DirectionTable,
    label: Option<EmotionLabel>,
    rng: &mut R,
) -> Result<ConditionDraw> {
    let Some(label) = label else {
        return Ok(ConditionDraw {
            code: EmotionCode {
                theta: rng.gen_range(0.0..TAU),
                rho: rng.gen_range(0.0..1.0),
            },
            direction: None,
        });
    };
    if !table.labels.contains(label) {
        return Err(validation(format!(
            "unknown label id {} (label set has {})",
            label.0,
            table.labels.len()
        )));
    }
    match table.direction_index(label) {
        None => Ok(ConditionDraw {
            code: EmotionCode {
                theta: rng.gen_range(0.0..TAU),
                rho: rng.gen_range(0.0..table.threshold),
            },
            direction: None,
        }),
        Some(index) => Ok(ConditionDraw {
            code: EmotionCode {
                theta: table.directions[index],
                rho: rng.gen_range(table.threshold..=1.0),
            },
            direction: Some(index),
        }),
    }
}

pub fn sample_condition<R: Rng + ?Sized>(
    table: &DirectionTable,
    label: Option<EmotionLabel>,
    rng: &mut R,
) -> Result<EmotionCode> {
    draw_condition(table, label, rng).map(|d| d.code)
}

/// Decodes a code: neutral below the threshold, otherwise the emotion whose
/// direction is angularly closest (ties go to the lower label id).
pub fn label_for_code(table: &DirectionTable, code: EmotionCode) -> EmotionLabel {
    if code.rho < table.threshold {
        return table.labels.neutral();
    }
    let mut best = 0;
    let mut best_distance = f64::INFINITY;
    for (i, &dir) in table.directions.iter().enumerate() {
        let d = angular_distance(code.theta, dir);
        if d < best_distance - TIE_TOLERANCE {
            best = i;
            best_distance = d;
        }
    }
    table.label_of_direction(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn normalize_examples() {
        let n = normalize_code(TAU + 0.5, 0.3).unwrap();
        assert!(close(n.code.theta(), 0.5, 1e-12) && n.code.rho() == 0.3 && !n.clamped);
        let n = normalize_code(0.0, 1.0).unwrap();
        assert_eq!((n.code.theta(), n.code.rho()), (0.0, 1.0));
        // Modular oracle: -π/2 ≡ -π/2 + 2π.
        let n = normalize_code(-FRAC_PI_2, 0.5).unwrap();
        assert!(close(n.code.theta(), -FRAC_PI_2 + TAU, 1e-12));
        let n = normalize_code(1.0, 1.5).unwrap();
        assert!(n.clamped && n.code.rho() == 1.0);
        assert!(normalize_code(f64::NAN, 0.1).is_err());
        assert!(normalize_code(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn wrap_never_returns_tau() {
        assert_eq!(wrap_angle(-1e-300), 0.0);
        assert!(wrap_angle(-f64::EPSILON) < TAU);
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn cartesian_examples() {
        let p = |t, r| polar_to_cartesian(EmotionCode::new(t, r).unwrap());
        assert_eq!(p(0.0, 1.0), (1.0, 0.0));
        let (x, y) = p(FRAC_PI_2, 0.5);
        assert!(close(x, 0.0, 1e-15) && close(y, 0.5, 1e-15));
        let (x, y) = p(FRAC_PI_4, 1.0);
        assert!(close(x, 0.5f64.sqrt(), 1e-12) && close(y, 0.5f64.sqrt(), 1e-12));

        let c = cartesian_to_polar(1.0, 0.0).unwrap();
        assert_eq!((c.theta(), c.rho()), (0.0, 1.0));
        assert_eq!(cartesian_to_polar(0.0, 0.0).unwrap(), EmotionCode::ORIGIN);
        let c = cartesian_to_polar(0.70710678, 0.70710678).unwrap();
        assert!(close(c.theta(), FRAC_PI_4, 1e-9) && close(c.rho(), 1.0, 1e-8));
        assert_eq!(cartesian_to_polar(3.0, 4.0).unwrap().rho(), 1.0);
        assert!(cartesian_to_polar(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn init_direction_examples() {
        let t = init_directions(CANONICAL_LABELS, 0.2).unwrap();
        let expected: Vec<f64> = (0..6).map(|i| i as f64 * PI / 3.0).collect();
        for (a, b) in t.directions().iter().zip(&expected) {
            assert!(close(*a, *b, 1e-12));
        }
        assert_eq!(t.threshold(), 0.2);

        let t = init_directions(["happiness", "neutral"], 0.2).unwrap();
        assert_eq!(t.directions(), &[0.0]);
        let t = init_directions(["anger", "neutral", "happiness"], 0.2).unwrap();
        assert_eq!(t.directions(), &[0.0, PI]);

        assert!(init_directions(["anger", "fear"], 0.2).is_err());
        assert!(init_directions(["anger", "neutral", "anger"], 0.2).is_err());
        assert!(init_directions(["anger", "neutral"], 1.0).is_err());
        assert!(init_directions(["neutral"], 0.2).is_err());
    }

    #[test]
    fn direction_slots_skip_neutral() {
        let t = DirectionTable::canonical();
        assert_eq!(t.direction_index(EmotionLabel::NEUTRAL), None);
        assert_eq!(t.direction_index(EmotionLabel::HAPPINESS), Some(3));
        assert_eq!(t.direction_index(EmotionLabel::SADNESS), Some(4));
        for i in 0..6 {
            assert_eq!(t.direction_index(t.label_of_direction(i)), Some(i));
        }
    }

    #[test]
    fn sampling_examples() {
        let t = DirectionTable::canonical();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = sample_condition(&t, Some(EmotionLabel::NEUTRAL), &mut rng).unwrap();
        assert!(c.rho() < 0.2);
        let c = sample_condition(&t, Some(EmotionLabel::ANGER), &mut rng).unwrap();
        assert_eq!(c.theta(), t.direction(EmotionLabel::ANGER).unwrap());
        assert!(c.rho() >= 0.2);
        assert!(sample_condition(&t, Some(EmotionLabel(7)), &mut rng).is_err());

        // Uniform oracle: E[ρ] = 1/2, sd of the mean over 1e4 draws ≈ 0.0029.
        let n = 10_000;
        let mean = (0..n)
            .map(|_| sample_condition(&t, None, &mut rng).unwrap().rho())
            .sum::<f64>()
            / n as f64;
        assert!(close(mean, 0.5, 0.02), "mean rho {mean}");
    }

    #[test]
    fn decoding_examples() {
        let t = DirectionTable::canonical();
        let code = EmotionCode::new(2.3, 0.1).unwrap();
        assert_eq!(label_for_code(&t, code), EmotionLabel::NEUTRAL);
        let code = EmotionCode::new(t.direction(EmotionLabel::ANGER).unwrap(), 0.9).unwrap();
        assert_eq!(label_for_code(&t, code), EmotionLabel::ANGER);

        // Directions {0, π}: θ = π/2 is equidistant.
        let t = init_directions(["anger", "neutral", "happiness"], 0.2).unwrap();
        let code = EmotionCode::new(FRAC_PI_2, 0.5).unwrap();
        assert_eq!(label_for_code(&t, code), EmotionLabel(0));
        let code = EmotionCode::new(3.0 * FRAC_PI_2, 0.5).unwrap();
        assert_eq!(label_for_code(&t, code), EmotionLabel(0));
    }

    #[test]
    fn angular_distance_wraps() {
        assert!(close(angular_distance(0.1, TAU - 0.1), 0.2, 1e-12));
        assert!(close(angular_distance(0.0, PI), PI, 1e-12));
    }
}
