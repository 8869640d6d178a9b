//! Linear latent editing `w' = w + T s`, the four editing losses and their
//! gradients, and the direction-matrix training loop.

mod train;

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use train::{
    loss_and_gradient, train_directions, DirectionConfig, EditProblem, FrozenNets, IterationRecord, LossGradients,
    Sample, TrainingReport,
};

use crate::error::{Error, Result};
use crate::face::{LandmarkSet, LatentCode};
use crate::nn::{AttributeVector, FeatureStack};

/// Clamp applied to regressor targets and discriminator scores.
pub const LOSS_EPS: f64 = 1e-4;

/// Trainable `d x N` matrix whose column `j` is the latent direction of
/// feature `j`. Stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionMatrix {
    dim: usize,
    features: usize,
    data: Vec<f64>,
}

impl DirectionMatrix {
    pub fn zeros(dim: usize, features: usize) -> Self {
        Self { dim, features, data: alloc::vec![0.0; dim * features] }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(n, n);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    /// I.i.d. normal entries with the given standard deviation.
    pub fn random(dim: usize, features: usize, std: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::random_with(dim, features, std, &mut rng)
    }

    pub(crate) fn random_with<G: Rng>(dim: usize, features: usize, std: f64, rng: &mut G) -> Result<Self> {
        let normal = Normal::new(0.0, std)
            .map_err(|_| Error::Config(alloc::format!("invalid initial standard deviation {std}")))?;
        Ok(Self { dim, features, data: (0..dim * features).map(|_| normal.sample(rng)).collect() })
    }

    pub fn from_data(dim: usize, features: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * features {
            return Err(Error::DimensionMismatch { what: "direction matrix data", expected: dim * features, got: data.len() });
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::OutOfDomain { what: "direction matrix entry", value: *v, domain: "finite reals" });
        }
        Ok(Self { dim, features, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.features + col]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.dim).map(|r| self.get(r, col)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Per-feature edit strengths in [-1, 1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalerVector(pub Vec<f64>);

impl ScalerVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(Error::OutOfDomain { what: "scaler entry", value: *v, domain: "[-1, 1]" });
        }
        Ok(Self(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(alloc::vec![0.0; n])
    }

    /// Single nonzero entry `value` at `index`, clamped to [-1, 1].
    pub fn single(n: usize, index: usize, value: f64) -> Result<Self> {
        if index >= n {
            return Err(Error::InvalidFeature { index, count: n });
        }
        let mut s = Self::zeros(n);
        s.0[index] = value.clamp(-1.0, 1.0);
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `w + T s`.
pub fn apply_edit(w: &LatentCode, t: &DirectionMatrix, s: &ScalerVector) -> Result<LatentCode> {
    if w.dim() != t.dim {
        return Err(Error::DimensionMismatch { what: "latent code", expected: t.dim, got: w.dim() });
    }
    if s.len() != t.features {
        return Err(Error::DimensionMismatch { what: "scaler vector", expected: t.features, got: s.len() });
    }
    Ok(LatentCode(
        (0..t.dim)
            .map(|r| w.0[r] + t.data[r * t.features..(r + 1) * t.features].iter().zip(&s.0).map(|(a, b)| a * b).sum::<f64>())
            .collect(),
    ))
}

/// I.i.d. uniform [-1, 1] strengths, deterministic per seed.
pub fn sample_scaler(seed: u64, n: usize) -> ScalerVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_scaler_with(&mut rng, n)
}

pub(crate) fn sample_scaler_with<G: Rng>(rng: &mut G, n: usize) -> ScalerVector {
    ScalerVector((0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub regressor: f64,
    pub content: f64,
    pub adversarial: f64,
    pub landmark: f64,
}

impl LossWeights {
    /// Published weights, with the landmark term in pixel units at 256 px.
    pub fn paper() -> Self {
        Self { regressor: 10.0, content: 0.05, adversarial: 0.05, landmark: 0.5e6 }
    }

    /// Published weights with the landmark term rescaled to normalized coordinates at 256 px.
    pub fn rescaled() -> Self {
        Self { landmark: 0.5e6 / 256.0, ..Self::paper() }
    }

    /// Same weights without the landmark term.
    pub fn baseline(self) -> Self {
        Self { landmark: 0.0, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("regressor", self.regressor), ("content", self.content), ("adversarial", self.adversarial), ("landmark", self.landmark)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(alloc::format!("loss weight {name} must be nonnegative, got {v}")));
            }
        }
        Ok(())
    }

    fn as_array(&self) -> [f64; 4] {
        [self.regressor, self.content, self.adversarial, self.landmark]
    }
}

impl Default for LossWeights {
    /// Published weights with the landmark term tuned for 64 px.
    fn default() -> Self {
        Self { landmark: 10.0, ..Self::paper() }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossComponents {
    pub regressor: f64,
    pub content: f64,
    pub adversarial: f64,
    pub landmark: f64,
}

impl LossComponents {
    fn as_array(&self) -> [f64; 4] {
        [self.regressor, self.content, self.adversarial, self.landmark]
    }

    fn add_scaled(&mut self, other: &Self, k: f64) {
        self.regressor += k * other.regressor;
        self.content += k * other.content;
        self.adversarial += k * other.adversarial;
        self.landmark += k * other.landmark;
    }
}

/// `clamp(A + s, eps, 1 - eps)`.
pub fn regressor_target(a: &AttributeVector, s: &ScalerVector) -> Result<AttributeVector> {
    if a.0.len() != s.len() {
        return Err(Error::DimensionMismatch { what: "scaler vector", expected: a.0.len(), got: s.len() });
    }
    Ok(AttributeVector(a.0.iter().zip(&s.0).map(|(a, s)| (a + s).clamp(LOSS_EPS, 1.0 - LOSS_EPS)).collect()))
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { what, expected, got });
    }
    Ok(())
}

/// Binary cross-entropy of `pred` against `target`, mean over slots.
pub fn regressor_loss(pred: &AttributeVector, target: &AttributeVector) -> Result<f64> {
    check_len("attribute vector", target.0.len(), pred.0.len())?;
    let mut sum = 0.0;
    for (&a, &y) in pred.0.iter().zip(&target.0) {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::OutOfDomain { what: "predicted attribute", value: a, domain: "(0, 1)" });
        }
        if !(0.0..=1.0).contains(&y) {
            return Err(Error::OutOfDomain { what: "target attribute", value: y, domain: "[0, 1]" });
        }
        sum -= y * libm::log(a) + (1.0 - y) * libm::log1p(-a);
    }
    Ok(sum / pred.0.len() as f64)
}

/// Gradient of [`regressor_loss`] with respect to `pred`.
pub fn regressor_loss_grad(pred: &AttributeVector, target: &AttributeVector) -> Vec<f64> {
    let n = pred.0.len() as f64;
    pred.0.iter().zip(&target.0).map(|(&a, &y)| (a - y) / (a * (1.0 - a)) / n).collect()
}

/// Sum over layers of the Euclidean norm of the feature difference.
pub fn content_loss(x: &FeatureStack, edited: &FeatureStack) -> Result<f64> {
    check_len("feature stack layers", x.layers.len(), edited.layers.len())?;
    let mut total = 0.0;
    for (a, b) in x.layers.iter().zip(&edited.layers) {
        check_len("feature layer", a.len(), b.len())?;
        total += libm::sqrt(a.iter().zip(b).map(|(a, b)| (a - b) * (a - b)).sum::<f64>());
    }
    Ok(total)
}

/// Gradient of [`content_loss`] with respect to `edited`; zero for layers
/// that match exactly.
pub fn content_loss_grad(x: &FeatureStack, edited: &FeatureStack) -> Vec<Vec<f64>> {
    x.layers
        .iter()
        .zip(&edited.layers)
        .map(|(a, b)| {
            let norm = libm::sqrt(a.iter().zip(b).map(|(a, b)| (a - b) * (a - b)).sum::<f64>());
            if norm == 0.0 {
                alloc::vec![0.0; b.len()]
            } else {
                a.iter().zip(b).map(|(a, b)| (b - a) / norm).collect()
            }
        })
        .collect()
}

/// `log(1 - D)` with `D` clamped to `[eps, 1 - eps]`.
pub fn adversarial_loss(score: f64) -> f64 {
    libm::log1p(-score.clamp(LOSS_EPS, 1.0 - LOSS_EPS))
}

/// Derivative of [`adversarial_loss`]; zero where the clamp is active.
pub fn adversarial_loss_grad(score: f64) -> f64 {
    if score > LOSS_EPS && score < 1.0 - LOSS_EPS {
        -1.0 / (1.0 - score)
    } else {
        0.0
    }
}

/// Mean absolute difference over all `2K` flattened coordinates.
pub fn landmark_loss(x: &LandmarkSet, edited: &LandmarkSet) -> Result<f64> {
    check_len("landmark count", x.len(), edited.len())?;
    let a = x.flatten();
    let b = edited.flatten();
    Ok(a.iter().zip(&b).map(|(a, b)| (a - b).abs()).sum::<f64>() / a.len() as f64)
}

/// Subgradient of [`landmark_loss`] with respect to `edited` (zero at ties).
pub fn landmark_loss_grad(x: &LandmarkSet, edited: &LandmarkSet) -> Vec<f64> {
    let a = x.flatten();
    let b = edited.flatten();
    let n = a.len() as f64;
    a.iter()
        .zip(&b)
        .map(|(a, b)| {
            if b > a {
                1.0 / n
            } else if b < a {
                -1.0 / n
            } else {
                0.0
            }
        })
        .collect()
}

/// Weighted sum of the components.
pub fn total_loss(c: &LossComponents, w: &LossWeights) -> Result<f64> {
    const NAMES: [&str; 4] = ["regressor", "content", "adversarial", "landmark"];
    for (v, name) in c.as_array().iter().zip(NAMES) {
        if !v.is_finite() {
            return Err(Error::NonFiniteLoss(name));
        }
    }
    Ok(c.as_array().iter().zip(w.as_array()).map(|(c, w)| c * w).sum())
}
