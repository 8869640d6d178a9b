//! Procedural face generator: latent prior, entangling mixing map, a
//! differentiable soft-shape renderer and closed-form landmark oracle.

mod geometry;
mod landmarks;
mod render;

use alloc::vec::Vec;
use core::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::sigmoid;

pub use geometry::{FaceGeometry, Part, PartAlphas};
pub use landmarks::{analytic_landmarks, landmark_jacobian, LandmarkSet, LANDMARK_COUNT, LANDMARK_NAMES, MIRROR_PAIRS};
pub use render::{render, render_jacobian, render_vjp, RenderConfig, RenderedImage};

/// Number of semantic slots the renderer understands.
pub const SLOT_COUNT: usize = 12;

/// Named semantic slots, in storage order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    HairDarkness,
    HairLength,
    FaceWidth,
    SkinTone,
    BrowThickness,
    NoseSize,
    EyeOpenness,
    MouthCurvature,
    MouthOpenness,
    HeadTilt,
    GazeHorizontal,
    BrowRaise,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    Appearance,
    Gesture,
}

impl Slot {
    pub const ALL: [Slot; SLOT_COUNT] = [
        Slot::HairDarkness,
        Slot::HairLength,
        Slot::FaceWidth,
        Slot::SkinTone,
        Slot::BrowThickness,
        Slot::NoseSize,
        Slot::EyeOpenness,
        Slot::MouthCurvature,
        Slot::MouthOpenness,
        Slot::HeadTilt,
        Slot::GazeHorizontal,
        Slot::BrowRaise,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Slot> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Slot::HairDarkness => "hair_darkness",
            Slot::HairLength => "hair_length",
            Slot::FaceWidth => "face_width",
            Slot::SkinTone => "skin_tone",
            Slot::BrowThickness => "brow_thickness",
            Slot::NoseSize => "nose_size",
            Slot::EyeOpenness => "eye_openness",
            Slot::MouthCurvature => "mouth_curvature",
            Slot::MouthOpenness => "mouth_openness",
            Slot::HeadTilt => "head_tilt",
            Slot::GazeHorizontal => "gaze_horizontal",
            Slot::BrowRaise => "brow_raise",
        }
    }

    pub fn from_name(name: &str) -> Option<Slot> {
        Self::ALL.iter().copied().find(|s| s.name() == name)
    }

    pub fn partition(self) -> Partition {
        if self.index() < 6 {
            Partition::Appearance
        } else {
            Partition::Gesture
        }
    }

    pub fn is_gesture(self) -> bool {
        self.partition() == Partition::Gesture
    }

    pub fn gesture_slots() -> impl Iterator<Item = Slot> {
        Self::ALL.into_iter().filter(|s| s.is_gesture())
    }

    pub fn appearance_slots() -> impl Iterator<Item = Slot> {
        Self::ALL.into_iter().filter(|s| !s.is_gesture())
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Ground-truth semantic parameters, every entry strictly inside (0, 1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemanticParams(pub [f64; SLOT_COUNT]);

impl SemanticParams {
    pub fn new(values: [f64; SLOT_COUNT]) -> Result<Self> {
        let p = Self(values);
        p.validate()?;
        Ok(p)
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let arr: [f64; SLOT_COUNT] = values.try_into().map_err(|_| Error::DimensionMismatch {
            what: "semantic params",
            expected: SLOT_COUNT,
            got: values.len(),
        })?;
        Self::new(arr)
    }

    /// All slots at 0.5: neutral, symmetric face.
    pub fn neutral() -> Self {
        Self([0.5; SLOT_COUNT])
    }

    pub fn validate(&self) -> Result<()> {
        for &v in &self.0 {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::OutOfDomain {
                    what: "semantic parameter",
                    value: v,
                    domain: "(0, 1)",
                });
            }
        }
        Ok(())
    }

    pub fn get(&self, slot: Slot) -> f64 {
        self.0[slot.index()]
    }

    pub fn with(mut self, slot: Slot, value: f64) -> Self {
        self.0[slot.index()] = value;
        self
    }
}

/// A point in the generator's latent space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentCode(pub Vec<f64>);

impl LatentCode {
    pub fn zeros(dim: usize) -> Self {
        Self(alloc::vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Standard-normal latent, deterministic per seed.
pub fn sample_latent(seed: u64, dim: usize) -> LatentCode {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    LatentCode((0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
}

/// Fixed orthogonal `d x d` matrix (row-major) that entangles the latent.
#[derive(Clone, Debug, PartialEq)]
pub struct MixingMap {
    dim: usize,
    rows: Vec<f64>,
}

impl MixingMap {
    /// Orthonormalises a seeded Gaussian matrix by modified Gram-Schmidt
    /// (two passes).
    pub fn from_seed(seed: u64, dim: usize) -> Result<Self> {
        if dim < SLOT_COUNT {
            return Err(Error::Config(alloc::format!(
                "latent dimension {dim} is smaller than the slot count {SLOT_COUNT}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows: Vec<f64> = (0..dim * dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        for i in 0..dim {
            for _pass in 0..2 {
                for j in 0..i {
                    let dot: f64 = (0..dim).map(|c| rows[i * dim + c] * rows[j * dim + c]).sum();
                    for c in 0..dim {
                        rows[i * dim + c] -= dot * rows[j * dim + c];
                    }
                }
            }
            let norm = libm::sqrt((0..dim).map(|c| rows[i * dim + c] * rows[i * dim + c]).sum());
            for c in 0..dim {
                rows[i * dim + c] /= norm;
            }
        }
        Ok(Self { dim, rows })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.rows[row * self.dim + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.rows[row * self.dim..(row + 1) * self.dim]
    }

    /// Largest absolute deviation of `M M^T` from the identity.
    pub fn orthogonality_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let dot: f64 = self.row(i).iter().zip(self.row(j)).map(|(a, b)| a * b).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    /// The first `SLOT_COUNT` entries of `M w` (the slot pre-activations).
    pub fn pre_activations(&self, w: &LatentCode) -> Result<[f64; SLOT_COUNT]> {
        if w.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                what: "latent code",
                expected: self.dim,
                got: w.dim(),
            });
        }
        let mut z = [0.0; SLOT_COUNT];
        for (i, zi) in z.iter_mut().enumerate() {
            *zi = self.row(i).iter().zip(&w.0).map(|(a, b)| a * b).sum();
        }
        Ok(z)
    }

    /// Back-propagates a gradient on the slot pre-activations to the latent.
    pub fn pullback(&self, grad_pre: &[f64; SLOT_COUNT]) -> Vec<f64> {
        let mut g = alloc::vec![0.0; self.dim];
        for (i, gi) in grad_pre.iter().enumerate() {
            for (gc, m) in g.iter_mut().zip(self.row(i)) {
                *gc += gi * m;
            }
        }
        g
    }
}

/// Smallest distance kept between a parameter and the ends of (0, 1).
const PARAM_MARGIN: f64 = 1e-15;

/// `p = logistic(M w)` restricted to the semantic slots.
pub fn latent_to_params(w: &LatentCode, m: &MixingMap) -> Result<SemanticParams> {
    let z = m.pre_activations(w)?;
    let mut p = [0.0; SLOT_COUNT];
    for (pi, zi) in p.iter_mut().zip(z) {
        if !zi.is_finite() {
            return Err(Error::OutOfDomain {
                what: "latent pre-activation",
                value: zi,
                domain: "finite reals",
            });
        }
        *pi = sigmoid(zi).clamp(PARAM_MARGIN, 1.0 - PARAM_MARGIN);
    }
    Ok(SemanticParams(p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_is_a_disjoint_cover() {
        assert_eq!(Slot::gesture_slots().count() + Slot::appearance_slots().count(), SLOT_COUNT);
        for s in Slot::ALL {
            assert_eq!(Slot::from_name(s.name()), Some(s));
            assert_eq!(Slot::from_index(s.index()), Some(s));
        }
        assert_eq!(Slot::MouthCurvature.partition(), Partition::Gesture);
        assert_eq!(Slot::NoseSize.partition(), Partition::Appearance);
    }

    #[test]
    fn mixing_map_is_orthogonal() {
        for seed in 0..5 {
            let m = MixingMap::from_seed(seed, 12).unwrap();
            assert!(m.orthogonality_error() < 1e-6);
        }
        let m = MixingMap::from_seed(3, 20).unwrap();
        assert!(m.orthogonality_error() < 1e-6);
        assert!(MixingMap::from_seed(3, 8).is_err());
    }

    #[test]
    fn zero_latent_gives_half() {
        let m = MixingMap::from_seed(7, 12).unwrap();
        let p = latent_to_params(&LatentCode::zeros(12), &m).unwrap();
        assert!(p.0.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn slot_saturates_along_its_row() {
        let m = MixingMap::from_seed(7, 12).unwrap();
        let mut prev = 0.0;
        for scale in [1.0, 10.0, 100.0, 1e6] {
            let w = LatentCode(m.row(3).iter().map(|r| r * scale).collect());
            let p = latent_to_params(&w, &m).unwrap();
            assert!(p.0[3] >= prev);
            prev = p.0[3];
            p.validate().unwrap();
        }
        assert!(prev > 1.0 - 1e-12);
    }

    #[test]
    fn matches_direct_logistic_reevaluation() {
        let m = MixingMap::from_seed(11, 12).unwrap();
        for seed in 0..20 {
            let w = sample_latent(seed, 12);
            let p = latent_to_params(&w, &m).unwrap();
            for i in 0..SLOT_COUNT {
                let mut z = 0.0;
                for c in 0..12 {
                    z += m.entry(i, c) * w.0[c];
                }
                let expect = 1.0 / (1.0 + libm::exp(-z));
                assert!((p.0[i] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let m = MixingMap::from_seed(1, 12).unwrap();
        assert!(matches!(
            latent_to_params(&LatentCode::zeros(11), &m),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn latent_sampling_is_seeded_standard_normal() {
        assert_eq!(sample_latent(5, 12), sample_latent(5, 12));
        assert_ne!(sample_latent(5, 12), sample_latent(6, 12));
        let n = 10_000;
        let mut sum = [0.0; 12];
        let mut sq = [0.0; 12];
        for seed in 0..n {
            let w = sample_latent(seed, 12);
            for c in 0..12 {
                sum[c] += w.0[c];
                sq[c] += w.0[c] * w.0[c];
            }
        }
        for c in 0..12 {
            let mean = sum[c] / n as f64;
            let var = sq[c] / n as f64 - mean * mean;
            assert!(mean.abs() < 0.05, "mean {mean}");
            assert!((0.9..=1.1).contains(&var), "var {var}");
        }
    }

    #[test]
    fn params_reject_closed_interval_values() {
        assert!(SemanticParams::new([0.5; SLOT_COUNT]).is_ok());
        assert!(SemanticParams::neutral().with(Slot::HeadTilt, 1.0).validate().is_err());
        assert!(SemanticParams::from_slice(&[0.5; 11]).is_err());
    }
}
