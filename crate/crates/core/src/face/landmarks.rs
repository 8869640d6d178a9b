use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{FaceGeometry, SemanticParams, SLOT_COUNT};
use crate::error::{Error, Result};
use crate::real::{Dual, Real};

pub const LANDMARK_COUNT: usize = 16;

pub const LANDMARK_NAMES: [&str; LANDMARK_COUNT] = [
    "left_pupil",
    "right_pupil",
    "left_eye_outer",
    "left_eye_inner",
    "right_eye_inner",
    "right_eye_outer",
    "left_brow",
    "right_brow",
    "left_mouth_corner",
    "right_mouth_corner",
    "mouth_top",
    "mouth_bottom",
    "nose_tip",
    "chin",
    "left_face",
    "right_face",
];

/// Index pairs that mirror about the vertical axis of an untilted face.
pub const MIRROR_PAIRS: [(usize, usize); 6] = [(0, 1), (2, 5), (3, 4), (6, 7), (8, 9), (14, 15)];

/// Ordered 2-D keypoints in normalized image coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandmarkSet {
    pub points: Vec<[f64; 2]>,
}

impl LandmarkSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `x0, y0, x1, y1, ...`
    pub fn flatten(&self) -> Vec<f64> {
        self.points.iter().flat_map(|p| p.iter().copied()).collect()
    }

    pub fn from_flat(values: &[f64]) -> Result<Self> {
        if values.len() % 2 != 0 {
            return Err(Error::DimensionMismatch { what: "flat landmarks", expected: values.len() + 1, got: values.len() });
        }
        Ok(Self { points: values.chunks_exact(2).map(|c| [c[0], c[1]]).collect() })
    }
}

fn landmarks_generic<R: Real>(p: &[R; SLOT_COUNT]) -> [(R, R); LANDMARK_COUNT] {
    // landmark positions do not depend on edge steepness
    let geo = FaceGeometry::new(p, 1.0);
    geo.landmarks_face_frame().map(|(u, v)| geo.to_image(u, v))
}

/// Closed-form landmark positions of the rendered face.
pub fn analytic_landmarks(p: &SemanticParams) -> Result<LandmarkSet> {
    p.validate()?;
    Ok(LandmarkSet { points: landmarks_generic(&p.0).iter().map(|&(x, y)| [x, y]).collect() })
}

/// Landmarks together with `d flat_landmarks / d p` (one row per coordinate).
pub fn landmark_jacobian(p: &SemanticParams) -> Result<(LandmarkSet, Vec<[f64; SLOT_COUNT]>)> {
    p.validate()?;
    let seeds: [Dual<SLOT_COUNT>; SLOT_COUNT] = core::array::from_fn(|i| Dual::var(p.0[i], i));
    let pts = landmarks_generic(&seeds);
    let set = LandmarkSet { points: pts.iter().map(|(x, y)| [x.v, y.v]).collect() };
    let jac = pts.iter().flat_map(|(x, y)| [x.d, y.d]).collect();
    Ok((set, jac))
}
