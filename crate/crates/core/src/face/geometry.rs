use crate::real::Real;

use super::{Slot, SLOT_COUNT};

// Face-frame layout, normalized image units, origin at the face centre,
// v pointing down.
pub(crate) const CENTER: (f64, f64) = (0.5, 0.5);
pub(crate) const FACE_A: f64 = 0.34;
pub(crate) const FACE_B: f64 = 0.42;
const FACE_SCALE: f64 = 0.38;
const FACE_EXP_MIN: f64 = 1.6;
const FACE_EXP_SPAN: f64 = 2.4;

const HAIR_V: f64 = -0.08;
const HAIR_A: f64 = 0.44;
const HAIR_B: f64 = 0.46;
const HAIR_CUT_MIN: f64 = -0.30;
const HAIR_CUT_SPAN: f64 = 0.75;

pub(crate) const NOSE_V: f64 = 0.12;
const NOSE_R_MIN: f64 = 0.015;
const NOSE_R_SPAN: f64 = 0.025;

pub(crate) const EYE_U: f64 = 0.14;
pub(crate) const EYE_V: f64 = 0.04;
pub(crate) const EYE_HALF_WIDTH: f64 = 0.09;
const EYE_UPPER_SPAN: f64 = 0.23;
const EYE_LOWER_SPAN: f64 = 0.03;
const PUPIL_R: f64 = 0.035;
const PUPIL_LIFT: f64 = 0.8;
const GAZE_SPAN: f64 = 0.18;

const BROW_V: f64 = -0.215;
const BROW_RAISE_SPAN: f64 = 0.18;
const BROW_HALF_MIN: f64 = 0.01;
const BROW_HALF_SPAN: f64 = 0.02;
const BROW_HALF_LEN: f64 = 0.07;

pub(crate) const MOUTH_V: f64 = 0.20;
pub(crate) const MOUTH_HALF_WIDTH: f64 = 0.13;
const MOUTH_CURVE_SPAN: f64 = 0.2;
const MOUTH_LIP: f64 = 0.018;
const MOUTH_UPPER_SPAN: f64 = 0.03;
const MOUTH_LOWER_SPAN: f64 = 0.18;

pub(crate) const MAX_TILT_DEG: f64 = 15.0;

const BACKGROUND: [f64; 3] = [0.55, 0.62, 0.70];
const HAIR_LIGHT: [f64; 3] = [0.86, 0.72, 0.45];
const HAIR_DARK: [f64; 3] = [0.08, 0.06, 0.05];
const BROW_LIGHT: [f64; 3] = [0.55, 0.42, 0.25];
const BROW_DARK: [f64; 3] = [0.06, 0.05, 0.04];
const SKIN_LIGHT: [f64; 3] = [0.98, 0.86, 0.74];
const SKIN_DARK: [f64; 3] = [0.42, 0.28, 0.18];
const NOSE_SHADE: f64 = 0.8;
const EYE_WHITE: [f64; 3] = [0.96, 0.96, 0.94];
const PUPIL: [f64; 3] = [0.10, 0.08, 0.08];
const MOUTH: [f64; 3] = [0.62, 0.16, 0.20];

/// Renderable parts, in compositing order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Part {
    Hair,
    Face,
    Nose,
    Brows,
    Eyes,
    Pupils,
    Mouth,
}

/// Coverage of every part at one sample point.
#[derive(Clone, Copy, Debug)]
pub struct PartAlphas<R> {
    pub hair: R,
    pub face: R,
    pub nose: R,
    pub brows: R,
    pub eyes: R,
    /// Pupil disks before clipping by the eye aperture.
    pub pupil_disks: R,
    pub pupils: R,
    pub mouth: R,
}

impl<R: Real> PartAlphas<R> {
    pub fn get(&self, part: Part) -> R {
        match part {
            Part::Hair => self.hair,
            Part::Face => self.face,
            Part::Nose => self.nose,
            Part::Brows => self.brows,
            Part::Eyes => self.eyes,
            Part::Pupils => self.pupils,
            Part::Mouth => self.mouth,
        }
    }
}

fn lerp3<R: Real>(a: [f64; 3], b: [f64; 3], t: R) -> [R; 3] {
    [t * (b[0] - a[0]) + a[0], t * (b[1] - a[1]) + a[1], t * (b[2] - a[2]) + a[2]]
}

fn union<R: Real>(a: R, b: R) -> R {
    -((-a + 1.0) * (-b + 1.0)) + 1.0
}

/// Every derived quantity of one face, generic over the scalar type so the
/// same code yields values and parameter derivatives.
#[derive(Clone, Debug)]
pub struct FaceGeometry<R> {
    k: f64,
    cos: R,
    sin: R,
    face_exp: R,
    hair_cut: R,
    nose_r: R,
    eye_upper: R,
    eye_lower: R,
    gaze: R,
    pupil_v: R,
    brow_v: R,
    brow_half: R,
    mouth_curve: R,
    mouth_upper: R,
    mouth_lower: R,
    hair: [R; 3],
    brow: [R; 3],
    skin: [R; 3],
}

impl<R: Real> FaceGeometry<R> {
    pub fn new(p: &[R; SLOT_COUNT], steepness: f64) -> Self {
        let at = |s: Slot| p[s.index()];
        let angle = (at(Slot::HeadTilt) - 0.5) * (2.0 * MAX_TILT_DEG * core::f64::consts::PI / 180.0);
        let eye_open = at(Slot::EyeOpenness);
        let eye_upper = eye_open * EYE_UPPER_SPAN;
        let mouth_open = at(Slot::MouthOpenness);
        let skin = lerp3(SKIN_LIGHT, SKIN_DARK, at(Slot::SkinTone));
        Self {
            k: steepness,
            cos: angle.cos(),
            sin: angle.sin(),
            face_exp: at(Slot::FaceWidth) * FACE_EXP_SPAN + FACE_EXP_MIN,
            hair_cut: at(Slot::HairLength) * HAIR_CUT_SPAN + HAIR_CUT_MIN,
            nose_r: at(Slot::NoseSize) * NOSE_R_SPAN + NOSE_R_MIN,
            eye_upper,
            eye_lower: eye_open * EYE_LOWER_SPAN,
            gaze: (at(Slot::GazeHorizontal) - 0.5) * GAZE_SPAN,
            pupil_v: -(eye_upper * PUPIL_LIFT) + EYE_V,
            brow_v: -(at(Slot::BrowRaise) * BROW_RAISE_SPAN) + BROW_V,
            brow_half: at(Slot::BrowThickness) * BROW_HALF_SPAN + BROW_HALF_MIN,
            mouth_curve: -(at(Slot::MouthCurvature) - 0.5) * MOUTH_CURVE_SPAN,
            mouth_upper: mouth_open * MOUTH_UPPER_SPAN + MOUTH_LIP,
            mouth_lower: mouth_open * MOUTH_LOWER_SPAN + MOUTH_LIP,
            hair: lerp3(HAIR_LIGHT, HAIR_DARK, at(Slot::HairDarkness)),
            brow: lerp3(BROW_LIGHT, BROW_DARK, at(Slot::HairDarkness)),
            skin,
        }
    }

    /// Image point to face frame (inverse head rotation about the centre).
    pub fn to_face(&self, x: f64, y: f64) -> (R, R) {
        let dx = x - CENTER.0;
        let dy = y - CENTER.1;
        (self.cos * dx + self.sin * dy, self.cos * dy - self.sin * dx)
    }

    /// Face-frame point to image coordinates.
    pub fn to_image(&self, u: R, v: R) -> (R, R) {
        (self.cos * u - self.sin * v + CENTER.0, self.sin * u + self.cos * v + CENTER.1)
    }

    #[inline]
    fn step(&self, t: R) -> R {
        (t * self.k).sigmoid()
    }

    /// Coverage of the band `lo <= v <= hi`, exactly zero when `lo == hi`.
    #[inline]
    fn band(&self, v: R, lo: R, hi: R) -> R {
        self.step(hi - v) - self.step(lo - v)
    }

    fn eye(&self, u: R, v: R, side: f64) -> R {
        let t = (u - side * EYE_U) / EYE_HALF_WIDTH;
        let b = (-(t * t) + 1.0).relu();
        let b = b * b;
        self.band(v, -(self.eye_upper * b) + EYE_V, self.eye_lower * b + EYE_V)
    }

    fn pupil_disk(&self, u: R, v: R, side: f64) -> R {
        let du = u - self.gaze - side * EYE_U;
        let dv = v - self.pupil_v;
        self.step(-(du * du + dv * dv).sqrt() + PUPIL_R)
    }

    fn brow(&self, u: R, v: R, side: f64) -> R {
        let c = side * EYE_U;
        let vertical = self.band(v, self.brow_v - self.brow_half, self.brow_v + self.brow_half);
        let horizontal = self.band(u, R::cst(c - BROW_HALF_LEN), R::cst(c + BROW_HALF_LEN));
        vertical * horizontal
    }

    pub fn alphas_face_frame(&self, u: R, v: R) -> PartAlphas<R> {
        let n = self.face_exp;
        let sum = (u / FACE_A).pow_abs(n) + (v / FACE_B).pow_abs(n);
        let q = if sum.value() > 0.0 { (sum.ln() / n).exp() } else { R::cst(0.0) };
        let face = self.step((-q + 1.0) * FACE_SCALE);

        let hu = u / HAIR_A;
        let hv = (v - HAIR_V) / HAIR_B;
        let qh = (hu * hu + hv * hv).sqrt();
        let hair = self.step((-qh + 1.0) * HAIR_A) * self.step(self.hair_cut - v);

        let nv = v - NOSE_V;
        let nose = self.step(-(u * u + nv * nv).sqrt() + self.nose_r);

        let brows = union(self.brow(u, v, -1.0), self.brow(u, v, 1.0));

        let eye_l = self.eye(u, v, -1.0);
        let eye_r = self.eye(u, v, 1.0);
        let disk_l = self.pupil_disk(u, v, -1.0);
        let disk_r = self.pupil_disk(u, v, 1.0);

        let t = u / MOUTH_HALF_WIDTH;
        let bump = (-(t * t) + 1.0).relu();
        let bump = bump * bump;
        let centre = self.mouth_curve * (t * t) + MOUTH_V;
        let mouth = self.band(v, centre - self.mouth_upper * bump, centre + self.mouth_lower * bump);

        PartAlphas {
            hair,
            face,
            nose,
            brows,
            eyes: union(eye_l, eye_r),
            pupil_disks: union(disk_l, disk_r),
            pupils: union(disk_l * eye_l, disk_r * eye_r),
            mouth,
        }
    }

    pub fn alphas(&self, x: f64, y: f64) -> PartAlphas<R> {
        let (u, v) = self.to_face(x, y);
        self.alphas_face_frame(u, v)
    }

    /// RGB colour at an image point.
    pub fn shade(&self, x: f64, y: f64) -> [R; 3] {
        let a = self.alphas(x, y);
        let nose = [self.skin[0] * NOSE_SHADE, self.skin[1] * NOSE_SHADE, self.skin[2] * NOSE_SHADE];
        let mut c = [R::cst(BACKGROUND[0]), R::cst(BACKGROUND[1]), R::cst(BACKGROUND[2])];
        let over = |c: &mut [R; 3], alpha: R, col: [R; 3]| {
            for i in 0..3 {
                c[i] = c[i] + alpha * (col[i] - c[i]);
            }
        };
        let cst = |v: [f64; 3]| [R::cst(v[0]), R::cst(v[1]), R::cst(v[2])];
        over(&mut c, a.hair, self.hair);
        over(&mut c, a.face, self.skin);
        over(&mut c, a.nose, nose);
        over(&mut c, a.brows, self.brow);
        over(&mut c, a.eyes, cst(EYE_WHITE));
        over(&mut c, a.pupils, cst(PUPIL));
        over(&mut c, a.mouth, cst(MOUTH));
        c
    }

    /// Landmarks in the face frame, in canonical order.
    pub(crate) fn landmarks_face_frame(&self) -> [(R, R); 16] {
        let c = R::cst;
        let mouth_corner_v = self.mouth_curve + MOUTH_V;
        [
            (self.gaze - EYE_U, self.pupil_v),
            (self.gaze + EYE_U, self.pupil_v),
            (c(-EYE_U - EYE_HALF_WIDTH), c(EYE_V)),
            (c(-EYE_U + EYE_HALF_WIDTH), c(EYE_V)),
            (c(EYE_U - EYE_HALF_WIDTH), c(EYE_V)),
            (c(EYE_U + EYE_HALF_WIDTH), c(EYE_V)),
            (c(-EYE_U), self.brow_v),
            (c(EYE_U), self.brow_v),
            (c(-MOUTH_HALF_WIDTH), mouth_corner_v),
            (c(MOUTH_HALF_WIDTH), mouth_corner_v),
            (c(0.0), -self.mouth_upper + MOUTH_V),
            (c(0.0), self.mouth_lower + MOUTH_V),
            (c(0.0), c(NOSE_V)),
            (c(0.0), c(FACE_B)),
            (c(-FACE_A), c(0.0)),
            (c(FACE_A), c(0.0)),
        ]
    }
}
