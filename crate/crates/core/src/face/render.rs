use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{FaceGeometry, SemanticParams, SLOT_COUNT};
use crate::error::{Error, Result};
use crate::real::{Dual, Real};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderConfig {
    /// Output is `size x size` pixels.
    pub size: usize,
    /// Logistic steepness applied to signed distances in normalized units.
    pub steepness: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self { size: 64, steepness: 40.0 }
    }
}

/// An RGB image with values in [0, 1], stored channel-planar
/// (`pixels[c * size * size + y * size + x]`).
#[derive(Clone, Debug, PartialEq)]
pub struct RenderedImage {
    pub size: usize,
    pub pixels: Vec<f64>,
}

impl RenderedImage {
    pub fn new(size: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != 3 * size * size {
            return Err(Error::DimensionMismatch {
                what: "image pixels",
                expected: 3 * size * size,
                got: pixels.len(),
            });
        }
        Ok(Self { size, pixels })
    }

    pub fn filled(size: usize, value: f64) -> Self {
        Self { size, pixels: alloc::vec![value; 3 * size * size] }
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        self.pixels[(c * self.size + y) * self.size + x]
    }

    /// Interleaved 8-bit RGB with round-half-up quantization.
    pub fn to_rgb8(&self) -> Vec<u8> {
        let n = self.size * self.size;
        let mut out = Vec::with_capacity(3 * n);
        for i in 0..n {
            for c in 0..3 {
                let v = self.pixels[c * n + i].clamp(0.0, 1.0);
                out.push(libm::floor(v * 255.0 + 0.5) as u8);
            }
        }
        out
    }

    /// Inverse of [`Self::to_rgb8`] up to quantization.
    pub fn from_rgb8(size: usize, rgb: &[u8]) -> Result<Self> {
        let n = size * size;
        if rgb.len() != 3 * n {
            return Err(Error::DimensionMismatch { what: "rgb8 buffer", expected: 3 * n, got: rgb.len() });
        }
        let mut pixels = alloc::vec![0.0; 3 * n];
        for i in 0..n {
            for c in 0..3 {
                pixels[c * n + i] = rgb[3 * i + c] as f64 / 255.0;
            }
        }
        Ok(Self { size, pixels })
    }

    /// Sum of absolute differences between the image and its left-right mirror.
    pub fn mirror_l1(&self) -> f64 {
        let s = self.size;
        let mut total = 0.0;
        for c in 0..3 {
            for y in 0..s {
                for x in 0..s {
                    total += (self.at(c, y, x) - self.at(c, y, s - 1 - x)).abs();
                }
            }
        }
        total
    }
}

#[inline]
pub(crate) fn pixel_center(i: usize, size: usize) -> f64 {
    (i as f64 + 0.5) / size as f64
}

/// Renders any scalar type; the result is channel-planar.
pub(crate) fn render_generic<R: Real>(p: &[R; SLOT_COUNT], cfg: &RenderConfig) -> Vec<R> {
    let geo = FaceGeometry::new(p, cfg.steepness);
    let s = cfg.size;
    let n = s * s;
    let mut out = alloc::vec![R::cst(0.0); 3 * n];
    for y in 0..s {
        let yc = pixel_center(y, s);
        for x in 0..s {
            let rgb = geo.shade(pixel_center(x, s), yc);
            let i = y * s + x;
            out[i] = rgb[0];
            out[n + i] = rgb[1];
            out[2 * n + i] = rgb[2];
        }
    }
    out
}

/// Deterministic image of a face.
pub fn render(p: &SemanticParams, cfg: &RenderConfig) -> Result<RenderedImage> {
    p.validate()?;
    Ok(RenderedImage { size: cfg.size, pixels: render_generic(&p.0, cfg) })
}

/// Vector-Jacobian product: given `dL/dpixel` returns `dL/dp`.
pub fn render_vjp(p: &SemanticParams, cfg: &RenderConfig, grad_pixels: &[f64]) -> Result<[f64; SLOT_COUNT]> {
    p.validate()?;
    let s = cfg.size;
    let n = s * s;
    if grad_pixels.len() != 3 * n {
        return Err(Error::DimensionMismatch { what: "pixel gradient", expected: 3 * n, got: grad_pixels.len() });
    }
    let seeds: [Dual<SLOT_COUNT>; SLOT_COUNT] = core::array::from_fn(|i| Dual::var(p.0[i], i));
    let geo = FaceGeometry::new(&seeds, cfg.steepness);
    let mut g = [0.0; SLOT_COUNT];
    for y in 0..s {
        let yc = pixel_center(y, s);
        for x in 0..s {
            let i = y * s + x;
            let weights = [grad_pixels[i], grad_pixels[n + i], grad_pixels[2 * n + i]];
            if weights.iter().all(|w| *w == 0.0) {
                continue;
            }
            let rgb = geo.shade(pixel_center(x, s), yc);
            for (c, w) in weights.iter().enumerate() {
                for (gj, dj) in g.iter_mut().zip(rgb[c].d.iter()) {
                    *gj += w * dj;
                }
            }
        }
    }
    Ok(g)
}

/// Full Jacobian `d pixel / d p`, row per pixel (channel-planar order).
pub fn render_jacobian(p: &SemanticParams, cfg: &RenderConfig) -> Result<Vec<[f64; SLOT_COUNT]>> {
    p.validate()?;
    let seeds: [Dual<SLOT_COUNT>; SLOT_COUNT] = core::array::from_fn(|i| Dual::var(p.0[i], i));
    Ok(render_generic(&seeds, cfg).into_iter().map(|d| d.d).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::face::{Part, Slot};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_params(rng: &mut ChaCha8Rng) -> SemanticParams {
        SemanticParams(core::array::from_fn(|_| rng.gen_range(0.1..0.9)))
    }

    #[test]
    fn pixels_stay_in_unit_interval_and_are_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = RenderConfig::default();
        for _ in 0..5 {
            let p = random_params(&mut rng);
            let a = render(&p, &cfg).unwrap();
            let b = render(&p, &cfg).unwrap();
            assert_eq!(a, b);
            assert!(a.pixels.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn closed_eyes_show_skin() {
        let cfg = RenderConfig::default();
        let shut = SemanticParams::neutral().with(Slot::EyeOpenness, 1e-9);
        let geo = FaceGeometry::<f64>::new(&shut.0, cfg.steepness);
        let img = render(&shut, &cfg).unwrap();
        // pixel at the left eye centre, compared with the same face minus eyes
        let (ex, ey) = geo.to_image(-0.14, 0.02);
        let (xi, yi) = ((ex * 64.0) as usize, (ey * 64.0) as usize);
        let a = geo.alphas(pixel_center(xi, 64), pixel_center(yi, 64));
        assert!(a.eyes < 1e-6 && a.pupils < 1e-6);
        // skin colour at neutral tone
        let skin = [0.98 + 0.5 * (0.42 - 0.98), 0.86 + 0.5 * (0.28 - 0.86), 0.74 + 0.5 * (0.18 - 0.74)];
        for c in 0..3 {
            let expected = skin[c];
            let got = img.at(c, yi, xi);
            // face alpha is ~1 here and no other part overlaps the eye centre
            assert!((got - expected).abs() < 1e-3, "channel {c}: {got} vs {expected}");
        }
    }

    #[test]
    fn symmetric_face_renders_mirror_symmetric() {
        let mut p = SemanticParams::neutral();
        for s in [Slot::HairDarkness, Slot::FaceWidth, Slot::EyeOpenness, Slot::MouthCurvature] {
            p = p.with(s, 0.8);
        }
        let img = render(&p, &RenderConfig::default()).unwrap();
        assert!(img.mirror_l1() < 1e-6, "{}", img.mirror_l1());
        let tilted = render(&p.with(Slot::HeadTilt, 0.7), &RenderConfig::default()).unwrap();
        assert!(tilted.mirror_l1() > 1.0);
    }

    #[test]
    fn rejects_out_of_domain_params() {
        let p = SemanticParams::neutral().with(Slot::NoseSize, 0.0);
        assert!(render(&p, &RenderConfig::default()).is_err());
    }

    #[test]
    fn rgb8_roundtrip_is_within_quantization() {
        let img = render(&SemanticParams::neutral(), &RenderConfig::default()).unwrap();
        let back = RenderedImage::from_rgb8(64, &img.to_rgb8()).unwrap();
        for (a, b) in img.pixels.iter().zip(&back.pixels) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
        let half = RenderedImage::filled(1, 0.5 / 255.0);
        assert_eq!(half.to_rgb8(), [1, 1, 1]);
    }

    /// Central differences of random pixel projections against the dual Jacobian.
    #[test]
    fn vjp_matches_finite_differences() {
        let cfg = RenderConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let n = 3 * cfg.size * cfg.size;
        for _ in 0..20 {
            let p = random_params(&mut rng);
            let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let g = render_vjp(&p, &cfg, &weights).unwrap();
            let proj = |q: &SemanticParams| -> f64 {
                render(q, &cfg).unwrap().pixels.iter().zip(&weights).map(|(a, b)| a * b).sum()
            };
            for j in 0..SLOT_COUNT {
                let h = 1e-4;
                let fd = (proj(&p.with(Slot::ALL[j], p.0[j] + h)) - proj(&p.with(Slot::ALL[j], p.0[j] - h))) / (2.0 * h);
                let rel = (fd - g[j]).abs() / fd.abs().max(g[j].abs()).max(1e-6);
                assert!(rel <= 1e-3, "slot {j}: fd {fd} vs {}", g[j]);
            }
        }
    }

    #[test]
    fn per_pixel_jacobian_matches_finite_differences() {
        let cfg = RenderConfig { size: 24, steepness: 40.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let p = random_params(&mut rng);
        let jac = render_jacobian(&p, &cfg).unwrap();
        let h = 1e-4;
        for j in 0..SLOT_COUNT {
            let plus = render(&p.with(Slot::ALL[j], p.0[j] + h), &cfg).unwrap();
            let minus = render(&p.with(Slot::ALL[j], p.0[j] - h), &cfg).unwrap();
            for (i, row) in jac.iter().enumerate() {
                let fd = (plus.pixels[i] - minus.pixels[i]) / (2.0 * h);
                let scale = fd.abs().max(row[j].abs());
                if scale < 1e-3 {
                    continue;
                }
                assert!((fd - row[j]).abs() / scale <= 1e-3, "slot {j} pixel {i}: {fd} vs {}", row[j]);
            }
        }
    }

    #[test]
    fn part_alpha_accessor_matches_fields() {
        let geo = FaceGeometry::<f64>::new(&SemanticParams::neutral().0, 40.0);
        let a = geo.alphas(0.5, 0.7);
        assert_eq!(a.get(Part::Mouth), a.mouth);
        assert_eq!(a.get(Part::Face), a.face);
    }
}
