use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::sigmoid;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetKind {
    Regressor,
    Landmarker,
    Discriminator,
    Perceptual,
}

impl NetKind {
    pub fn name(self) -> &'static str {
        match self {
            NetKind::Regressor => "regressor",
            NetKind::Landmarker => "landmarker",
            NetKind::Discriminator => "discriminator",
            NetKind::Perceptual => "perceptual",
        }
    }
}

/// Stack of stride-2 3x3 convolutions with SiLU, channel doubling from
/// `base_channels`, followed by a dense head on the flattened last map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub kind: NetKind,
    pub image_size: usize,
    pub blocks: usize,
    pub base_channels: usize,
    /// Dense head width; zero means no head (features only).
    pub outputs: usize,
}

impl Architecture {
    pub fn regressor(image_size: usize, slots: usize) -> Self {
        Self { kind: NetKind::Regressor, image_size, blocks: 4, base_channels: 16, outputs: slots }
    }

    pub fn landmarker(image_size: usize, landmarks: usize) -> Self {
        Self { kind: NetKind::Landmarker, image_size, blocks: 4, base_channels: 16, outputs: 2 * landmarks }
    }

    pub fn discriminator(image_size: usize) -> Self {
        Self { kind: NetKind::Discriminator, image_size, blocks: 4, base_channels: 16, outputs: 1 }
    }

    pub fn perceptual(image_size: usize) -> Self {
        Self { kind: NetKind::Perceptual, image_size, blocks: 3, base_channels: 8, outputs: 0 }
    }

    pub fn tag(&self) -> String {
        format!(
            "{}/cnn{}x{}/{}px/{}out/v1",
            self.kind.name(),
            self.blocks,
            self.base_channels,
            self.image_size,
            self.outputs
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks == 0 || self.base_channels == 0 || self.image_size % (1 << self.blocks) != 0 {
            return Err(Error::Config(format!(
                "image size {} must be divisible by 2^{} and channels positive",
                self.image_size, self.blocks
            )));
        }
        Ok(())
    }

    fn layers(&self) -> Vec<ConvShape> {
        let mut out = Vec::with_capacity(self.blocks);
        let mut cin = 3;
        let mut size = self.image_size;
        for b in 0..self.blocks {
            let cout = self.base_channels << b;
            out.push(ConvShape { cin, cout, size_in: size });
            cin = cout;
            size /= 2;
        }
        out
    }

    /// Length of the flattened final feature map.
    pub fn flat_features(&self) -> usize {
        let last = self.base_channels << (self.blocks - 1);
        let s = self.image_size >> self.blocks;
        last * s * s
    }

    pub fn param_count(&self) -> usize {
        let conv: usize = self.layers().iter().map(|l| l.weight_len() + l.cout).sum();
        conv + self.outputs * self.flat_features() + self.outputs
    }

    pub fn input_len(&self) -> usize {
        3 * self.image_size * self.image_size
    }
}

#[derive(Clone, Copy, Debug)]
struct ConvShape {
    cin: usize,
    cout: usize,
    size_in: usize,
}

impl ConvShape {
    fn size_out(&self) -> usize {
        self.size_in / 2
    }
    fn weight_len(&self) -> usize {
        self.cout * self.cin * 9
    }
    fn col_rows(&self) -> usize {
        self.cin * 9
    }
    fn out_pixels(&self) -> usize {
        self.size_out() * self.size_out()
    }
}

#[inline]
fn silu(z: f64) -> f64 {
    z * sigmoid(z)
}

#[inline]
fn silu_grad(z: f64) -> f64 {
    let s = sigmoid(z);
    s * (1.0 + z * (1.0 - s))
}

/// `C = alpha * op(A) * op(B) + beta * C` on row-major buffers.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], a_t: bool, b: &[f64], b_t: bool, beta: f64, c: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: strides describe the row-major buffers whose lengths were
    // checked above; `c` is exclusively borrowed.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// 3x3, stride 2, padding 1.
fn im2col(x: &[f64], shape: &ConvShape, cols: &mut [f64]) {
    let (s, so) = (shape.size_in as isize, shape.size_out());
    let np = so * so;
    for c in 0..shape.cin {
        let plane = &x[c * (s * s) as usize..(c + 1) * (s * s) as usize];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut cols[(c * 9 + ky * 3 + kx) * np..(c * 9 + ky * 3 + kx + 1) * np];
                for oy in 0..so {
                    let iy = 2 * oy as isize + ky as isize - 1;
                    let dst = &mut row[oy * so..(oy + 1) * so];
                    if iy < 0 || iy >= s {
                        dst.fill(0.0);
                        continue;
                    }
                    let src = &plane[(iy * s) as usize..((iy + 1) * s) as usize];
                    for (ox, d) in dst.iter_mut().enumerate() {
                        let ix = 2 * ox as isize + kx as isize - 1;
                        *d = if ix < 0 || ix >= s { 0.0 } else { src[ix as usize] };
                    }
                }
            }
        }
    }
}

fn col2im(cols: &[f64], shape: &ConvShape, dx: &mut [f64]) {
    let (s, so) = (shape.size_in as isize, shape.size_out());
    let np = so * so;
    dx.fill(0.0);
    for c in 0..shape.cin {
        let plane = &mut dx[c * (s * s) as usize..(c + 1) * (s * s) as usize];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &cols[(c * 9 + ky * 3 + kx) * np..(c * 9 + ky * 3 + kx + 1) * np];
                for oy in 0..so {
                    let iy = 2 * oy as isize + ky as isize - 1;
                    if iy < 0 || iy >= s {
                        continue;
                    }
                    for ox in 0..so {
                        let ix = 2 * ox as isize + kx as isize - 1;
                        if ix >= 0 && ix < s {
                            plane[(iy * s + ix) as usize] += row[oy * so + ox];
                        }
                    }
                }
            }
        }
    }
}

/// Activations recorded by a forward pass, consumed by `backward`.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    cols: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    /// Post-activation map of each conv block.
    pub features: Vec<Vec<f64>>,
    /// Raw head outputs (logits); empty when the net has no head.
    pub outputs: Vec<f64>,
}

/// A convolutional network whose parameters live in one flat vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvNet {
    arch: Architecture,
    pub params: Vec<f64>,
}

impl ConvNet {
    /// He-normal convolution weights, zero biases; the head is drawn with
    /// standard deviation `head_std` (zero gives a constant network).
    pub fn init(arch: Architecture, seed: u64, head_std: f64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(arch.param_count());
        for layer in arch.layers() {
            let fan_in = (layer.cin * 9) as f64;
            let normal = Normal::new(0.0, libm::sqrt(2.0 / fan_in)).expect("finite std");
            params.extend((0..layer.weight_len()).map(|_| normal.sample(&mut rng)));
            params.extend(core::iter::repeat(0.0).take(layer.cout));
        }
        let head_w = arch.outputs * arch.flat_features();
        if head_std > 0.0 {
            let normal = Normal::new(0.0, head_std).expect("finite std");
            params.extend((0..head_w).map(|_| normal.sample(&mut rng)));
        } else {
            params.extend(core::iter::repeat(0.0).take(head_w));
        }
        params.extend(core::iter::repeat(0.0).take(arch.outputs));
        Ok(Self { arch, params })
    }

    pub fn from_params(arch: Architecture, params: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        if params.len() != arch.param_count() {
            return Err(Error::DimensionMismatch { what: "network parameters", expected: arch.param_count(), got: params.len() });
        }
        Ok(Self { arch, params })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.arch.input_len() {
            return Err(Error::DimensionMismatch { what: "network input", expected: self.arch.input_len(), got: x.len() });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Tape> {
        self.check_input(x)?;
        let layers = self.arch.layers();
        let mut tape = Tape::default();
        let mut offset = 0;
        for (i, l) in layers.iter().enumerate() {
            let np = l.out_pixels();
            let mut cols = alloc::vec![0.0; l.col_rows() * np];
            {
                let input: &[f64] = if i == 0 { x } else { &tape.features[i - 1] };
                im2col(input, l, &mut cols);
            }
            let w = &self.params[offset..offset + l.weight_len()];
            let b = &self.params[offset + l.weight_len()..offset + l.weight_len() + l.cout];
            offset += l.weight_len() + l.cout;
            let mut z = alloc::vec![0.0; l.cout * np];
            for (c, row) in z.chunks_exact_mut(np).enumerate() {
                row.fill(b[c]);
            }
            gemm(l.cout, l.col_rows(), np, w, false, &cols, false, 1.0, &mut z);
            let a: Vec<f64> = z.iter().map(|&v| silu(v)).collect();
            tape.cols.push(cols);
            tape.pre.push(z);
            tape.features.push(a);
        }
        if self.arch.outputs > 0 {
            let flat = tape.features.last().expect("at least one block");
            let nf = self.arch.flat_features();
            let w = &self.params[offset..offset + self.arch.outputs * nf];
            let b = &self.params[offset + self.arch.outputs * nf..];
            tape.outputs = b.to_vec();
            gemm(self.arch.outputs, nf, 1, w, false, flat, false, 1.0, &mut tape.outputs);
        }
        Ok(tape)
    }

    /// Back-propagates `grad_outputs` (on the head logits) and optional
    /// per-block `feature_grads` (on post-activation maps). Parameter
    /// gradients are accumulated into `param_grad` when given; returns the
    /// input gradient when `want_input`.
    pub fn backward(
        &self,
        tape: &Tape,
        grad_outputs: Option<&[f64]>,
        feature_grads: Option<&[Vec<f64>]>,
        mut param_grad: Option<&mut [f64]>,
        want_input: bool,
    ) -> Option<Vec<f64>> {
        let layers = self.arch.layers();
        let mut offsets = Vec::with_capacity(layers.len());
        let mut offset = 0;
        for l in &layers {
            offsets.push(offset);
            offset += l.weight_len() + l.cout;
        }
        let head_offset = offset;
        let last = layers.len() - 1;

        let mut grad_a = alloc::vec![0.0; tape.features[last].len()];
        if let (Some(g), true) = (grad_outputs, self.arch.outputs > 0) {
            let nf = self.arch.flat_features();
            let w = &self.params[head_offset..head_offset + self.arch.outputs * nf];
            gemm(nf, self.arch.outputs, 1, w, true, g, false, 0.0, &mut grad_a);
            if let Some(pg) = param_grad.as_deref_mut() {
                let (gw, gb) = pg[head_offset..].split_at_mut(self.arch.outputs * nf);
                gemm(self.arch.outputs, 1, nf, g, false, &tape.features[last], false, 1.0, gw);
                for (a, b) in gb.iter_mut().zip(g) {
                    *a += b;
                }
            }
        }

        for i in (0..layers.len()).rev() {
            let l = &layers[i];
            if let Some(fg) = feature_grads {
                if let Some(extra) = fg.get(i) {
                    if !extra.is_empty() {
                        for (a, b) in grad_a.iter_mut().zip(extra) {
                            *a += b;
                        }
                    }
                }
            }
            let np = l.out_pixels();
            let grad_z: Vec<f64> = grad_a.iter().zip(&tape.pre[i]).map(|(g, &z)| g * silu_grad(z)).collect();
            let off = offsets[i];
            if let Some(pg) = param_grad.as_deref_mut() {
                let (gw, rest) = pg[off..].split_at_mut(l.weight_len());
                gemm(l.cout, np, l.col_rows(), &grad_z, false, &tape.cols[i], true, 1.0, gw);
                for (c, row) in grad_z.chunks_exact(np).enumerate() {
                    rest[c] += row.iter().sum::<f64>();
                }
            }
            if i == 0 && !want_input {
                return None;
            }
            let w = &self.params[off..off + l.weight_len()];
            let mut grad_cols = alloc::vec![0.0; l.col_rows() * np];
            gemm(l.col_rows(), l.cout, np, w, true, &grad_z, false, 0.0, &mut grad_cols);
            let mut grad_in = alloc::vec![0.0; l.cin * l.size_in * l.size_in];
            col2im(&grad_cols, l, &mut grad_in);
            grad_a = grad_in;
        }
        Some(grad_a)
    }
}
