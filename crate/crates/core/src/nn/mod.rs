//! The auxiliary networks: attribute regressor, landmark detector,
//! discriminator and fixed random perceptual extractor, with the supervised
//! training harness for the first two.

mod adam;
mod net;

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use adam::Adam;
pub use net::{Architecture, ConvNet, NetKind, Tape};

use crate::error::{Error, Result};
use crate::face::{LandmarkSet, RenderedImage, SemanticParams};
use crate::real::sigmoid;

/// Predicted (or target) attribute values in [0, 1], slot order as
/// [`SemanticParams`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeVector(pub Vec<f64>);

/// Post-activation maps of each perceptual layer.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureStack {
    pub layers: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetrics {
    /// `mean_absolute_error` (regressor) or `mean_landmark_error_px`.
    pub metric: String,
    /// Mean of `per_output_error`.
    pub validation_error: f64,
    /// Per slot (regressor) or per landmark (landmarker).
    pub per_output_error: Vec<f64>,
    pub final_train_loss: f64,
    pub epochs: usize,
    pub train_samples: usize,
    pub validation_samples: usize,
}

impl TrainingMetrics {
    pub fn worst_output_error(&self) -> f64 {
        self.per_output_error.iter().copied().fold(0.0, f64::max)
    }
}

/// Frozen parameters of one network plus provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkWeights {
    pub architecture: Architecture,
    #[serde(skip)]
    pub params: Vec<f64>,
    pub seed: u64,
    pub metrics: Option<TrainingMetrics>,
}

impl NetworkWeights {
    pub fn tag(&self) -> String {
        self.architecture.tag()
    }

    fn net(&self, expected: NetKind) -> Result<ConvNet> {
        if self.architecture.kind != expected {
            return Err(Error::Architecture { expected: expected.name().to_string(), got: self.tag() });
        }
        ConvNet::from_params(self.architecture, self.params.clone())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 12, batch_size: 32, learning_rate: 1e-3, validation_fraction: 0.1 }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Objective {
    /// Binary cross-entropy on logistic outputs.
    LogisticBce,
    /// Mean squared error on raw outputs.
    Mse,
}

fn objective_grad(obj: Objective, logits: &[f64], target: &[f64], grad: &mut [f64]) -> f64 {
    let n = logits.len() as f64;
    let mut loss = 0.0;
    for ((g, &z), &y) in grad.iter_mut().zip(logits).zip(target) {
        match obj {
            Objective::LogisticBce => {
                let a = sigmoid(z);
                // log-sum-exp form of BCE on logits
                loss += libm::fmax(z, 0.0) - z * y + libm::log1p(libm::exp(-libm::fabs(z)));
                *g = (a - y) / n;
            }
            Objective::Mse => {
                let d = z - y;
                loss += d * d;
                *g = 2.0 * d / n;
            }
        }
    }
    loss / n
}

/// Seeded split, minibatch Adam with cosine learning-rate decay.
fn fit(
    arch: Architecture,
    images: &[RenderedImage],
    targets: &[Vec<f64>],
    obj: Objective,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(ConvNet, Vec<usize>, f64)> {
    if images.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if images.len() != targets.len() {
        return Err(Error::DimensionMismatch { what: "dataset targets", expected: images.len(), got: targets.len() });
    }
    for t in targets {
        if t.len() != arch.outputs {
            return Err(Error::DimensionMismatch { what: "target vector", expected: arch.outputs, got: t.len() });
        }
    }
    if cfg.epochs == 0 || cfg.batch_size == 0 {
        return Err(Error::Config("epochs and batch size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..images.len()).collect();
    order.shuffle(&mut rng);
    let n_val = ((images.len() as f64) * cfg.validation_fraction) as usize;
    let n_val = n_val.min(images.len() - 1);
    let (val, train) = order.split_at(n_val);
    let mut train = train.to_vec();

    let mut net = ConvNet::init(arch, seed.wrapping_add(1), 0.01)?;
    let mut adam = Adam::new(net.params.len(), cfg.learning_rate);
    let steps_per_epoch = train.len().div_ceil(cfg.batch_size);
    let total_steps = (steps_per_epoch * cfg.epochs) as f64;
    let mut grad = alloc::vec![0.0; net.params.len()];
    let mut out_grad = alloc::vec![0.0; arch.outputs];
    let mut last_epoch_loss = 0.0;
    for _epoch in 0..cfg.epochs {
        train.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in train.chunks(cfg.batch_size) {
            grad.fill(0.0);
            for &i in batch {
                let tape = net.forward(&images[i].pixels)?;
                epoch_loss += objective_grad(obj, &tape.outputs, &targets[i], &mut out_grad);
                net.backward(&tape, Some(&out_grad), None, Some(&mut grad), false);
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            let progress = adam.steps() as f64 / total_steps;
            adam.lr = cfg.learning_rate * 0.5 * (1.0 + libm::cos(core::f64::consts::PI * progress));
            adam.step(&mut net.params, &grad);
        }
        last_epoch_loss = epoch_loss / train.len() as f64;
        if !last_epoch_loss.is_finite() {
            return Err(Error::Diverged(alloc::format!("training loss {last_epoch_loss}")));
        }
    }
    let held_out = if val.is_empty() { train } else { val.to_vec() };
    Ok((net, held_out, last_epoch_loss))
}

fn metrics(
    metric: &str,
    per_output: Vec<f64>,
    final_train_loss: f64,
    cfg: &TrainConfig,
    total: usize,
    held_out: usize,
) -> Result<TrainingMetrics> {
    let validation_error = per_output.iter().sum::<f64>() / per_output.len() as f64;
    if !validation_error.is_finite() {
        return Err(Error::Diverged(alloc::format!("validation error {validation_error}")));
    }
    Ok(TrainingMetrics {
        metric: metric.into(),
        validation_error,
        per_output_error: per_output,
        final_train_loss,
        epochs: cfg.epochs,
        train_samples: total - held_out.min(total - 1),
        validation_samples: held_out,
    })
}

/// Trains the attribute regressor; records held-out per-slot MAE.
pub fn train_regressor(images: &[RenderedImage], labels: &[SemanticParams], cfg: &TrainConfig, seed: u64) -> Result<NetworkWeights> {
    let size = images.first().ok_or(Error::EmptyDataset)?.size;
    let arch = Architecture::regressor(size, crate::face::SLOT_COUNT);
    let targets: Vec<Vec<f64>> = labels.iter().map(|p| p.0.to_vec()).collect();
    let (net, held_out, loss) = fit(arch, images, &targets, Objective::LogisticBce, cfg, seed)?;
    let reg = Regressor { net };
    let mut per_slot = alloc::vec![0.0; arch.outputs];
    for &i in &held_out {
        let a = reg.predict(&images[i])?;
        for (s, (p, t)) in per_slot.iter_mut().zip(a.0.iter().zip(&targets[i])) {
            *s += (p - t).abs();
        }
    }
    per_slot.iter_mut().for_each(|s| *s /= held_out.len() as f64);
    let val_count = if held_out.len() == images.len() - held_out.len() { 0 } else { held_out.len() };
    let metrics = metrics("mean_absolute_error", per_slot, loss, cfg, images.len(), val_count)?;
    Ok(NetworkWeights { architecture: arch, params: reg.net.params, seed, metrics: Some(metrics) })
}

/// Trains the landmark detector on normalized coordinates; records the
/// held-out mean Euclidean landmark error in pixels.
pub fn train_landmarker(images: &[RenderedImage], landmarks: &[LandmarkSet], cfg: &TrainConfig, seed: u64) -> Result<NetworkWeights> {
    let size = images.first().ok_or(Error::EmptyDataset)?.size;
    let k = landmarks.first().ok_or(Error::EmptyDataset)?.len();
    let arch = Architecture::landmarker(size, k);
    let targets: Vec<Vec<f64>> = landmarks.iter().map(|l| l.flatten()).collect();
    let (net, held_out, loss) = fit(arch, images, &targets, Objective::Mse, cfg, seed)?;
    let lm = Landmarker { net };
    let mut per_point = alloc::vec![0.0; k];
    for &i in &held_out {
        let pred = lm.predict(&images[i])?;
        for (j, e) in per_point.iter_mut().enumerate() {
            let (dx, dy) = (pred.points[j][0] - targets[i][2 * j], pred.points[j][1] - targets[i][2 * j + 1]);
            *e += libm::hypot(dx, dy) * size as f64;
        }
    }
    per_point.iter_mut().for_each(|e| *e /= held_out.len() as f64);
    let val_count = if held_out.len() == images.len() - held_out.len() { 0 } else { held_out.len() };
    let metrics = metrics("mean_landmark_error_px", per_point, loss, cfg, images.len(), val_count)?;
    Ok(NetworkWeights { architecture: arch, params: lm.net.params, seed, metrics: Some(metrics) })
}

/// Attribute regressor `R` with logistic outputs.
#[derive(Clone, Debug)]
pub struct Regressor {
    net: ConvNet,
}

impl Regressor {
    pub fn new(weights: &NetworkWeights) -> Result<Self> {
        Ok(Self { net: weights.net(NetKind::Regressor)? })
    }

    pub fn params(&self) -> &[f64] {
        &self.net.params
    }

    pub fn predict(&self, x: &RenderedImage) -> Result<AttributeVector> {
        Ok(self.forward(x)?.0)
    }

    pub fn forward(&self, x: &RenderedImage) -> Result<(AttributeVector, Tape)> {
        let tape = self.net.forward(&x.pixels)?;
        Ok((AttributeVector(tape.outputs.iter().map(|&z| sigmoid(z)).collect()), tape))
    }

    /// Pixel gradient of `sum_j grad[j] * A_j`.
    pub fn input_gradient(&self, tape: &Tape, grad: &[f64]) -> Vec<f64> {
        let g: Vec<f64> = tape.outputs.iter().zip(grad).map(|(&z, g)| {
            let a = sigmoid(z);
            g * a * (1.0 - a)
        }).collect();
        self.net.backward(tape, Some(&g), None, None, true).expect("input gradient requested")
    }
}

/// Landmark detector `H`; outputs are unconstrained normalized coordinates.
#[derive(Clone, Debug)]
pub struct Landmarker {
    net: ConvNet,
}

impl Landmarker {
    pub fn new(weights: &NetworkWeights) -> Result<Self> {
        Ok(Self { net: weights.net(NetKind::Landmarker)? })
    }

    pub fn params(&self) -> &[f64] {
        &self.net.params
    }

    pub fn predict(&self, x: &RenderedImage) -> Result<LandmarkSet> {
        Ok(self.forward(x)?.0)
    }

    pub fn forward(&self, x: &RenderedImage) -> Result<(LandmarkSet, Tape)> {
        let tape = self.net.forward(&x.pixels)?;
        Ok((LandmarkSet::from_flat(&tape.outputs)?, tape))
    }

    /// Pixel gradient of `sum_j grad[j] * flat_landmarks_j`.
    pub fn input_gradient(&self, tape: &Tape, grad: &[f64]) -> Vec<f64> {
        self.net.backward(tape, Some(grad), None, None, true).expect("input gradient requested")
    }
}

/// Discriminator `D`: probability that an image is a renderer sample.
#[derive(Clone, Debug)]
pub struct Discriminator {
    net: ConvNet,
}

impl Discriminator {
    /// Fresh discriminator with a zero head (scores exactly 0.5).
    pub fn init(image_size: usize, seed: u64) -> Result<Self> {
        Ok(Self { net: ConvNet::init(Architecture::discriminator(image_size), seed, 0.0)? })
    }

    pub fn new(weights: &NetworkWeights) -> Result<Self> {
        Ok(Self { net: weights.net(NetKind::Discriminator)? })
    }

    pub fn to_weights(&self, seed: u64) -> NetworkWeights {
        NetworkWeights { architecture: *self.net.architecture(), params: self.net.params.clone(), seed, metrics: None }
    }

    pub fn params(&self) -> &[f64] {
        &self.net.params
    }

    pub fn score(&self, x: &RenderedImage) -> Result<f64> {
        Ok(self.forward(x)?.0)
    }

    pub fn forward(&self, x: &RenderedImage) -> Result<(f64, Tape)> {
        let tape = self.net.forward(&x.pixels)?;
        Ok((sigmoid(tape.outputs[0]), tape))
    }

    /// Pixel gradient of `grad * D(x)`.
    pub fn input_gradient(&self, tape: &Tape, grad: f64) -> Vec<f64> {
        let d = sigmoid(tape.outputs[0]);
        self.net.backward(tape, Some(&[grad * d * (1.0 - d)]), None, None, true).expect("input gradient requested")
    }

    /// One Adam step of the real/fake cross-entropy; returns the mean loss.
    pub fn train_step(&mut self, adam: &mut Adam, real: &[&RenderedImage], fake: &[&RenderedImage]) -> Result<f64> {
        let mut grad = alloc::vec![0.0; self.net.params.len()];
        let mut out_grad = [0.0];
        let mut loss = 0.0;
        let count = (real.len() + fake.len()) as f64;
        for (images, label) in [(real, 1.0), (fake, 0.0)] {
            for x in images.iter() {
                let tape = self.net.forward(&x.pixels)?;
                loss += objective_grad(Objective::LogisticBce, &tape.outputs, &[label], &mut out_grad);
                self.net.backward(&tape, Some(&out_grad), None, Some(&mut grad), false);
            }
        }
        grad.iter_mut().for_each(|g| *g /= count);
        adam.step(&mut self.net.params, &grad);
        Ok(loss / count)
    }
}

/// Fixed random-weight perceptual extractor `F`.
#[derive(Clone, Debug)]
pub struct Perceptual {
    net: ConvNet,
}

impl Perceptual {
    pub fn from_seed(image_size: usize, seed: u64) -> Result<Self> {
        Ok(Self { net: ConvNet::init(Architecture::perceptual(image_size), seed, 0.0)? })
    }

    pub fn new(weights: &NetworkWeights) -> Result<Self> {
        Ok(Self { net: weights.net(NetKind::Perceptual)? })
    }

    pub fn params(&self) -> &[f64] {
        &self.net.params
    }

    pub fn to_weights(&self, seed: u64) -> NetworkWeights {
        NetworkWeights { architecture: *self.net.architecture(), params: self.net.params.clone(), seed, metrics: None }
    }

    pub fn features(&self, x: &RenderedImage) -> Result<FeatureStack> {
        Ok(FeatureStack { layers: self.net.forward(&x.pixels)?.features })
    }

    pub fn forward(&self, x: &RenderedImage) -> Result<Tape> {
        self.net.forward(&x.pixels)
    }

    /// Pixel gradient given gradients on every feature layer.
    pub fn input_gradient(&self, tape: &Tape, feature_grads: &[Vec<f64>]) -> Vec<f64> {
        self.net.backward(tape, None, Some(feature_grads), None, true).expect("input gradient requested")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::face::{analytic_landmarks, render, RenderConfig, SLOT_COUNT};
    use rand::Rng;

    fn small_cfg() -> RenderConfig {
        RenderConfig { size: 16, steepness: 40.0 }
    }

    #[test]
    fn constant_images_regress_to_mean_label() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 40;
        let images = alloc::vec![RenderedImage::filled(16, 0.4); n];
        let labels: Vec<SemanticParams> =
            (0..n).map(|_| SemanticParams(core::array::from_fn(|_| rng.gen_range(0.1..0.9)))).collect();
        let cfg = TrainConfig { epochs: 60, batch_size: 8, learning_rate: 1e-2, validation_fraction: 0.0 };
        let w = train_regressor(&images, &labels, &cfg, 3).unwrap();
        let pred = Regressor::new(&w).unwrap().predict(&images[0]).unwrap();
        let m = w.metrics.unwrap();
        for j in 0..SLOT_COUNT {
            let mean = labels.iter().map(|p| p.0[j]).sum::<f64>() / n as f64;
            let mad = labels.iter().map(|p| (p.0[j] - mean).abs()).sum::<f64>() / n as f64;
            assert!((pred.0[j] - mean).abs() < 0.01, "slot {j}: {} vs {mean}", pred.0[j]);
            assert!((m.per_output_error[j] - mad).abs() < 0.01);
        }
    }

    #[test]
    fn constant_landmarks_are_learned() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let target = analytic_landmarks(&SemanticParams::neutral()).unwrap();
        let images: Vec<RenderedImage> = (0..24)
            .map(|_| {
                let p = SemanticParams(core::array::from_fn(|_| rng.gen_range(0.1..0.9)));
                render(&p, &small_cfg()).unwrap()
            })
            .collect();
        let labels = alloc::vec![target.clone(); images.len()];
        let cfg = TrainConfig { epochs: 80, batch_size: 8, learning_rate: 3e-3, validation_fraction: 0.0 };
        let w = train_landmarker(&images, &labels, &cfg, 5).unwrap();
        let pred = Landmarker::new(&w).unwrap().predict(&images[3]).unwrap();
        for (a, b) in pred.flatten().iter().zip(target.flatten()) {
            assert!((a - b).abs() < 0.01);
        }
    }

    #[test]
    fn training_is_seed_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let labels: Vec<SemanticParams> =
            (0..12).map(|_| SemanticParams(core::array::from_fn(|_| rng.gen_range(0.1..0.9)))).collect();
        let images: Vec<RenderedImage> = labels.iter().map(|p| render(p, &small_cfg()).unwrap()).collect();
        let cfg = TrainConfig { epochs: 2, batch_size: 4, ..TrainConfig::default() };
        let a = train_regressor(&images, &labels, &cfg, 9).unwrap();
        let b = train_regressor(&images, &labels, &cfg, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.params, b.params);
        let c = train_regressor(&images, &labels, &cfg, 10).unwrap();
        assert_ne!(a.params, c.params);
        let lm: Vec<LandmarkSet> = labels.iter().map(|p| analytic_landmarks(p).unwrap()).collect();
        assert_eq!(train_landmarker(&images, &lm, &cfg, 1).unwrap().params, train_landmarker(&images, &lm, &cfg, 1).unwrap().params);
    }

    #[test]
    fn empty_and_inconsistent_datasets_are_rejected() {
        let cfg = TrainConfig::default();
        assert_eq!(train_regressor(&[], &[], &cfg, 0), Err(Error::EmptyDataset));
        let img = alloc::vec![RenderedImage::filled(16, 0.5)];
        assert!(matches!(train_regressor(&img, &[], &cfg, 0), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn divergence_is_reported() {
        let images = alloc::vec![RenderedImage::filled(16, 0.5); 4];
        let labels = alloc::vec![LandmarkSet { points: alloc::vec![[f64::NAN, 0.0]] }; 4];
        let cfg = TrainConfig { epochs: 1, batch_size: 2, ..TrainConfig::default() };
        assert!(matches!(train_landmarker(&images, &labels, &cfg, 0), Err(Error::Diverged(_))));
    }

    #[test]
    fn zero_head_discriminator_scores_half() {
        let d = Discriminator::init(16, 3).unwrap();
        assert_eq!(d.score(&RenderedImage::filled(16, 0.7)).unwrap(), 0.5);
    }

    #[test]
    fn warmed_up_discriminator_prefers_renders_over_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut d = Discriminator::init(16, 3).unwrap();
        let mut adam = Adam::new(d.params().len(), 1e-3);
        let sample = |rng: &mut ChaCha8Rng| {
            let p = SemanticParams(core::array::from_fn(|_| rng.gen_range(0.05..0.95)));
            render(&p, &small_cfg()).unwrap()
        };
        let noise = |rng: &mut ChaCha8Rng| RenderedImage::new(16, (0..3 * 256).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
        for _ in 0..30 {
            let real: Vec<RenderedImage> = (0..4).map(|_| sample(&mut rng)).collect();
            let fake: Vec<RenderedImage> = (0..4).map(|_| noise(&mut rng)).collect();
            d.train_step(&mut adam, &real.iter().collect::<Vec<_>>(), &fake.iter().collect::<Vec<_>>()).unwrap();
        }
        let (mut r, mut f) = (0.0, 0.0);
        for _ in 0..20 {
            r += d.score(&sample(&mut rng)).unwrap();
            f += d.score(&noise(&mut rng)).unwrap();
        }
        assert!(r > f, "{r} vs {f}");
    }

    #[test]
    fn perceptual_weights_are_seeded() {
        let a = Perceptual::from_seed(16, 42).unwrap();
        let b = Perceptual::from_seed(16, 42).unwrap();
        assert_eq!(a.net, b.net);
        let x = render(&SemanticParams::neutral(), &small_cfg()).unwrap();
        let fa = a.features(&x).unwrap();
        assert_eq!(fa, b.features(&x).unwrap());
        assert_eq!(fa.layers.len(), 3);
    }

    #[test]
    fn wrong_architecture_is_rejected() {
        let w = Perceptual::from_seed(16, 1).unwrap().to_weights(1);
        assert!(matches!(Regressor::new(&w), Err(Error::Architecture { .. })));
    }
}
