use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{
    adversarial_loss, adversarial_loss_grad, apply_edit, content_loss, content_loss_grad, landmark_loss,
    landmark_loss_grad, regressor_loss, regressor_loss_grad, regressor_target, sample_scaler_with, total_loss,
    DirectionMatrix, LossComponents, LossWeights, ScalerVector,
};
use crate::error::{Error, Result};
use crate::face::{latent_to_params, render, render_vjp, LatentCode, MixingMap, RenderConfig, RenderedImage, SemanticParams, SLOT_COUNT};
use crate::nn::{Adam, Discriminator, Landmarker, Perceptual, Regressor};

/// The auxiliary networks that stay fixed while `T` trains.
#[derive(Clone, Debug)]
pub struct FrozenNets {
    pub regressor: Regressor,
    pub landmarker: Landmarker,
    pub perceptual: Perceptual,
}

/// Everything the losses depend on besides `T` and the discriminator.
#[derive(Clone, Copy, Debug)]
pub struct EditProblem<'a> {
    pub mixing: &'a MixingMap,
    pub render: &'a RenderConfig,
    pub nets: &'a FrozenNets,
}

/// One batch element: source latent and edit strengths.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub w: LatentCode,
    pub s: ScalerVector,
}

/// Batch-mean losses and gradients with respect to the entries of `T`
/// (row-major, same layout as [`DirectionMatrix::as_slice`]).
#[derive(Clone, Debug, PartialEq)]
pub struct LossGradients {
    pub components: LossComponents,
    /// Batch-mean entropy of the regressor targets, the least value the
    /// regressor loss can take.
    pub regressor_floor: f64,
    pub total: f64,
    pub grad: Vec<f64>,
    /// Unweighted per-term gradients, in the order regressor, content,
    /// adversarial, landmark; only filled when requested.
    pub per_component: Option<[Vec<f64>; 4]>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub init_std: f64,
    pub weights: LossWeights,
    pub co_train_discriminator: bool,
    pub discriminator_learning_rate: f64,
}

impl Default for DirectionConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            batch_size: 4,
            learning_rate: 2.5e-3,
            init_std: 0.01,
            weights: LossWeights::default(),
            co_train_discriminator: true,
            discriminator_learning_rate: 1e-4,
        }
    }
}

impl DirectionConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if self.iterations == 0 || self.batch_size == 0 {
            return Err(Error::Config("iterations and batch size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.discriminator_learning_rate > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if !(self.init_std >= 0.0) {
            return Err(Error::Config("initial standard deviation must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    #[serde(flatten)]
    pub components: LossComponents,
    pub regressor_floor: f64,
    pub total: f64,
    pub discriminator: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub iterations: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub weights: LossWeights,
    #[serde(skip)]
    pub records: Vec<IterationRecord>,
    /// Filled in by callers that can measure time.
    #[serde(skip)]
    pub wall_time_secs: Option<f64>,
}

impl TrainingReport {
    /// Mean regressor loss over iterations `range`.
    pub fn mean_regressor_loss(&self, range: core::ops::Range<usize>) -> f64 {
        let r = &self.records[range];
        r.iter().map(|r| r.components.regressor).sum::<f64>() / r.len() as f64
    }

    /// Mean regressor loss above its entropy floor over iterations `range`.
    pub fn mean_regressor_excess(&self, range: core::ops::Range<usize>) -> f64 {
        let r = &self.records[range];
        r.iter().map(|r| r.components.regressor - r.regressor_floor).sum::<f64>() / r.len() as f64
    }
}

struct SampleOutput {
    components: LossComponents,
    regressor_floor: f64,
    /// `dL_k / dp'` per term.
    param_grads: [[f64; SLOT_COUNT]; 4],
    edited_params: SemanticParams,
    edited: RenderedImage,
}

fn sample_losses(
    problem: &EditProblem,
    disc: &Discriminator,
    t: &DirectionMatrix,
    sample: &Sample,
    active: [bool; 4],
) -> Result<SampleOutput> {
    let nets = problem.nets;
    let p = latent_to_params(&sample.w, problem.mixing)?;
    let x = render(&p, problem.render)?;
    let a = nets.regressor.predict(&x)?;
    let target = regressor_target(&a, &sample.s)?;
    let fx = nets.perceptual.features(&x)?;
    let hx = nets.landmarker.predict(&x)?;

    let w2 = apply_edit(&sample.w, t, &sample.s)?;
    let p2 = latent_to_params(&w2, problem.mixing)?;
    let x2 = render(&p2, problem.render)?;
    let (a2, tape_r) = nets.regressor.forward(&x2)?;
    let tape_f = nets.perceptual.forward(&x2)?;
    let fx2 = crate::nn::FeatureStack { layers: tape_f.features.clone() };
    let (d2, tape_d) = disc.forward(&x2)?;
    let (hx2, tape_h) = nets.landmarker.forward(&x2)?;

    let regressor_floor = regressor_loss(&target, &target)?;
    let components = LossComponents {
        regressor: regressor_loss(&a2, &target)?,
        content: content_loss(&fx, &fx2)?,
        adversarial: adversarial_loss(d2),
        landmark: landmark_loss(&hx, &hx2)?,
    };

    let mut pixel_grads: [Option<Vec<f64>>; 4] = [None, None, None, None];
    if active[0] {
        pixel_grads[0] = Some(nets.regressor.input_gradient(&tape_r, &regressor_loss_grad(&a2, &target)));
    }
    if active[1] {
        pixel_grads[1] = Some(nets.perceptual.input_gradient(&tape_f, &content_loss_grad(&fx, &fx2)));
    }
    if active[2] {
        pixel_grads[2] = Some(disc.input_gradient(&tape_d, adversarial_loss_grad(d2)));
    }
    if active[3] {
        pixel_grads[3] = Some(nets.landmarker.input_gradient(&tape_h, &landmark_loss_grad(&hx, &hx2)));
    }
    let mut param_grads = [[0.0; SLOT_COUNT]; 4];
    for (g, pix) in param_grads.iter_mut().zip(&pixel_grads) {
        if let Some(pix) = pix {
            *g = render_vjp(&p2, problem.render, pix)?;
        }
    }
    Ok(SampleOutput { components, regressor_floor, param_grads, edited_params: p2, edited: x2 })
}

/// Chains `dL/dp'` through the logistic and mixing map into `dL/dT`.
fn accumulate_t_grad(problem: &EditProblem, p2: &SemanticParams, s: &ScalerVector, dp: &[f64; SLOT_COUNT], scale: f64, out: &mut [f64]) {
    let mut dz = [0.0; SLOT_COUNT];
    for i in 0..SLOT_COUNT {
        dz[i] = dp[i] * p2.0[i] * (1.0 - p2.0[i]);
    }
    let dw = problem.mixing.pullback(&dz);
    let n = s.len();
    for (r, g) in dw.iter().enumerate() {
        for (c, sc) in s.0.iter().enumerate() {
            out[r * n + c] += scale * g * sc;
        }
    }
}

fn batch_losses(
    problem: &EditProblem,
    disc: &Discriminator,
    t: &DirectionMatrix,
    batch: &[Sample],
    weights: &LossWeights,
    per_component: bool,
) -> Result<(LossGradients, Vec<RenderedImage>)> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let lambdas = weights.as_array();
    let active = core::array::from_fn(|k| per_component || lambdas[k] != 0.0);
    let scale = 1.0 / batch.len() as f64;
    let len = t.as_slice().len();
    let mut components = LossComponents::default();
    let mut regressor_floor = 0.0;
    let mut grad = alloc::vec![0.0; len];
    let mut per: Option<[Vec<f64>; 4]> = per_component.then(|| core::array::from_fn(|_| alloc::vec![0.0; len]));
    let mut edited = Vec::with_capacity(batch.len());
    for sample in batch {
        let out = sample_losses(problem, disc, t, sample, active)?;
        components.add_scaled(&out.components, scale);
        regressor_floor += scale * out.regressor_floor;
        let mut dp = [0.0; SLOT_COUNT];
        for (k, g) in out.param_grads.iter().enumerate() {
            for i in 0..SLOT_COUNT {
                dp[i] += lambdas[k] * g[i];
            }
            if let Some(per) = per.as_mut() {
                accumulate_t_grad(problem, &out.edited_params, &sample.s, g, scale, &mut per[k]);
            }
        }
        accumulate_t_grad(problem, &out.edited_params, &sample.s, &dp, scale, &mut grad);
        edited.push(out.edited);
    }
    let total = total_loss(&components, weights)?;
    Ok((LossGradients { components, regressor_floor, total, grad, per_component: per }, edited))
}

/// Batch-mean losses at `T` and their gradients with respect to `T`.
pub fn loss_and_gradient(
    problem: &EditProblem,
    disc: &Discriminator,
    t: &DirectionMatrix,
    batch: &[Sample],
    weights: &LossWeights,
    per_component: bool,
) -> Result<LossGradients> {
    Ok(batch_losses(problem, disc, t, batch, weights, per_component)?.0)
}

fn sample_batch(rng: &mut ChaCha8Rng, size: usize, dim: usize, features: usize) -> Vec<Sample> {
    (0..size)
        .map(|_| Sample {
            w: LatentCode((0..dim).map(|_| StandardNormal.sample(&mut *rng)).collect()),
            s: sample_scaler_with(rng, features),
        })
        .collect()
}

/// Trains `T` with Adam under the weighted loss. The discriminator, when
/// co-trained, takes one step per iteration on fresh renderer samples
/// versus the current edited batch. Returns the final matrix, the report
/// and the final discriminator.
pub fn train_directions(
    problem: &EditProblem,
    cfg: &DirectionConfig,
    seed: u64,
) -> Result<(DirectionMatrix, TrainingReport, Discriminator)> {
    cfg.validate()?;
    let dim = problem.mixing.dim();
    let features = SLOT_COUNT;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut real_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_d15c);
    let mut t = if cfg.init_std == 0.0 {
        DirectionMatrix::zeros(dim, features)
    } else {
        DirectionMatrix::random_with(dim, features, cfg.init_std, &mut rng)?
    };
    let mut disc = Discriminator::init(problem.render.size, seed.wrapping_add(17))?;
    let mut adam = Adam::new(t.as_slice().len(), cfg.learning_rate);
    let mut disc_adam = Adam::new(disc.params().len(), cfg.discriminator_learning_rate);
    let mut records = Vec::with_capacity(cfg.iterations);
    for iteration in 0..cfg.iterations {
        let batch = sample_batch(&mut rng, cfg.batch_size, dim, features);
        let (lg, edited) = batch_losses(problem, &disc, &t, &batch, &cfg.weights, false)?;
        adam.step(t.as_mut_slice(), &lg.grad);
        if !t.is_finite() {
            return Err(Error::Diverged(alloc::format!("direction matrix became non-finite at iteration {iteration}")));
        }
        let discriminator = if cfg.co_train_discriminator {
            let real: Vec<RenderedImage> = (0..cfg.batch_size)
                .map(|_| {
                    let w = LatentCode((0..dim).map(|_| StandardNormal.sample(&mut real_rng)).collect());
                    render(&latent_to_params(&w, problem.mixing)?, problem.render)
                })
                .collect::<Result<_>>()?;
            Some(disc.train_step(&mut disc_adam, &real.iter().collect::<Vec<_>>(), &edited.iter().collect::<Vec<_>>())?)
        } else {
            None
        };
        records.push(IterationRecord { iteration, components: lg.components, regressor_floor: lg.regressor_floor, total: lg.total, discriminator });
    }
    let report = TrainingReport {
        iterations: cfg.iterations,
        batch_size: cfg.batch_size,
        learning_rate: cfg.learning_rate,
        seed,
        weights: cfg.weights,
        records,
        wall_time_secs: None,
    };
    Ok((t, report, disc))
}
