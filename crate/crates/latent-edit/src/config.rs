//! The run configuration: one TOML file drives every stage, individual keys
//! can be overridden with `section.key=value` strings.

use std::path::{Path, PathBuf};

use latent_edit_core::edit::{DirectionConfig, LossWeights};
use latent_edit_core::face::{RenderConfig, Slot, LANDMARK_COUNT, SLOT_COUNT};
use latent_edit_core::nn::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};

/// Overrides the configured output directory when set.
pub const OUTPUT_ROOT_ENV: &str = "LATENT_EDIT_OUTPUT_ROOT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub model: ModelConfig,
    pub dataset: DatasetConfig,
    pub networks: NetworksConfig,
    pub directions: DirectionsConfig,
    pub evaluation: EvaluationConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub latent_dim: usize,
    pub features: usize,
    pub landmarks: usize,
    pub image_size: usize,
    pub steepness: f64,
    pub mixing_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub size: usize,
    /// Sample `i` uses latent seed `first_seed + i`.
    pub first_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworksConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub validation_fraction: f64,
    pub regressor_seed: u64,
    pub landmarker_seed: u64,
    pub discriminator_seed: u64,
    pub perceptual_seed: u64,
    pub max_slot_mae: f64,
    pub max_landmark_error_px: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectionsConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub init_std: f64,
    pub seed: u64,
    pub co_train_discriminator: bool,
    pub discriminator_learning_rate: f64,
    pub weights: LossWeights,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    pub seeds: usize,
    pub first_seed: u64,
    pub targets: Vec<String>,
    pub top_k: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let d = DirectionConfig::default();
        Self {
            output_dir: PathBuf::from("runs/default"),
            model: ModelConfig {
                latent_dim: 12,
                features: SLOT_COUNT,
                landmarks: LANDMARK_COUNT,
                image_size: 64,
                steepness: 40.0,
                mixing_seed: 7,
            },
            dataset: DatasetConfig { size: 4000, first_seed: 1000 },
            networks: NetworksConfig {
                epochs: 10,
                batch_size: 32,
                learning_rate: 2e-3,
                validation_fraction: 0.1,
                regressor_seed: 11,
                landmarker_seed: 12,
                discriminator_seed: 13,
                perceptual_seed: 5,
                max_slot_mae: 0.08,
                max_landmark_error_px: 2.0,
            },
            directions: DirectionsConfig {
                iterations: d.iterations,
                batch_size: d.batch_size,
                learning_rate: d.learning_rate,
                init_std: d.init_std,
                seed: 21,
                co_train_discriminator: d.co_train_discriminator,
                discriminator_learning_rate: d.discriminator_learning_rate,
                weights: d.weights,
            },
            evaluation: EvaluationConfig {
                seeds: 256,
                first_seed: 900_000,
                targets: ["hair_darkness", "hair_length", "face_width"].map(String::from).to_vec(),
                top_k: 3,
            },
        }
    }
}

impl RunConfig {
    /// Reads a TOML file; the output root environment variable, then the
    /// overrides, take precedence over the file.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| PipelineError::io(p, e))?;
                Self::from_toml(&text)?
            }
            None => Self::default(),
        };
        if let Ok(root) = std::env::var(OUTPUT_ROOT_ENV) {
            if !root.is_empty() {
                cfg.output_dir = PathBuf::from(root);
            }
        }
        cfg = cfg.with_overrides(overrides)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Applies `dotted.key=value` overrides; values parse as TOML literals
    /// and fall back to plain strings.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        let mut root = toml::Value::try_from(self).map_err(|e| PipelineError::Config(e.to_string()))?;
        for item in overrides {
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| PipelineError::Config(format!("override `{item}` is not of the form key=value")))?;
            let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(raw.to_string()));
            let mut node = &mut root;
            let parts: Vec<&str> = key.trim().split('.').collect();
            for (i, part) in parts.iter().enumerate() {
                let table = node
                    .as_table_mut()
                    .ok_or_else(|| PipelineError::Config(format!("`{key}` does not name a config key")))?;
                let slot = table.get_mut(*part).ok_or_else(|| PipelineError::Config(format!("unknown config key `{key}`")))?;
                if i + 1 == parts.len() {
                    *slot = coerce(slot, value.clone());
                }
                node = slot;
            }
        }
        root.try_into().map_err(|e: toml::de::Error| PipelineError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(PipelineError::Config(m));
        if self.model.features != SLOT_COUNT {
            return err(format!("model.features must be {SLOT_COUNT} for this renderer, got {}", self.model.features));
        }
        if self.model.landmarks != LANDMARK_COUNT {
            return err(format!("model.landmarks must be {LANDMARK_COUNT} for this renderer, got {}", self.model.landmarks));
        }
        if self.model.latent_dim < SLOT_COUNT {
            return err(format!("model.latent_dim must be at least {SLOT_COUNT}"));
        }
        if self.model.image_size < 16 || self.model.image_size % 16 != 0 {
            return err(format!("model.image_size must be a positive multiple of 16, got {}", self.model.image_size));
        }
        if !(self.model.steepness > 0.0) {
            return err("model.steepness must be positive".into());
        }
        let counts = [
            ("dataset.size", self.dataset.size),
            ("networks.epochs", self.networks.epochs),
            ("networks.batch_size", self.networks.batch_size),
            ("directions.iterations", self.directions.iterations),
            ("directions.batch_size", self.directions.batch_size),
            ("evaluation.seeds", self.evaluation.seeds),
        ];
        for (name, v) in counts {
            if v == 0 {
                return err(format!("{name} must be positive"));
            }
        }
        if !(0.0..1.0).contains(&self.networks.validation_fraction) {
            return err("networks.validation_fraction must lie in [0, 1)".into());
        }
        if self.evaluation.top_k == 0 || self.evaluation.top_k > SLOT_COUNT {
            return err(format!("evaluation.top_k must lie in 1..={SLOT_COUNT}"));
        }
        for t in &self.evaluation.targets {
            if Slot::from_name(t).is_none() {
                return err(format!("unknown evaluation target `{t}`"));
            }
        }
        self.direction_config().validate().map_err(PipelineError::from)?;
        Ok(())
    }

    pub fn render_config(&self) -> RenderConfig {
        RenderConfig { size: self.model.image_size, steepness: self.model.steepness }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.networks.epochs,
            batch_size: self.networks.batch_size,
            learning_rate: self.networks.learning_rate,
            validation_fraction: self.networks.validation_fraction,
        }
    }

    pub fn direction_config(&self) -> DirectionConfig {
        let d = &self.directions;
        DirectionConfig {
            iterations: d.iterations,
            batch_size: d.batch_size,
            learning_rate: d.learning_rate,
            init_std: d.init_std,
            weights: d.weights,
            co_train_discriminator: d.co_train_discriminator,
            discriminator_learning_rate: d.discriminator_learning_rate,
        }
    }

    pub fn evaluation_seeds(&self) -> Vec<u64> {
        (0..self.evaluation.seeds as u64).map(|i| self.evaluation.first_seed + i).collect()
    }
}

/// Integer literals given for float keys are widened.
fn coerce(current: &toml::Value, value: toml::Value) -> toml::Value {
    match (current, value) {
        (toml::Value::Float(_), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
        (_, v) => v,
    }
}
