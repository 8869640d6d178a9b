#![allow(dead_code)]

use std::path::Path;

use latent_edit::pipeline::{self, Variant};
use latent_edit::RunConfig;

/// A config small enough to run every stage in a couple of seconds.
pub fn small_config(dir: &Path) -> RunConfig {
    RunConfig::default()
        .with_overrides(&[
            format!("output_dir=\"{}\"", dir.display()),
            "model.image_size=32".into(),
            "dataset.size=40".into(),
            "networks.epochs=1".into(),
            "networks.batch_size=8".into(),
            "directions.iterations=5".into(),
            "directions.batch_size=2".into(),
            "evaluation.seeds=8".into(),
        ])
        .unwrap()
}

pub fn run_all(cfg: &RunConfig) {
    pipeline::synth_dataset(cfg).unwrap();
    pipeline::train_models(cfg).unwrap();
    pipeline::train_directions(cfg, Variant::Baseline).unwrap();
    pipeline::train_directions(cfg, Variant::Hfld).unwrap();
    pipeline::evaluate(cfg, &[], &[]).unwrap();
}
