//! The pipeline stages. Each reads its inputs from the output root, writes
//! its artifacts there and records them in the run manifest.

use std::path::PathBuf;
use std::time::Instant;

use latent_edit_core::edit::{apply_edit, train_directions as fit_directions, EditProblem, FrozenNets, ScalerVector};
use latent_edit_core::eval::{emotion_proxy, evaluate_target, gesture_drift, ChangeTable, EmotionVector, EvalContext, OppositeSetPair, TargetReport};
use latent_edit_core::face::{analytic_landmarks, latent_to_params, render, sample_latent, LandmarkSet, MixingMap, RenderConfig, RenderedImage, SemanticParams, Slot};
use latent_edit_core::nn::{train_landmarker, train_regressor, Discriminator, Landmarker, NetworkWeights, Perceptual, Regressor};
use serde::{Deserialize, Serialize};

use crate::artifacts::{
    self, append_jsonl, load_matrix, load_weights, read_jsonl, record_stage, save_matrix, save_weights, write_json,
    write_jsonl, write_png, Layout, MatrixSidecar,
};
use crate::config::RunConfig;
use crate::error::{PipelineError, Result};

pub const REGRESSOR: &str = "regressor";
pub const LANDMARKER: &str = "landmarker";
pub const DISCRIMINATOR: &str = "discriminator";
pub const PERCEPTUAL: &str = "perceptual";

/// Direction-training variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// No landmark loss.
    Baseline,
    /// Landmark loss at the configured weight.
    Hfld,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Hfld => "hfld",
        }
    }
}

/// Shared generator state derived from the config.
pub struct Generator {
    pub mixing: MixingMap,
    pub render: RenderConfig,
    pub latent_dim: usize,
}

impl Generator {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        Ok(Self {
            mixing: MixingMap::from_seed(cfg.model.mixing_seed, cfg.model.latent_dim)?,
            render: cfg.render_config(),
            latent_dim: cfg.model.latent_dim,
        })
    }

    pub fn context(&self) -> EvalContext<'_> {
        EvalContext { mixing: &self.mixing, render: &self.render }
    }

    /// Oracle parameters, image and landmarks of a seed's latent.
    pub fn sample(&self, seed: u64) -> Result<(SemanticParams, RenderedImage, LandmarkSet)> {
        let p = latent_to_params(&sample_latent(seed, self.latent_dim), &self.mixing)?;
        Ok((p, render(&p, &self.render)?, analytic_landmarks(&p)?))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub index: usize,
    pub seed: u64,
    pub file: String,
    pub params: SemanticParams,
    pub landmarks: LandmarkSet,
}

pub fn synth_dataset(cfg: &RunConfig) -> Result<Vec<DatasetRecord>> {
    let layout = Layout::new(&cfg.output_dir);
    let generator = Generator::new(cfg)?;
    let dir = layout.dataset_dir();
    let mut records = Vec::with_capacity(cfg.dataset.size);
    let mut files = Vec::with_capacity(cfg.dataset.size + 1);
    for index in 0..cfg.dataset.size {
        let seed = cfg.dataset.first_seed + index as u64;
        let (params, image, landmarks) = generator.sample(seed)?;
        let file = format!("images/{index:06}.png");
        let path = dir.join(&file);
        write_png(&path, &image)?;
        files.push(path);
        records.push(DatasetRecord { index, seed, file, params, landmarks });
    }
    let manifest = layout.dataset_manifest();
    write_jsonl(&manifest, &records)?;
    files.push(manifest);
    record_stage(&layout, "synth-dataset", &files)?;
    Ok(records)
}

/// Manifest records and their decoded images.
pub fn load_dataset(cfg: &RunConfig) -> Result<(Vec<DatasetRecord>, Vec<RenderedImage>)> {
    let layout = Layout::new(&cfg.output_dir);
    let manifest = layout.dataset_manifest();
    if !manifest.exists() {
        return Err(PipelineError::Missing { what: "dataset manifest", path: manifest });
    }
    let records: Vec<DatasetRecord> = read_jsonl(&manifest)?;
    if records.is_empty() {
        return Err(PipelineError::format(&manifest, "dataset is empty"));
    }
    let images = records
        .iter()
        .map(|r| artifacts::read_png(&layout.dataset_dir().join(&r.file)))
        .collect::<Result<Vec<_>>>()?;
    if let Some(img) = images.iter().find(|i| i.size != cfg.model.image_size) {
        return Err(PipelineError::Config(format!("dataset images are {}px, config expects {}px", img.size, cfg.model.image_size)));
    }
    Ok((records, images))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelsSummary {
    pub regressor: NetworkWeights,
    pub landmarker: NetworkWeights,
    pub regressor_ok: bool,
    pub landmarker_ok: bool,
}

pub fn train_models(cfg: &RunConfig) -> Result<ModelsSummary> {
    let layout = Layout::new(&cfg.output_dir);
    let (records, images) = load_dataset(cfg)?;
    let tc = cfg.train_config();
    let params: Vec<SemanticParams> = records.iter().map(|r| r.params).collect();
    let landmarks: Vec<LandmarkSet> = records.iter().map(|r| r.landmarks.clone()).collect();
    let regressor = train_regressor(&images, &params, &tc, cfg.networks.regressor_seed)?;
    let landmarker = train_landmarker(&images, &landmarks, &tc, cfg.networks.landmarker_seed)?;
    let worst = |w: &NetworkWeights| w.metrics.as_ref().map_or(f64::INFINITY, |m| m.worst_output_error());
    let mean = |w: &NetworkWeights| w.metrics.as_ref().map_or(f64::INFINITY, |m| m.validation_error);
    let regressor_ok = worst(&regressor) <= cfg.networks.max_slot_mae;
    let landmarker_ok = mean(&landmarker) <= cfg.networks.max_landmark_error_px;

    let dir = layout.models_dir();
    let size = cfg.model.image_size;
    let disc = Discriminator::init(size, cfg.networks.discriminator_seed)?.to_weights(cfg.networks.discriminator_seed);
    let perc = Perceptual::from_seed(size, cfg.networks.perceptual_seed)?.to_weights(cfg.networks.perceptual_seed);
    let mut files = save_weights(&dir, REGRESSOR, &regressor, Some(regressor_ok))?;
    files.extend(save_weights(&dir, LANDMARKER, &landmarker, Some(landmarker_ok))?);
    files.extend(save_weights(&dir, DISCRIMINATOR, &disc, None)?);
    files.extend(save_weights(&dir, PERCEPTUAL, &perc, None)?);
    record_stage(&layout, "train-models", &files)?;
    Ok(ModelsSummary { regressor, landmarker, regressor_ok, landmarker_ok })
}

pub fn load_frozen_nets(cfg: &RunConfig) -> Result<FrozenNets> {
    let dir = Layout::new(&cfg.output_dir).models_dir();
    Ok(FrozenNets {
        regressor: Regressor::new(&load_weights(&dir, REGRESSOR)?)?,
        landmarker: Landmarker::new(&load_weights(&dir, LANDMARKER)?)?,
        perceptual: Perceptual::new(&load_weights(&dir, PERCEPTUAL)?)?,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DirectionsSummary {
    pub sidecar: MatrixSidecar,
    pub first_regressor_loss: f64,
    pub final_regressor_loss: f64,
    pub wall_time_secs: f64,
}

pub fn train_directions(cfg: &RunConfig, variant: Variant) -> Result<DirectionsSummary> {
    let layout = Layout::new(&cfg.output_dir);
    let generator = Generator::new(cfg)?;
    let nets = load_frozen_nets(cfg)?;
    let mut dc = cfg.direction_config();
    if variant == Variant::Baseline {
        dc.weights = dc.weights.baseline();
    }
    let problem = EditProblem { mixing: &generator.mixing, render: &generator.render, nets: &nets };
    let start = Instant::now();
    let (t, report, _) = fit_directions(&problem, &dc, cfg.directions.seed)?;
    let wall_time_secs = start.elapsed().as_secs_f64();

    let id = variant.name();
    let dir = layout.matrices_dir();
    let report_file = format!("{id}.report.jsonl");
    let sidecar = MatrixSidecar {
        format_version: artifacts::FORMAT_VERSION,
        id: id.to_string(),
        variant: id.to_string(),
        dim: t.dim(),
        features: t.features(),
        weights: dc.weights,
        seed: cfg.directions.seed,
        iterations: report.iterations,
        batch_size: report.batch_size,
        learning_rate: report.learning_rate,
        init_std: dc.init_std,
        co_train_discriminator: dc.co_train_discriminator,
        blob: format!("{id}.bin"),
        blob_sha256: String::new(),
        report: report_file.clone(),
    };
    let mut files = save_matrix(&dir, &sidecar, &t)?;
    let report_path = dir.join(&report_file);
    write_jsonl(&report_path, &report.records)?;
    files.push(report_path);
    record_stage(&layout, &format!("train-directions-{id}"), &files)?;
    let (sidecar, _) = load_matrix(&dir, id)?;
    let n = report.records.len();
    Ok(DirectionsSummary {
        sidecar,
        first_regressor_loss: report.mean_regressor_loss(0..1),
        final_regressor_loss: report.mean_regressor_loss(n.saturating_sub(100)..n),
        wall_time_secs,
    })
}

/// One generated image with labels carried over from the edited latent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentRecord {
    pub source_seed: u64,
    pub matrix_id: String,
    pub scaler: Vec<f64>,
    pub file: String,
    pub params: SemanticParams,
    pub landmarks: LandmarkSet,
    pub emotion: EmotionVector,
    pub gesture_drift: f64,
}

/// Parses `name=strength` edit specs.
pub fn parse_edit(spec: &str) -> Result<(Slot, f64)> {
    let (name, value) = spec
        .split_once('=')
        .ok_or_else(|| PipelineError::Argument(format!("edit `{spec}` is not of the form feature=strength")))?;
    let slot = Slot::from_name(name.trim()).ok_or_else(|| PipelineError::Argument(format!("unknown feature `{}`", name.trim())))?;
    let strength: f64 = value.trim().parse().map_err(|_| PipelineError::Argument(format!("strength `{value}` is not a number")))?;
    if !(-1.0..=1.0).contains(&strength) {
        return Err(PipelineError::Argument(format!("strength {strength} for `{name}` is outside [-1, 1]")));
    }
    Ok((slot, strength))
}

/// Parses `a..b` (exclusive) or a comma-separated list.
pub fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    let bad = || PipelineError::Argument(format!("seed list `{spec}` is neither a..b nor comma-separated integers"));
    if let Some((a, b)) = spec.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        return Ok((a..b).collect());
    }
    spec.split(',').filter(|s| !s.trim().is_empty()).map(|s| s.trim().parse().map_err(|_| bad())).collect()
}

pub fn augment(cfg: &RunConfig, matrix_id: &str, seeds: &[u64], edits: &[(Slot, f64)], name: &str) -> Result<Vec<AugmentRecord>> {
    let layout = Layout::new(&cfg.output_dir);
    let generator = Generator::new(cfg)?;
    let (_, t) = load_matrix(&layout.matrices_dir(), matrix_id)?;
    let dir = layout.augment_dir(name);
    let n = t.features();
    let scalers: Vec<ScalerVector> = if edits.is_empty() {
        vec![ScalerVector::zeros(n)]
    } else {
        edits.iter().map(|&(slot, v)| ScalerVector::single(n, slot.index(), v)).collect::<latent_edit_core::Result<_>>()?
    };
    let mut records = Vec::new();
    let mut files = Vec::new();
    for &seed in seeds {
        let w = sample_latent(seed, generator.latent_dim);
        let original = latent_to_params(&w, &generator.mixing)?;
        for (k, s) in scalers.iter().enumerate() {
            let p = latent_to_params(&apply_edit(&w, &t, s)?, &generator.mixing)?;
            let file = format!("images/{matrix_id}_{seed}_{k}.png");
            let path = dir.join(&file);
            write_png(&path, &render(&p, &generator.render)?)?;
            files.push(path);
            records.push(AugmentRecord {
                source_seed: seed,
                matrix_id: matrix_id.to_string(),
                scaler: s.0.clone(),
                file,
                params: p,
                landmarks: analytic_landmarks(&p)?,
                emotion: emotion_proxy(&p),
                gesture_drift: gesture_drift(&original, &p),
            });
        }
    }
    let manifest = dir.join("manifest.jsonl");
    append_jsonl(&manifest, &records)?;
    files.push(manifest);
    record_stage(&layout, &format!("augment-{name}"), &files)?;
    Ok(records)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationEntry {
    pub matrix: String,
    pub variant: String,
    pub target: String,
    pub mean_gesture_ratio: f64,
    pub pair_file: String,
    pub report: TargetReport,
}

/// Candidate matrix measured against the reference on one target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub reference: String,
    pub candidate: String,
    pub target: String,
    pub gesture_ratio_reference: f64,
    pub gesture_ratio_candidate: f64,
    pub gesture_ratio_reduction: f64,
    pub landmark_displacement_reference: f64,
    pub landmark_displacement_candidate: f64,
    pub landmark_displacement_reduction: f64,
    pub emotion_reference: EmotionVector,
    pub emotion_candidate: EmotionVector,
    pub emotion_reduction: EmotionVector,
    /// Candidate target change over reference target change.
    pub editability: f64,
}

/// Aggregates of every comparison of one candidate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub reference: String,
    pub candidate: String,
    pub gesture_ratio_lower_for_every_target: bool,
    pub mean_gesture_ratio_reduction: f64,
    /// Reduction of the target-averaged landmark displacement.
    pub landmark_displacement_reduction: f64,
    /// Reduction of each target-averaged emotion disturbance.
    pub emotion_reduction: EmotionVector,
    pub emotions_reduced: usize,
    pub min_editability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub seeds: usize,
    pub first_seed: u64,
    pub entries: Vec<EvaluationEntry>,
    pub comparisons: Vec<Comparison>,
    pub summaries: Vec<ComparisonSummary>,
}

fn reduction(reference: f64, candidate: f64) -> f64 {
    if reference == 0.0 {
        0.0
    } else {
        1.0 - candidate / reference
    }
}

fn compare(reference: &EvaluationEntry, candidate: &EvaluationEntry) -> Comparison {
    let (er, ec) = (reference.report.emotions.as_array(), candidate.report.emotions.as_array());
    Comparison {
        reference: reference.matrix.clone(),
        candidate: candidate.matrix.clone(),
        target: reference.target.clone(),
        gesture_ratio_reference: reference.mean_gesture_ratio,
        gesture_ratio_candidate: candidate.mean_gesture_ratio,
        gesture_ratio_reduction: reduction(reference.mean_gesture_ratio, candidate.mean_gesture_ratio),
        landmark_displacement_reference: reference.report.landmark_displacement,
        landmark_displacement_candidate: candidate.report.landmark_displacement,
        landmark_displacement_reduction: reduction(reference.report.landmark_displacement, candidate.report.landmark_displacement),
        emotion_reference: reference.report.emotions,
        emotion_candidate: candidate.report.emotions,
        emotion_reduction: EmotionVector::from_array(std::array::from_fn(|k| reduction(er[k], ec[k]))),
        editability: candidate.report.oracle.target_delta / reference.report.oracle.target_delta,
    }
}

fn summarize(comparisons: &[&Comparison]) -> ComparisonSummary {
    let n = comparisons.len() as f64;
    let mean = |f: &dyn Fn(&Comparison) -> f64| comparisons.iter().map(|c| f(c)).sum::<f64>() / n;
    let er: [f64; 4] = std::array::from_fn(|k| mean(&|c| c.emotion_reference.as_array()[k]));
    let ec: [f64; 4] = std::array::from_fn(|k| mean(&|c| c.emotion_candidate.as_array()[k]));
    let emotion_reduction: [f64; 4] = std::array::from_fn(|k| reduction(er[k], ec[k]));
    ComparisonSummary {
        reference: comparisons[0].reference.clone(),
        candidate: comparisons[0].candidate.clone(),
        gesture_ratio_lower_for_every_target: comparisons.iter().all(|c| c.gesture_ratio_candidate < c.gesture_ratio_reference),
        mean_gesture_ratio_reduction: mean(&|c| c.gesture_ratio_reduction),
        landmark_displacement_reduction: reduction(
            mean(&|c| c.landmark_displacement_reference),
            mean(&|c| c.landmark_displacement_candidate),
        ),
        emotion_reduction: EmotionVector::from_array(emotion_reduction),
        emotions_reduced: emotion_reduction.iter().filter(|r| **r > 0.0).count(),
        min_editability: comparisons.iter().map(|c| c.editability).fold(f64::INFINITY, f64::min),
    }
}

/// Evaluates every (matrix, target) pair; the first baseline matrix (or
/// the first listed) is the reference for comparisons.
pub fn evaluate(cfg: &RunConfig, matrix_ids: &[String], targets: &[String]) -> Result<EvaluationReport> {
    let layout = Layout::new(&cfg.output_dir);
    let generator = Generator::new(cfg)?;
    let ctx = generator.context();
    let regressor = Regressor::new(&load_weights(&layout.models_dir(), REGRESSOR)?)?;
    let ids: Vec<String> = if matrix_ids.is_empty() {
        artifacts::list_matrices(&layout.matrices_dir())?.into_iter().map(|s| s.id).collect()
    } else {
        matrix_ids.to_vec()
    };
    if ids.is_empty() {
        return Err(PipelineError::Missing { what: "direction matrix", path: layout.matrices_dir() });
    }
    let targets: Vec<String> = if targets.is_empty() { cfg.evaluation.targets.clone() } else { targets.to_vec() };
    let seeds = cfg.evaluation_seeds();
    let reports = layout.reports_dir();
    let mut entries = Vec::new();
    let mut files = Vec::new();
    for id in &ids {
        let (sidecar, t) = load_matrix(&layout.matrices_dir(), id)?;
        for target in &targets {
            let slot = Slot::from_name(target).ok_or_else(|| PipelineError::Argument(format!("unknown target feature `{target}`")))?;
            let (report, pair) = evaluate_target(&t, slot.index(), &seeds, Some(&regressor), &ctx, cfg.evaluation.top_k)?;
            let pair_file = format!("pairs/{id}__{target}.json");
            let pair_path = reports.join(&pair_file);
            write_json(&pair_path, &pair)?;
            files.push(pair_path);
            entries.push(EvaluationEntry {
                matrix: id.clone(),
                variant: sidecar.variant.clone(),
                target: target.clone(),
                mean_gesture_ratio: report.gestures.mean_ratio(),
                pair_file,
                report,
            });
        }
    }
    let reference = entries.iter().find(|e| e.variant == Variant::Baseline.name()).unwrap_or(&entries[0]).matrix.clone();
    let mut comparisons = Vec::new();
    for target in &targets {
        let base = entries.iter().find(|e| e.matrix == reference && &e.target == target).expect("reference entry");
        for e in entries.iter().filter(|e| e.matrix != reference && &e.target == target) {
            comparisons.push(compare(base, e));
        }
    }
    let mut summaries = Vec::new();
    for id in ids.iter().filter(|id| **id != reference) {
        let mine: Vec<&Comparison> = comparisons.iter().filter(|c| &c.candidate == id).collect();
        if !mine.is_empty() {
            summaries.push(summarize(&mine));
        }
    }
    let report = EvaluationReport { seeds: seeds.len(), first_seed: cfg.evaluation.first_seed, entries, comparisons, summaries };
    let json = reports.join("evaluation.json");
    write_json(&json, &report)?;
    let csv = reports.join("evaluation.csv");
    artifacts::write_file(&csv, render_csv(&report).as_bytes())?;
    let md = reports.join("evaluation.md");
    artifacts::write_file(&md, render_markdown(&report).as_bytes())?;
    files.extend([json, csv, md]);
    record_stage(&layout, "evaluate", &files)?;
    Ok(report)
}

/// Recomputes one entry's report from its persisted opposite-set pair.
pub fn recompute_entry(cfg: &RunConfig, pair: &OppositeSetPair) -> Result<TargetReport> {
    let layout = Layout::new(&cfg.output_dir);
    let generator = Generator::new(cfg)?;
    let ctx = generator.context();
    let regressor = Regressor::new(&load_weights(&layout.models_dir(), REGRESSOR)?)?;
    use latent_edit_core::eval::{change_table, emotion_disturbance, gesture_table, landmark_displacement, top_k, AttributeSource};
    let oracle = change_table(pair, AttributeSource::Oracle, &ctx)?;
    Ok(TargetReport {
        target: pair.target,
        top_k: top_k(&oracle, cfg.evaluation.top_k)?,
        regressor: Some(change_table(pair, AttributeSource::Regressor(&regressor), &ctx)?),
        gestures: gesture_table(pair, &ctx)?,
        emotions: emotion_disturbance(pair, &ctx)?,
        landmark_displacement: landmark_displacement(pair, &ctx)?,
        oracle,
    })
}

fn table_rows(out: &mut String, e: &EvaluationEntry, source: &str, table: &ChangeTable) {
    for (i, &slot) in table.slots.iter().enumerate() {
        let name = Slot::from_index(slot).map_or("?", Slot::name);
        out.push_str(&format!("{},{},{},{},{},{}\n", e.matrix, e.target, source, name, table.deltas[i], table.ratios[i]));
    }
}

pub fn render_csv(report: &EvaluationReport) -> String {
    let mut out = String::from("matrix,target,source,feature,delta,ratio\n");
    for e in &report.entries {
        table_rows(&mut out, e, "oracle", &e.report.oracle);
        if let Some(r) = &e.report.regressor {
            table_rows(&mut out, e, "regressor", r);
        }
    }
    out
}

pub fn render_markdown(report: &EvaluationReport) -> String {
    let mut out = format!("# Evaluation\n\n{} seeds starting at {}.\n\n", report.seeds, report.first_seed);
    for e in &report.entries {
        out.push_str(&format!("## {} / {}\n\n| feature | oracle ratio | regressor ratio |\n|---|---|---|\n", e.matrix, e.target));
        for (i, &slot) in e.report.oracle.slots.iter().enumerate() {
            let reg = e.report.regressor.as_ref().map_or(String::from("-"), |r| format!("{:.4}", r.ratios[i]));
            out.push_str(&format!("| {} | {:.4} | {} |\n", Slot::from_index(slot).map_or("?", Slot::name), e.report.oracle.ratios[i], reg));
        }
        let top: Vec<&str> = e.report.top_k.iter().filter_map(|&s| Slot::from_index(s).map(Slot::name)).collect();
        let em = e.report.emotions;
        out.push_str(&format!(
            "\nTarget change {:.4}; mean gesture ratio {:.4}; landmark displacement {:.5}; top-k {}.\nEmotion disturbance: happy {:.4}, surprised {:.4}, sad {:.4}, neutral {:.4}.\n\n",
            e.report.oracle.target_delta, e.mean_gesture_ratio, e.report.landmark_displacement, top.join(", "), em.happy, em.surprised, em.sad, em.neutral
        ));
    }
    if !report.comparisons.is_empty() {
        out.push_str("## Comparisons\n\n| reference | candidate | target | gesture ratio | reduction | landmark displacement | reduction | editability |\n|---|---|---|---|---|---|---|---|\n");
        for c in &report.comparisons {
            out.push_str(&format!(
                "| {} | {} | {} | {:.4} -> {:.4} | {:.1}% | {:.5} -> {:.5} | {:.1}% | {:.3} |\n",
                c.reference,
                c.candidate,
                c.target,
                c.gesture_ratio_reference,
                c.gesture_ratio_candidate,
                100.0 * c.gesture_ratio_reduction,
                c.landmark_displacement_reference,
                c.landmark_displacement_candidate,
                100.0 * c.landmark_displacement_reduction,
                c.editability
            ));
        }
        out.push('\n');
    }
    for s in &report.summaries {
        let r = s.emotion_reduction;
        out.push_str(&format!(
            "{} vs {}: gesture ratio lower on every target: {}; mean reduction {:.1}%; landmark displacement reduction {:.1}%; emotion reductions happy {:.1}%, surprised {:.1}%, sad {:.1}%, neutral {:.1}%; minimum editability {:.3}.\n",
            s.candidate,
            s.reference,
            s.gesture_ratio_lower_for_every_target,
            100.0 * s.mean_gesture_ratio_reduction,
            100.0 * s.landmark_displacement_reduction,
            100.0 * r.happy,
            100.0 * r.surprised,
            100.0 * r.sad,
            100.0 * r.neutral,
            s.min_editability
        ));
    }
    out
}

/// Every artifact path currently recorded in the run manifest.
pub fn manifest_files(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let layout = Layout::new(&cfg.output_dir);
    let manifest: artifacts::RunManifest = artifacts::read_json(&layout.run_manifest())?;
    let mut files: Vec<PathBuf> = manifest.stages.values().flatten().map(|f| layout.root.join(f)).collect();
    files.sort();
    files.dedup();
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edit_specs() {
        assert_eq!(parse_edit("hair_darkness=0.5").unwrap(), (Slot::HairDarkness, 0.5));
        assert!(parse_edit("hair=0.5").is_err());
        assert!(parse_edit("nose_size=1.5").is_err());
        assert!(parse_edit("nose_size").is_err());
    }

    #[test]
    fn seed_specs() {
        assert_eq!(parse_seeds("3..6").unwrap(), vec![3, 4, 5]);
        assert_eq!(parse_seeds("1, 9,4").unwrap(), vec![1, 9, 4]);
        assert!(parse_seeds("a..b").is_err());
    }

    #[test]
    fn reductions() {
        assert_eq!(reduction(0.2, 0.1), 0.5);
        assert_eq!(reduction(0.0, 0.1), 0.0);
    }
}
