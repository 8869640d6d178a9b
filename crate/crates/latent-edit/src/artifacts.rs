//! On-disk artifacts: directory layout, versioned f64 blobs with JSON
//! sidecars, PNG images and JSON-lines manifests.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use latent_edit_core::edit::{DirectionMatrix, LossWeights};
use latent_edit_core::face::RenderedImage;
use latent_edit_core::nn::{Architecture, NetworkWeights, TrainingMetrics};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{PipelineError, Result};

const BLOB_MAGIC: &[u8; 8] = b"LEDBLOB\0";
pub const FORMAT_VERSION: u32 = 1;

/// Paths of every artifact below the output root.
#[derive(Clone, Debug)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.root.join("dataset")
    }

    pub fn dataset_manifest(&self) -> PathBuf {
        self.dataset_dir().join("manifest.jsonl")
    }

    pub fn models_dir(&self) -> PathBuf {
        self.root.join("models")
    }

    pub fn matrices_dir(&self) -> PathBuf {
        self.root.join("matrices")
    }

    pub fn augment_dir(&self, name: &str) -> PathBuf {
        self.root.join("augment").join(name)
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.root.join("reports")
    }

    pub fn run_manifest(&self) -> PathBuf {
        self.root.join("run_manifest.json")
    }

    pub fn relative(&self, path: &Path) -> String {
        path.strip_prefix(&self.root).unwrap_or(path).to_string_lossy().replace('\\', "/")
    }
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| PipelineError::io(path, e))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    fs::write(path, bytes).map_err(|e| PipelineError::io(path, e))
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| PipelineError::io(path, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn encode_blob(values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + 8 * values.len());
    out.extend_from_slice(BLOB_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_blob(path: &Path, bytes: &[u8]) -> Result<Vec<f64>> {
    if bytes.len() < 20 || &bytes[..8] != BLOB_MAGIC {
        return Err(PipelineError::format(path, "not a parameter blob"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(PipelineError::format(path, format!("unsupported blob version {version}")));
    }
    let count = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let body = &bytes[20..];
    if body.len() != 8 * count {
        return Err(PipelineError::format(path, format!("expected {count} values, found {} bytes", body.len())));
    }
    Ok(body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("value serializes");
    bytes.push(b'\n');
    bytes
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_file(path, &to_json_pretty(value))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_slice(&read_file(path)?).map_err(|e| PipelineError::format(path, e.to_string()))
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut bytes = Vec::new();
    for r in records {
        serde_json::to_writer(&mut bytes, r).expect("record serializes");
        bytes.push(b'\n');
    }
    write_file(path, &bytes)
}

pub fn append_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    let mut file = fs::OpenOptions::new().create(true).append(true).open(path).map_err(|e| PipelineError::io(path, e))?;
    for r in records {
        let mut line = serde_json::to_vec(r).expect("record serializes");
        line.push(b'\n');
        file.write_all(&line).map_err(|e| PipelineError::io(path, e))?;
    }
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| PipelineError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| PipelineError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| PipelineError::format(path, format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

pub fn encode_png(image: &RenderedImage) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, image.size as u32, image.size as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().expect("in-memory png header");
        writer.write_image_data(&image.to_rgb8()).expect("in-memory png data");
    }
    out
}

pub fn decode_png(path: &Path, bytes: &[u8]) -> Result<RenderedImage> {
    let decoder = png::Decoder::new(bytes);
    let mut reader = decoder.read_info().map_err(|e| PipelineError::format(path, e.to_string()))?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(|e| PipelineError::format(path, e.to_string()))?;
    if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight || info.width != info.height {
        return Err(PipelineError::format(path, "expected a square 8-bit RGB image"));
    }
    Ok(RenderedImage::from_rgb8(info.width as usize, &buf[..info.buffer_size()])?)
}

pub fn write_png(path: &Path, image: &RenderedImage) -> Result<()> {
    write_file(path, &encode_png(image))
}

pub fn read_png(path: &Path) -> Result<RenderedImage> {
    decode_png(path, &read_file(path)?)
}

/// Sidecar describing a network blob.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightsSidecar {
    pub format_version: u32,
    pub name: String,
    pub architecture_tag: String,
    pub architecture: Architecture,
    pub seed: u64,
    pub param_count: usize,
    pub blob: String,
    pub blob_sha256: String,
    pub metrics: Option<TrainingMetrics>,
    /// Whether the recorded metrics meet the configured threshold.
    pub meets_threshold: Option<bool>,
}

pub fn save_weights(dir: &Path, name: &str, w: &NetworkWeights, meets_threshold: Option<bool>) -> Result<Vec<PathBuf>> {
    let blob = encode_blob(&w.params);
    let blob_path = dir.join(format!("{name}.bin"));
    let sidecar_path = dir.join(format!("{name}.json"));
    write_file(&blob_path, &blob)?;
    write_json(
        &sidecar_path,
        &WeightsSidecar {
            format_version: FORMAT_VERSION,
            name: name.into(),
            architecture_tag: w.tag(),
            architecture: w.architecture,
            seed: w.seed,
            param_count: w.params.len(),
            blob: format!("{name}.bin"),
            blob_sha256: sha256_hex(&blob),
            metrics: w.metrics.clone(),
            meets_threshold,
        },
    )?;
    Ok(vec![blob_path, sidecar_path])
}

pub fn load_weights(dir: &Path, name: &str) -> Result<NetworkWeights> {
    let sidecar_path = dir.join(format!("{name}.json"));
    if !sidecar_path.exists() {
        return Err(PipelineError::Missing { what: "network weights", path: sidecar_path });
    }
    let sidecar: WeightsSidecar = read_json(&sidecar_path)?;
    let blob_path = dir.join(&sidecar.blob);
    let bytes = read_file(&blob_path)?;
    if sha256_hex(&bytes) != sidecar.blob_sha256 {
        return Err(PipelineError::format(&blob_path, "checksum does not match its sidecar"));
    }
    if sidecar.architecture.tag() != sidecar.architecture_tag {
        return Err(PipelineError::format(&sidecar_path, "architecture tag does not match the architecture"));
    }
    let params = decode_blob(&blob_path, &bytes)?;
    if params.len() != sidecar.architecture.param_count() {
        return Err(PipelineError::format(&blob_path, "parameter count does not match the architecture"));
    }
    Ok(NetworkWeights { architecture: sidecar.architecture, params, seed: sidecar.seed, metrics: sidecar.metrics })
}

/// Sidecar describing a direction-matrix blob.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixSidecar {
    pub format_version: u32,
    pub id: String,
    pub variant: String,
    pub dim: usize,
    pub features: usize,
    pub weights: LossWeights,
    pub seed: u64,
    pub iterations: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub init_std: f64,
    pub co_train_discriminator: bool,
    pub blob: String,
    pub blob_sha256: String,
    pub report: String,
}

pub fn save_matrix(dir: &Path, sidecar: &MatrixSidecar, t: &DirectionMatrix) -> Result<Vec<PathBuf>> {
    let blob = encode_blob(t.as_slice());
    let blob_path = dir.join(&sidecar.blob);
    let sidecar_path = dir.join(format!("{}.json", sidecar.id));
    write_file(&blob_path, &blob)?;
    let sidecar = MatrixSidecar { blob_sha256: sha256_hex(&blob), dim: t.dim(), features: t.features(), ..sidecar.clone() };
    write_json(&sidecar_path, &sidecar)?;
    Ok(vec![blob_path, sidecar_path])
}

pub fn load_matrix(dir: &Path, id: &str) -> Result<(MatrixSidecar, DirectionMatrix)> {
    let sidecar_path = dir.join(format!("{id}.json"));
    if !sidecar_path.exists() {
        return Err(PipelineError::Missing { what: "direction matrix", path: sidecar_path });
    }
    let sidecar: MatrixSidecar = read_json(&sidecar_path)?;
    let blob_path = dir.join(&sidecar.blob);
    let bytes = read_file(&blob_path)?;
    if sha256_hex(&bytes) != sidecar.blob_sha256 {
        return Err(PipelineError::format(&blob_path, "checksum does not match its sidecar"));
    }
    let t = DirectionMatrix::from_data(sidecar.dim, sidecar.features, decode_blob(&blob_path, &bytes)?)?;
    Ok((sidecar, t))
}

/// Ids of every matrix sidecar in `dir`, sorted.
pub fn list_matrices(dir: &Path) -> Result<Vec<MatrixSidecar>> {
    let mut out = Vec::new();
    if !dir.exists() {
        return Ok(out);
    }
    let entries = fs::read_dir(dir).map_err(|e| PipelineError::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    paths.sort();
    for p in paths {
        if p.extension().is_some_and(|e| e == "json") {
            if let Ok(s) = read_json::<MatrixSidecar>(&p) {
                out.push(s);
            }
        }
    }
    Ok(out)
}

/// Files written by each stage, relative to the output root.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub stages: BTreeMap<String, Vec<String>>,
}

pub fn record_stage(layout: &Layout, stage: &str, files: &[PathBuf]) -> Result<()> {
    let path = layout.run_manifest();
    let mut manifest: RunManifest = if path.exists() { read_json(&path)? } else { RunManifest::default() };
    let mut rel: Vec<String> = files.iter().map(|f| layout.relative(f)).collect();
    rel.sort();
    rel.dedup();
    manifest.stages.insert(stage.to_string(), rel);
    write_json(&path, &manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use latent_edit_core::face::{render, RenderConfig, SemanticParams};

    #[test]
    fn blob_round_trip_and_corruption() {
        let values = vec![1.5, -0.0, f64::MAX, 1e-300];
        let bytes = encode_blob(&values);
        let p = Path::new("x.bin");
        assert_eq!(decode_blob(p, &bytes).unwrap(), values);
        assert!(decode_blob(p, &bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_blob(p, &bad).is_err());
    }

    #[test]
    fn png_round_trip_matches_quantization() {
        let img = render(&SemanticParams::neutral(), &RenderConfig { size: 16, steepness: 40.0 }).unwrap();
        let bytes = encode_png(&img);
        let back = decode_png(Path::new("x.png"), &bytes).unwrap();
        assert_eq!(back.to_rgb8(), img.to_rgb8());
        assert_eq!(encode_png(&back), bytes);
    }

    #[test]
    fn weights_round_trip_and_checksum() {
        let dir = tempfile::tempdir().unwrap();
        let arch = Architecture::discriminator(16);
        let w = NetworkWeights { architecture: arch, params: (0..arch.param_count()).map(|i| i as f64 * 0.5).collect(), seed: 3, metrics: None };
        save_weights(dir.path(), "d", &w, None).unwrap();
        assert_eq!(load_weights(dir.path(), "d").unwrap(), w);
        let blob = dir.path().join("d.bin");
        let mut bytes = fs::read(&blob).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 1;
        fs::write(&blob, bytes).unwrap();
        assert!(matches!(load_weights(dir.path(), "d"), Err(PipelineError::Format { .. })));
        assert!(matches!(load_weights(dir.path(), "nothing"), Err(PipelineError::Missing { .. })));
    }

    #[test]
    fn jsonl_append_and_read() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/m.jsonl");
        append_jsonl(&p, &[1, 2]).unwrap();
        append_jsonl(&p, &[3]).unwrap();
        assert_eq!(read_jsonl::<i32>(&p).unwrap(), vec![1, 2, 3]);
    }
}
