//! Read-only HTTP service over the loaded artifacts.

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine;
use latent_edit_core::edit::{apply_edit, DirectionMatrix, ScalerVector};
use latent_edit_core::eval::{gesture_drift, landmark_displacement_from_sets};
use latent_edit_core::face::{analytic_landmarks, latent_to_params, render, sample_latent, LandmarkSet, Partition, SemanticParams, Slot};
use latent_edit_core::nn::{Landmarker, Regressor};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::artifacts::{self, encode_png, load_matrix, load_weights, Layout};
use crate::config::RunConfig;
use crate::error::Result;
use crate::pipeline::{Generator, LANDMARKER, REGRESSOR};

pub struct AppState {
    generator: Generator,
    regressor: Regressor,
    landmarker: Landmarker,
    matrices: BTreeMap<String, (String, DirectionMatrix)>,
}

impl AppState {
    pub fn load(cfg: &RunConfig) -> Result<Self> {
        let layout = Layout::new(&cfg.output_dir);
        let models = layout.models_dir();
        let mut matrices = BTreeMap::new();
        for sidecar in artifacts::list_matrices(&layout.matrices_dir())? {
            let (sidecar, t) = load_matrix(&layout.matrices_dir(), &sidecar.id)?;
            matrices.insert(sidecar.id, (sidecar.variant, t));
        }
        Ok(Self {
            generator: Generator::new(cfg)?,
            regressor: Regressor::new(&load_weights(&models, REGRESSOR)?)?,
            landmarker: Landmarker::new(&load_weights(&models, LANDMARKER)?)?,
            matrices,
        })
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/features", get(features))
        .route("/matrices", get(matrices))
        .route("/sample", post(sample))
        .route("/edit", post(edit))
        .with_state(Arc::new(state))
}

pub async fn serve(cfg: &RunConfig, addr: &str) -> anyhow::Result<()> {
    let app = router(AppState::load(cfg)?);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app).await?;
    Ok(())
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

/// Any body that fails to parse is a 400, whatever the reason.
fn parse_body<T: DeserializeOwned>(body: &Bytes) -> std::result::Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError(StatusCode::BAD_REQUEST, format!("malformed body: {e}")))
}

fn internal(e: impl std::fmt::Display) -> ApiError {
    ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
}

#[derive(Serialize)]
struct Feature {
    index: usize,
    name: &'static str,
    partition: Partition,
}

async fn features() -> Json<serde_json::Value> {
    let list: Vec<Feature> = Slot::ALL.iter().map(|s| Feature { index: s.index(), name: s.name(), partition: s.partition() }).collect();
    Json(json!({ "features": list }))
}

async fn matrices(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    let list: Vec<_> = state.matrices.iter().map(|(id, (variant, _))| json!({ "id": id, "variant": variant })).collect();
    Json(json!({ "matrices": list }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleRequest {
    seed: u64,
}

#[derive(Serialize)]
struct SampleResponse {
    seed: u64,
    image: String,
    params: SemanticParams,
    landmarks: LandmarkSet,
}

fn png_base64(p: &SemanticParams, state: &AppState) -> std::result::Result<String, ApiError> {
    let img = render(p, &state.generator.render).map_err(internal)?;
    Ok(base64::engine::general_purpose::STANDARD.encode(encode_png(&img)))
}

async fn sample(State(state): State<Arc<AppState>>, body: Bytes) -> std::result::Result<Json<SampleResponse>, ApiError> {
    let req: SampleRequest = parse_body(&body)?;
    let w = sample_latent(req.seed, state.generator.latent_dim);
    let p = latent_to_params(&w, &state.generator.mixing).map_err(internal)?;
    Ok(Json(SampleResponse {
        seed: req.seed,
        image: png_base64(&p, &state)?,
        landmarks: analytic_landmarks(&p).map_err(internal)?,
        params: p,
    }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EditRequest {
    seed: u64,
    matrix_id: String,
    s: Vec<f64>,
}

#[derive(Serialize)]
struct EditResponse {
    seed: u64,
    matrix_id: String,
    image: String,
    params: SemanticParams,
    landmarks: LandmarkSet,
    predicted_landmarks: LandmarkSet,
    predicted_attributes: Vec<f64>,
    gesture_drift: f64,
    landmark_displacement: f64,
}

async fn edit(State(state): State<Arc<AppState>>, body: Bytes) -> std::result::Result<Json<EditResponse>, ApiError> {
    let req: EditRequest = parse_body(&body)?;
    if let Some(v) = req.s.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
        return Err(ApiError(StatusCode::BAD_REQUEST, format!("scaler entry {v} is outside [-1, 1]")));
    }
    let (_, t) = state
        .matrices
        .get(&req.matrix_id)
        .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("unknown matrix `{}`", req.matrix_id)))?;
    if req.s.len() != t.features() {
        return Err(ApiError(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!("scaler has {} entries, matrix expects {}", req.s.len(), t.features()),
        ));
    }
    let w = sample_latent(req.seed, state.generator.latent_dim);
    let mixing = &state.generator.mixing;
    let original = latent_to_params(&w, mixing).map_err(internal)?;
    let s = ScalerVector::new(req.s).map_err(internal)?;
    let p = latent_to_params(&apply_edit(&w, t, &s).map_err(internal)?, mixing).map_err(internal)?;
    let img = render(&p, &state.generator.render).map_err(internal)?;
    let landmarks = analytic_landmarks(&p).map_err(internal)?;
    let displacement = landmark_displacement_from_sets(&[analytic_landmarks(&original).map_err(internal)?], &[landmarks.clone()]).map_err(internal)?;
    Ok(Json(EditResponse {
        seed: req.seed,
        matrix_id: req.matrix_id,
        image: base64::engine::general_purpose::STANDARD.encode(encode_png(&img)),
        predicted_landmarks: state.landmarker.predict(&img).map_err(internal)?,
        predicted_attributes: state.regressor.predict(&img).map_err(internal)?.0,
        gesture_drift: gesture_drift(&original, &p),
        landmark_displacement: displacement,
        params: p,
        landmarks,
    }))
}
