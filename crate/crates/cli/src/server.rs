//! Draft-day JSON API.
//!
//! Reads are served concurrently from immutable state; draft mutations go
//! through one mutex so picks and undos apply in a single order.

use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use frc_core::{predict_win_prob, DivisionSnapshot, EmpiricalCdf, FittedModel};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::CliError;
use crate::report::{ranked_strengths, FitReport, RobotStrength, REPORT_SCHEMA_VERSION};

pub const ALLIANCES: usize = 8;

pub struct AppState {
    snapshot: DivisionSnapshot,
    model: FittedModel,
    cdf: EmpiricalCdf,
    /// Strength order, strongest first.
    board: Vec<RobotStrength>,
    draft: Mutex<Draft>,
}

#[derive(Debug, Default)]
struct Draft {
    /// (robot, 0-based alliance) in pick order.
    picks: Vec<(usize, usize)>,
}

impl AppState {
    pub fn new(snapshot: DivisionSnapshot, fit: &FitReport) -> Result<Self, CliError> {
        let model = fit.restore(&snapshot)?;
        Ok(AppState {
            cdf: EmpiricalCdf::new(&model.residuals)?,
            board: ranked_strengths(&snapshot, &model),
            snapshot,
            model,
            draft: Mutex::new(Draft::default()),
        })
    }

    pub fn model(&self) -> &FittedModel {
        &self.model
    }

    pub fn cdf(&self) -> &EmpiricalCdf {
        &self.cdf
    }

    fn draft_state(&self, draft: &Draft) -> DraftState {
        let picked: Vec<&str> = draft.picks.iter().map(|&(r, _)| self.snapshot.key(r)).collect();
        let mut alliances = vec![Vec::new(); ALLIANCES];
        for &(robot, alliance) in &draft.picks {
            alliances[alliance].push(self.snapshot.key(robot).to_string());
        }
        DraftState {
            schema_version: REPORT_SCHEMA_VERSION,
            available: self
                .board
                .iter()
                .filter(|s| !picked.contains(&s.robot.as_str()))
                .map(|s| s.robot.clone())
                .collect(),
            picked: picked.into_iter().map(str::to_string).collect(),
            alliances,
        }
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Draft> {
        // A panic mid-request cannot leave a half-applied pick: each
        // mutation is a single push or pop.
        self.draft.lock().unwrap_or_else(|e| e.into_inner())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DraftState {
    pub schema_version: u32,
    pub picked: Vec<String>,
    /// Unpicked robots, strongest first.
    pub available: Vec<String>,
    /// One list per alliance, alliance 1 first.
    pub alliances: Vec<Vec<String>>,
}

#[derive(Debug, Deserialize)]
pub struct PickRequest {
    pub robot: String,
    /// 1-based alliance number.
    pub alliance: usize,
}

#[derive(Debug, Deserialize)]
pub struct RecommendationQuery {
    pub alliance: usize,
    #[serde(default = "default_recommendations")]
    pub n: usize,
}

fn default_recommendations() -> usize {
    3
}

#[derive(Debug, Deserialize)]
pub struct PredictRequest {
    pub blue: Vec<String>,
    pub red: Vec<String>,
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.0,
            Json(json!({ "schema_version": REPORT_SCHEMA_VERSION, "error": self.1 })),
        )
            .into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError(r.status(), r.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(r: QueryRejection) -> Self {
        ApiError(StatusCode::UNPROCESSABLE_ENTITY, r.body_text())
    }
}

type ApiResult = Result<Response, ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/strengths", get(strengths))
        .route("/draft/state", get(draft_state))
        .route("/draft/pick", post(pick))
        .route("/draft/undo", post(undo))
        .route("/draft/recommendations", get(recommendations))
        .route("/predict", post(predict))
        .fallback(|| async { ApiError(StatusCode::NOT_FOUND, "no such endpoint".into()) })
        .with_state(state)
}

pub async fn serve(state: AppState, addr: SocketAddr) -> Result<(), CliError> {
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| match e.kind() {
        std::io::ErrorKind::AddrInUse => CliError::PortInUse { port: addr.port() },
        _ => CliError::Server(format!("{addr}: {e}")),
    })?;
    log::info!("serving {} on http://{}", state.snapshot.division_key, addr);
    axum::serve(listener, router(Arc::new(state)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| CliError::Server(e.to_string()))
}

async fn strengths(State(state): State<Arc<AppState>>) -> Json<Value> {
    Json(json!({
        "schema_version": REPORT_SCHEMA_VERSION,
        "division_key": state.snapshot.division_key,
        "strengths": state.board,
    }))
}

async fn draft_state(State(state): State<Arc<AppState>>) -> Json<DraftState> {
    let draft = state.lock();
    Json(state.draft_state(&draft))
}

async fn pick(State(state): State<Arc<AppState>>, body: Result<Json<PickRequest>, JsonRejection>) -> ApiResult {
    let Json(req) = body?;
    let robot = resolve(&state, &req.robot)?;
    let alliance = alliance_index(req.alliance)?;
    let mut draft = state.lock();
    if draft.picks.iter().any(|&(r, _)| r == robot) {
        return Err(ApiError(
            StatusCode::CONFLICT,
            format!("robot `{}` is already picked", req.robot),
        ));
    }
    draft.picks.push((robot, alliance));
    Ok(Json(state.draft_state(&draft)).into_response())
}

async fn undo(State(state): State<Arc<AppState>>) -> ApiResult {
    let mut draft = state.lock();
    if draft.picks.pop().is_none() {
        return Err(ApiError(StatusCode::CONFLICT, "nothing to undo".into()));
    }
    Ok(Json(state.draft_state(&draft)).into_response())
}

async fn recommendations(
    State(state): State<Arc<AppState>>,
    query: Result<Query<RecommendationQuery>, QueryRejection>,
) -> ApiResult {
    let Query(q) = query?;
    alliance_index(q.alliance)?;
    let draft = state.lock();
    let recommended: Vec<&RobotStrength> = state
        .board
        .iter()
        .filter(|s| draft.picks.iter().all(|&(r, _)| state.snapshot.key(r) != s.robot))
        .take(q.n)
        .collect();
    Ok(Json(json!({
        "schema_version": REPORT_SCHEMA_VERSION,
        "alliance": q.alliance,
        "recommendations": recommended,
    }))
    .into_response())
}

async fn predict(State(state): State<Arc<AppState>>, body: Result<Json<PredictRequest>, JsonRejection>) -> ApiResult {
    let Json(req) = body?;
    if req.blue.len() != 3 || req.red.len() != 3 {
        return Err(ApiError(
            StatusCode::UNPROCESSABLE_ENTITY,
            "each alliance needs exactly 3 robots".into(),
        ));
    }
    let blue = req
        .blue
        .iter()
        .map(|k| resolve(&state, k))
        .collect::<Result<Vec<_>, _>>()?;
    let red = req
        .red
        .iter()
        .map(|k| resolve(&state, k))
        .collect::<Result<Vec<_>, _>>()?;
    let mut all: Vec<usize> = blue.iter().chain(&red).copied().collect();
    all.sort_unstable();
    all.dedup();
    if all.len() != 6 {
        return Err(ApiError(
            StatusCode::UNPROCESSABLE_ENTITY,
            "a robot appears more than once".into(),
        ));
    }
    let p = predict_win_prob(&state.model, &state.cdf, &blue, &red)
        .map_err(|e| ApiError(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
    Ok(Json(json!({
        "schema_version": REPORT_SCHEMA_VERSION,
        "blue": req.blue,
        "red": req.red,
        "predicted_margin": state.model.predict_margin(&blue, &red),
        "p_red_win": p,
        "red_predicted_to_win": p > 0.5,
    }))
    .into_response())
}

fn resolve(state: &AppState, key: &str) -> Result<usize, ApiError> {
    state
        .snapshot
        .index_of(key)
        .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("unknown robot `{key}`")))
}

fn alliance_index(alliance: usize) -> Result<usize, ApiError> {
    if (1..=ALLIANCES).contains(&alliance) {
        Ok(alliance - 1)
    } else {
        Err(ApiError(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!("alliance must be between 1 and {ALLIANCES}, got {alliance}"),
        ))
    }
}
