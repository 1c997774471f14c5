//! HTTP routes.
//!
//! | method | path                                  | body            | success              |
//! |--------|---------------------------------------|-----------------|----------------------|
//! | POST   | `/graphs/{g}/episodes`                | episode         | 201 ingest report    |
//! | POST   | `/graphs/{g}/search`                  | search request  | 200 retrieval        |
//! | GET    | `/graphs/{g}/entities/{id}`           |                 | 200 entity           |
//! | GET    | `/graphs/{g}/edges/{id}`              |                 | 200 edge             |
//! | POST   | `/graphs/{g}/communities/refresh`     |                 | 200 community count  |
//! | GET    | `/health`                             |                 | 200                  |
//!
//! Errors are `{"error": "..."}` with 400 for malformed input, 404 for
//! unknown graphs or ids, 409 for a repeated episode id and 502 when an
//! adapter service fails.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tkg_core::community::CommunityError;
use tkg_core::search::SearchError;
use tkg_core::{
    EdgeId, Episode, EpisodeId, EpisodeKind, Graph, IngestError, IngestReport, NodeId, RerankConfig, RetrieveError,
    SearchMethod, Timestamp,
};
use uuid::Uuid;

use crate::registry::{Registry, RegistryError};

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

impl From<RegistryError> for ApiError {
    fn from(e: RegistryError) -> Self {
        match e {
            RegistryError::BadName(_) => ApiError::bad_request(e.to_string()),
            _ => ApiError::internal(e.to_string()),
        }
    }
}

impl From<IngestError> for ApiError {
    fn from(e: IngestError) -> Self {
        let status = match &e {
            IngestError::AlreadyIngested(_) => StatusCode::CONFLICT,
            IngestError::InvalidEpisode(_) => StatusCode::BAD_REQUEST,
            IngestError::Extractor { .. } | IngestError::Embedding { .. } => StatusCode::BAD_GATEWAY,
            IngestError::Store(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.to_string())
    }
}

impl From<RetrieveError> for ApiError {
    fn from(e: RetrieveError) -> Self {
        let status = match &e {
            RetrieveError::Search(SearchError::Embedding(_)) => StatusCode::BAD_GATEWAY,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError::new(status, e.to_string())
    }
}

impl From<CommunityError> for ApiError {
    fn from(e: CommunityError) -> Self {
        let status = match &e {
            CommunityError::Store(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_GATEWAY,
        };
        ApiError::new(status, e.to_string())
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_body<T: DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed body: {e}")))
}

fn parse_id<T: std::str::FromStr>(raw: &str) -> ApiResult<T> {
    raw.parse().map_err(|_| ApiError::bad_request(format!("{raw:?} is not a valid id")))
}

fn existing(registry: &Registry, name: &str) -> ApiResult<Arc<Graph>> {
    registry.get(name)?.ok_or_else(|| ApiError::not_found(format!("unknown graph {name:?}")))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeRequest {
    /// Client-chosen id; makes retries idempotent (a repeat answers 409).
    #[serde(default)]
    pub id: Option<EpisodeId>,
    pub kind: EpisodeKind,
    pub content: String,
    #[serde(default)]
    pub actor: Option<String>,
    pub t_ref: Timestamp,
    #[serde(default)]
    pub group: Option<String>,
}

impl EpisodeRequest {
    pub fn into_episode(self) -> Episode {
        let mut ep = Episode::new(self.kind, self.content, self.actor, self.t_ref);
        if let Some(id) = self.id {
            ep.id = id;
        }
        if let Some(group) = self.group {
            ep.group = group;
        }
        ep
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct IngestResponse {
    pub episode: EpisodeId,
    pub report: IngestReport,
}

/// Search parameters; anything left out takes the service default.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchRequest {
    #[serde(alias = "text")]
    pub query: String,
    pub limit: Option<usize>,
    pub methods: Option<Vec<SearchMethod>>,
    /// Entity or episode ids to start breadth-first search from.
    pub seeds: Option<Vec<Uuid>>,
    pub as_of: Option<Timestamp>,
    pub bfs_depth: Option<usize>,
    /// 0 turns off seeding from recent episodes.
    pub recent_episodes: Option<usize>,
    pub rerank: Option<RerankConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct RefreshResponse {
    pub communities: usize,
}

pub fn router(registry: Arc<Registry>) -> Router {
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/graphs/{g}/episodes", post(add_episode))
        .route("/graphs/{g}/search", post(search))
        .route("/graphs/{g}/entities/{id}", get(entity))
        .route("/graphs/{g}/edges/{id}", get(edge))
        .route("/graphs/{g}/communities/refresh", post(refresh))
        .with_state(registry)
}

async fn add_episode(State(reg): State<Arc<Registry>>, Path(g): Path<String>, body: Bytes) -> ApiResult<Response> {
    let req: EpisodeRequest = parse_body(&body)?;
    let graph = reg.get_or_create(&g)?;
    let ep = req.into_episode();
    let id = ep.id;
    let report = blocking(move || graph.ingest(ep).map_err(ApiError::from)).await?;
    Ok((StatusCode::CREATED, Json(IngestResponse { episode: id, report })).into_response())
}

async fn search(State(reg): State<Arc<Registry>>, Path(g): Path<String>, body: Bytes) -> ApiResult<Response> {
    let req: SearchRequest = parse_body(&body)?;
    let graph = existing(&reg, &g)?;
    let defaults = &reg.config().search;
    let mut q = defaults.query(req.query);
    if let Some(limit) = req.limit {
        q.limit = limit;
    }
    if let Some(methods) = req.methods {
        q.methods = methods.into_iter().collect();
    }
    if let Some(seeds) = req.seeds {
        q.seeds = seeds;
    }
    q.as_of = req.as_of;
    if let Some(d) = req.bfs_depth {
        q.bfs_depth = d;
    }
    if let Some(r) = req.recent_episodes {
        q.recent_episode_seeds = (r > 0).then_some(r);
    }
    let rerank = req.rerank.unwrap_or_else(|| defaults.rerank.clone());
    let retrieval = blocking(move || graph.retrieve(&q, &rerank).map_err(ApiError::from)).await?;
    Ok(Json(retrieval).into_response())
}

async fn entity(State(reg): State<Arc<Registry>>, Path((g, id)): Path<(String, String)>) -> ApiResult<Response> {
    let id: NodeId = parse_id(&id)?;
    let graph = existing(&reg, &g)?;
    let snapshot = graph.snapshot();
    let node = snapshot.entity(id).ok_or_else(|| ApiError::not_found(format!("unknown entity {id}")))?;
    Ok(Json(node).into_response())
}

async fn edge(State(reg): State<Arc<Registry>>, Path((g, id)): Path<(String, String)>) -> ApiResult<Response> {
    let id: EdgeId = parse_id(&id)?;
    let graph = existing(&reg, &g)?;
    let snapshot = graph.snapshot();
    let edge = snapshot.edge(id).ok_or_else(|| ApiError::not_found(format!("unknown edge {id}")))?;
    Ok(Json(edge).into_response())
}

async fn refresh(State(reg): State<Arc<Registry>>, Path(g): Path<String>) -> ApiResult<Response> {
    let graph = existing(&reg, &g)?;
    let communities = blocking(move || graph.refresh_communities().map_err(ApiError::from)).await?;
    Ok(Json(RefreshResponse { communities }).into_response())
}
