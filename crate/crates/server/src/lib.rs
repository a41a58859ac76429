//! Read-only HTTP API over a trained model and its hierarchy tree.
//!
//! State is loaded once and never mutated; until it is, every `/api` route
//! answers 503. Exploration is seeded from the query string, so identical
//! requests produce identical bodies.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, OnceLock};

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use herec_core::data::{InteractionGraph, NodeId};
use herec_core::hiercluster::{HierarchyTree, PathStep};
use herec_core::metrics::EvalReport;
use herec_core::model::EmbeddingTable;
use herec_core::recommend::{explore_exploit, top_k, RecItem};
use herec_core::Error;
use serde::{Deserialize, Serialize};
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;

pub const DEFAULT_K: usize = 20;
pub const K_MAX: usize = 100;

/// Everything the endpoints read. Immutable after construction.
#[derive(Debug)]
pub struct ServingState {
    points: EmbeddingTable,
    graph: InteractionGraph,
    tree: HierarchyTree,
    metric_summary: Option<EvalReport>,
}

impl ServingState {
    pub fn new(
        points: EmbeddingTable,
        graph: InteractionGraph,
        tree: HierarchyTree,
        metric_summary: Option<EvalReport>,
    ) -> herec_core::Result<Self> {
        if points.user_count() != graph.user_count() || points.item_count() != graph.item_count() {
            return Err(Error::Dimension {
                expected: graph.node_count(),
                found: points.node_count(),
            });
        }
        if tree.leaves().len() != points.node_count() {
            return Err(Error::Dimension {
                expected: points.node_count(),
                found: tree.leaves().len(),
            });
        }
        Ok(Self {
            points,
            graph,
            tree,
            metric_summary,
        })
    }

    pub fn tree(&self) -> &HierarchyTree {
        &self.tree
    }

    pub fn graph(&self) -> &InteractionGraph {
        &self.graph
    }

    pub fn points(&self) -> &EmbeddingTable {
        &self.points
    }
}

/// Slot that the loader fills exactly once.
pub type SharedState = Arc<OnceLock<ServingState>>;

pub fn empty_state() -> SharedState {
    Arc::new(OnceLock::new())
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
}

#[derive(Debug)]
pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(ErrorBody { error: self.1 })).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn loaded(state: &SharedState) -> Result<&ServingState, ApiError> {
    state
        .get()
        .ok_or_else(|| ApiError(StatusCode::SERVICE_UNAVAILABLE, "model not loaded yet".into()))
}

fn bad_request(msg: impl Into<String>) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, msg.into())
}

fn not_found(msg: impl Into<String>) -> ApiError {
    ApiError(StatusCode::NOT_FOUND, msg.into())
}

#[derive(Debug, Deserialize)]
pub struct RecQuery {
    k: Option<usize>,
    tau: Option<f64>,
    layer: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct RecResponse {
    pub user: u32,
    pub k: usize,
    pub tau: f64,
    pub layer: Option<usize>,
    pub items: Vec<RecItem>,
}

async fn recommendations(
    State(state): State<SharedState>,
    Path(user): Path<String>,
    Query(q): Query<RecQuery>,
) -> ApiResult<RecResponse> {
    let s = loaded(&state)?;
    let user: u32 = user
        .parse()
        .map_err(|_| not_found(format!("unknown user `{user}`")))?;
    if user as usize >= s.graph.user_count() {
        return Err(not_found(format!("unknown user {user}")));
    }
    let k = q.k.unwrap_or(DEFAULT_K);
    if k == 0 || k > K_MAX {
        return Err(bad_request(format!("k must lie in 1..={K_MAX}")));
    }
    let tau = q.tau.unwrap_or(0.0);
    if !(0.0..=1.0).contains(&tau) {
        return Err(bad_request(format!("tau must lie in [0, 1], got {tau}")));
    }
    let depth = s.tree.depth();
    if let Some(l) = q.layer {
        if l == 0 || l > depth {
            return Err(bad_request(format!("layer must lie in 1..={depth}")));
        }
    }
    let list = match q.layer {
        Some(layer) => explore_exploit(&s.points, &s.graph, &s.tree, user, k, tau, layer, q.seed.unwrap_or(0)),
        None if tau == 0.0 => top_k(&s.points, &s.graph, user, k),
        None => return Err(bad_request("layer is required when tau > 0")),
    }
    .map_err(|e| bad_request(e.to_string()))?;
    Ok(Json(RecResponse {
        user,
        k,
        tau,
        layer: q.layer,
        items: list.items,
    }))
}

/// Accepts `u<id>`, `i<id>`, or a bare leaf index.
fn parse_leaf(tree: &HierarchyTree, raw: &str) -> Option<NodeId> {
    match raw.parse::<usize>() {
        Ok(idx) => tree.leaves().get(idx).copied(),
        Err(_) => raw.parse().ok(),
    }
}

async fn tree_path(State(state): State<SharedState>, Path(leaf): Path<String>) -> ApiResult<Vec<PathStep>> {
    let s = loaded(&state)?;
    let node = parse_leaf(&s.tree, &leaf).ok_or_else(|| not_found(format!("unknown leaf `{leaf}`")))?;
    s.tree
        .ancestor_path(node)
        .map(Json)
        .map_err(|_| not_found(format!("unknown leaf `{leaf}`")))
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct MetaResponse {
    pub user_count: usize,
    pub item_count: usize,
    pub tree_layers: usize,
    pub k_max: usize,
    pub metric_summary: Option<EvalReport>,
}

async fn meta(State(state): State<SharedState>) -> ApiResult<MetaResponse> {
    let s = loaded(&state)?;
    Ok(Json(MetaResponse {
        user_count: s.graph.user_count(),
        item_count: s.graph.item_count(),
        tree_layers: s.tree.depth(),
        k_max: K_MAX,
        metric_summary: s.metric_summary.clone(),
    }))
}

/// API routes under `/api`, plus static files from `static_dir` at `/`.
pub fn router(state: SharedState, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/users/{id}/recommendations", get(recommendations))
        .route("/tree/path/{leaf_id}", get(tree_path))
        .route("/meta", get(meta))
        .with_state(state);
    let app = Router::new().nest("/api", api);
    let app = match static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    };
    app.layer(CorsLayer::permissive())
}

/// Serve on `listener` until the process exits.
pub async fn serve(listener: tokio::net::TcpListener, app: Router) -> std::io::Result<()> {
    let addr: SocketAddr = listener.local_addr()?;
    log::info!("listening on http://{addr}");
    axum::serve(listener, app).await
}
