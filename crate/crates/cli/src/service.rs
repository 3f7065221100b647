//! Read-only HTTP search service.
//!
//! `GET /healthz`, `GET /doc/{id}` and `POST /search`. The store is loaded
//! once and shared immutably between requests.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use serde_json::json;
use tower_http::cors::{AllowOrigin, CorsLayer};

use crate::query::{QueryError, SearchRequest, Store};
use sphx_core::index::{token_string, IndexConfig};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub bind: SocketAddr,
    /// Cap on results per response.
    pub max_results: usize,
    /// Origins allowed to call the API from a browser.
    pub cors_allowlist: Vec<String>,
}

struct AppState {
    store: Store,
    max_results: usize,
}

impl IntoResponse for QueryError {
    fn into_response(self) -> Response {
        let status = match self {
            QueryError::BadRequest { .. } => StatusCode::BAD_REQUEST,
            QueryError::NotFound { .. } => StatusCode::NOT_FOUND,
            QueryError::Unprocessable { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            QueryError::Internal { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let body = json!({ "error": self.kind(), "message": self.message() });
        (status, Json(body)).into_response()
    }
}

#[derive(Serialize)]
struct DocRecord<'a> {
    doc_id: &'a str,
    k: usize,
    support: Vec<u32>,
    tokens: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    vector: Option<&'a [f64]>,
    config: &'a IndexConfig,
}

async fn healthz(State(state): State<Arc<AppState>>) -> impl IntoResponse {
    let c = state.store.engine.config();
    Json(json!({
        "status": "ok",
        "documents": state.store.engine.index().len(),
        "m": c.m,
        "d": c.d,
        "vectors_loaded": state.store.vectors.is_some(),
    }))
}

async fn doc(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, QueryError> {
    let index = state.store.engine.index();
    let doc = index.find_doc(&id).ok_or_else(|| QueryError::NotFound {
        kind: "UnknownDocId".into(),
        message: format!("unknown document id {id:?}"),
    })?;
    let code = index.code(doc);
    let record = DocRecord {
        doc_id: &id,
        k: code.k(),
        tokens: token_string(&code),
        support: code.support().to_vec(),
        vector: state.store.vectors.as_ref().and_then(|v| v.get(&id)).map(|v| v.coords()),
        config: index.config(),
    };
    Ok(Json(record).into_response())
}

async fn search(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, QueryError> {
    let req: SearchRequest = serde_json::from_slice(&body).map_err(|e| QueryError::BadRequest {
        kind: "InvalidRequest".into(),
        message: e.to_string(),
    })?;
    let resp = state.store.search(&req, Some(state.max_results))?;
    Ok(Json(resp).into_response())
}

/// The service's routes over `store`.
pub fn router(store: Store, config: &ServiceConfig) -> Router {
    let state = Arc::new(AppState {
        store,
        max_results: config.max_results,
    });
    let app = Router::new()
        .route("/healthz", get(healthz))
        .route("/doc/{id}", get(doc))
        .route("/search", post(search))
        .with_state(state);
    if config.cors_allowlist.is_empty() {
        return app;
    }
    let origins: Vec<HeaderValue> = config
        .cors_allowlist
        .iter()
        .filter_map(|o| HeaderValue::from_str(o).ok())
        .collect();
    app.layer(
        CorsLayer::new()
            .allow_origin(AllowOrigin::list(origins))
            .allow_methods([Method::GET, Method::POST])
            .allow_headers([axum::http::header::CONTENT_TYPE]),
    )
}

/// Serve until Ctrl-C.
pub async fn serve(store: Store, config: ServiceConfig) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(config.bind).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(store, &config))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
