//! HTTP JSON API over a shared [`KnowledgeIndex`].

use std::net::SocketAddr;
use std::sync::{Arc, RwLock};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use log::info;
use serde::{Deserialize, Serialize};

use crate::index::{Answer, KnowledgeIndex, TocNode};

/// Handle to the live index. Readers take a snapshot; [`SharedIndex::swap`]
/// replaces it without blocking in-flight requests.
#[derive(Debug, Clone, Default)]
pub struct SharedIndex(Arc<RwLock<Arc<KnowledgeIndex>>>);

impl SharedIndex {
    pub fn new(index: KnowledgeIndex) -> Self {
        Self(Arc::new(RwLock::new(Arc::new(index))))
    }

    pub fn current(&self) -> Arc<KnowledgeIndex> {
        Arc::clone(&self.0.read().unwrap_or_else(|e| e.into_inner()))
    }

    /// Install a new index; returns the one it replaced.
    pub fn swap(&self, index: KnowledgeIndex) -> Arc<KnowledgeIndex> {
        let mut guard = self.0.write().unwrap_or_else(|e| e.into_inner());
        std::mem::replace(&mut *guard, Arc::new(index))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatRequest {
    pub utterance: String,
    #[serde(default)]
    pub top_k: Option<usize>,
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
}

fn error(status: StatusCode, msg: impl Into<String>) -> Response {
    (status, Json(ErrorBody { error: msg.into() })).into_response()
}

async fn chat(State(index): State<SharedIndex>, Json(req): Json<ChatRequest>) -> Response {
    if req.utterance.trim().is_empty() {
        return error(StatusCode::BAD_REQUEST, "utterance must not be empty");
    }
    let answer: Answer = index.current().answer(&req.utterance, req.top_k.unwrap_or(1));
    Json(answer).into_response()
}

async fn documents(State(index): State<SharedIndex>) -> Json<Vec<String>> {
    Json(index.current().documents.iter().map(|d| d.id.clone()).collect())
}

async fn toc(State(index): State<SharedIndex>, Path(id): Path<String>) -> Response {
    let snapshot = index.current();
    match snapshot.document(&id) {
        Some(doc) => Json::<Vec<TocNode>>(doc.toc_tree()).into_response(),
        None => error(StatusCode::NOT_FOUND, format!("unknown document {id}")),
    }
}

async fn health() -> Json<&'static str> {
    Json("ok")
}

pub fn router(index: SharedIndex) -> Router {
    Router::new()
        .route("/chat", post(chat))
        .route("/documents", get(documents))
        .route("/documents/{id}/toc", get(toc))
        .route("/health", get(health))
        .with_state(index)
}

/// Serve until the process is stopped.
pub async fn serve(addr: SocketAddr, index: SharedIndex) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(index)).await
}

/// [`serve`] on a fresh multi-threaded runtime.
pub fn serve_blocking(addr: SocketAddr, index: SharedIndex) -> std::io::Result<()> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?
        .block_on(serve(addr, index))
}
