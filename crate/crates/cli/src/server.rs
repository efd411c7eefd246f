//! Stateless scoring service. The only shared state is the scorer built at
//! startup.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;
use storyground::reward::Scorer;

use crate::{score_request, CliError, ScoreRequest};

pub fn router(scorer: Arc<Scorer>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/v1/score", post(score))
        .with_state(scorer)
}

async fn healthz() -> Json<serde_json::Value> {
    Json(json!({"status": "ok"}))
}

fn bad_request(error: String, line: Option<usize>, column: Option<usize>) -> Response {
    let body = json!({"error": error, "line": line, "column": column});
    (StatusCode::BAD_REQUEST, Json(body)).into_response()
}

async fn score(State(scorer): State<Arc<Scorer>>, body: Bytes) -> Response {
    let req: ScoreRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return bad_request(e.to_string(), Some(e.line()), Some(e.column())),
    };
    match score_request(&scorer, &req) {
        Ok(breakdown) => Json(breakdown).into_response(),
        Err(e) => bad_request(format!("invalid config: {e}"), None, None),
    }
}

pub async fn serve(listener: tokio::net::TcpListener, scorer: Arc<Scorer>) -> std::io::Result<()> {
    axum::serve(listener, router(scorer)).await
}

pub fn serve_blocking(port: u16, scorer: Arc<Scorer>) -> Result<(), CliError> {
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Data(e.to_string()))?;
    runtime.block_on(async move {
        let addr = SocketAddr::from(([0, 0, 0, 0], port));
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| CliError::Data(format!("cannot bind {addr}: {e}")))?;
        eprintln!("listening on {addr}");
        serve(listener, scorer)
            .await
            .map_err(|e| CliError::Data(e.to_string()))
    })
}
