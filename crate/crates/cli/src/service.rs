//! HTTP query service.
//!
//! Queries run against an `Arc<Engine>` snapshot; a reload builds a new
//! engine and swaps the pointer, so in-flight queries finish on the old one.

use std::net::SocketAddr;
use std::sync::{Arc, RwLock};

use anyhow::{Context, Result};
use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use bugloc::pipeline::parse_rank_request;
use bugloc::{Config, Engine};

use crate::commands::{answer, open_engine};
use crate::ServeArgs;

pub struct AppState {
    cfg: Config,
    engine: RwLock<Arc<Engine>>,
}

impl AppState {
    fn snapshot(&self) -> Arc<Engine> {
        self.engine.read().expect("engine lock").clone()
    }

    fn reload(&self) -> Result<Arc<Engine>> {
        let fresh = Arc::new(open_engine(&self.cfg)?);
        *self.engine.write().expect("engine lock") = fresh.clone();
        log::info!(
            "store reloaded: {} segments, {} commits",
            fresh.segments.len(),
            fresh.commits.len()
        );
        Ok(fresh)
    }
}

fn json(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn error(status: StatusCode, message: impl std::fmt::Display) -> Response {
    json(
        status,
        serde_json::json!({ "error": message.to_string() }).to_string(),
    )
}

fn counts(engine: &Engine) -> String {
    serde_json::json!({
        "status": "ok",
        "segments": engine.segments.len(),
        "commits": engine.commits.len(),
    })
    .to_string()
}

async fn health(State(state): State<Arc<AppState>>) -> Response {
    json(StatusCode::OK, counts(&state.snapshot()))
}

async fn rank(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let req = match parse_rank_request(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, e),
    };
    let engine = state.snapshot();
    let result = tokio::task::spawn_blocking(move || answer(&engine, &state.cfg, &req)).await;
    match result {
        Ok(Ok(out)) => json(StatusCode::OK, out.to_json()),
        Ok(Err(e @ bugloc::Error::InvalidArgument(_))) => error(StatusCode::BAD_REQUEST, e),
        Ok(Err(e)) => error(StatusCode::INTERNAL_SERVER_ERROR, e),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e),
    }
}

async fn reload(State(state): State<Arc<AppState>>) -> Response {
    match tokio::task::spawn_blocking(move || state.reload().map(|e| counts(&e))).await {
        Ok(Ok(body)) => json(StatusCode::OK, body),
        Ok(Err(e)) => error(StatusCode::INTERNAL_SERVER_ERROR, format!("{e:#}")),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e),
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/rank", post(rank))
        .route("/reload", post(reload))
        .with_state(state)
}

#[cfg(unix)]
async fn reload_on_sighup(state: Arc<AppState>) {
    use tokio::signal::unix::{signal, SignalKind};
    let Ok(mut hup) = signal(SignalKind::hangup()) else {
        log::warn!("cannot listen for SIGHUP, use POST /reload");
        return;
    };
    while hup.recv().await.is_some() {
        let s = state.clone();
        match tokio::task::spawn_blocking(move || s.reload()).await {
            Ok(Ok(_)) => {}
            Ok(Err(e)) => log::error!("reload failed, keeping current store: {e:#}"),
            Err(e) => log::error!("reload task failed: {e}"),
        }
    }
}

#[cfg(not(unix))]
async fn reload_on_sighup(_state: Arc<AppState>) {}

pub fn run(cfg: Config, args: ServeArgs) -> Result<()> {
    let engine = Arc::new(open_engine(&cfg)?);
    let state = Arc::new(AppState {
        cfg,
        engine: RwLock::new(engine),
    });
    let addr: SocketAddr = format!("{}:{}", args.host, args.port)
        .parse()
        .with_context(|| format!("bad listen address {}:{}", args.host, args.port))?;

    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        tokio::spawn(reload_on_sighup(state.clone()));
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}
