//! HTTP/JSON service over the quantum brush engine.
//!
//! Sessions hold a canvas with a bounded undo history. Effects run as jobs on
//! a bounded worker pool and are polled through `/jobs/{id}`; a trained
//! Steerable model stays cached on its session so `t` can be re-evaluated
//! without retraining.

mod error;
mod routes;
mod state;

pub use error::ApiError;
pub use routes::router;
pub use state::{AppState, Config, JobKind, JobStatus, TRAINED_PER_SESSION, UNDO_DEPTH};

/// Binds `0.0.0.0:{port}` and serves until Ctrl-C.
pub async fn serve(config: Config) -> std::io::Result<()> {
    let port = config.port;
    let state = AppState::new(config).map_err(std::io::Error::other)?;
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    eprintln!("qbrush-server listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
