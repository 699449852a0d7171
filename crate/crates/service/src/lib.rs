//! HTTP/JSON front end for the analysis engine.
//!
//! Sessions live in memory. Each request works on a snapshot of its session
//! taken when the request starts, so concurrent evaluations never observe a
//! half-applied mutation.

mod api;
pub mod error;
pub mod state;

use std::net::SocketAddr;
use std::sync::Arc;

pub use api::router;
pub use error::ApiError;
pub use state::{AppState, Session, SessionExport, Settings};

pub const DEFAULT_HOST: &str = "127.0.0.1";
pub const DEFAULT_PORT: u16 = 8137;

/// Binds `host:port`. Port 0 picks an ephemeral port.
pub async fn bind(host: &str, port: u16) -> std::io::Result<tokio::net::TcpListener> {
    tokio::net::TcpListener::bind((host, port)).await
}

/// Serves the API on an already bound listener until the future is dropped.
pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    let addr: SocketAddr = listener.local_addr()?;
    tracing::info!(%addr, data_root = %state.data_root().display(), "listening");
    axum::serve(listener, router(state)).await
}
