//! HTTP service for interactive segmentation sessions.
//!
//! Clients upload a cloud, open a session (which voxelizes it once at a
//! chosen resolution), then post prompts in the cloud's own coordinates.
//! Every prompt runs the full pipeline and appends a result whose point
//! mask can be fetched as indices or RLE.
//!
//! Endpoints:
//!
//! | method | path | |
//! |---|---|---|
//! | POST | `/clouds?format=` | upload a payload; 201 new, 200 duplicate |
//! | GET | `/clouds/{id}` | bounds and point count |
//! | GET | `/clouds/{id}/points?stride=k` | every k-th point, original coordinates |
//! | POST | `/sessions` | `{cloud_id, resolution?, backend?}` |
//! | GET | `/sessions/{id}` | session and history |
//! | POST | `/sessions/{id}/prompts` | run a prompt; 409 while another runs |
//! | GET | `/sessions/{id}/results/{rid}/mask?format=` | `indices_json` or `rle_json` |
//! | GET | `/healthz` | liveness |

mod api;
pub mod config;
pub mod store;

use std::sync::Arc;

pub use api::{router, ApiError, PromptBody};
pub use config::{BackendSpec, ConfigError, ServiceConfig, ENV_PREFIX};
pub use store::{Store, StoreError};

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("server failure: {0}")]
    Io(#[from] std::io::Error),
}

/// Opens the store and serves until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> Result<(), ServeError> {
    let addr = config.listen.clone();
    let store = tokio::task::spawn_blocking(move || Store::open(config))
        .await
        .expect("store loader panicked")?;
    let listener = tokio::net::TcpListener::bind(&addr)
        .await
        .map_err(|source| ServeError::Bind { addr, source })?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(store)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
