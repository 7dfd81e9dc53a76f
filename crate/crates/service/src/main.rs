use std::path::PathBuf;

use anyhow::Context;
use clap::Parser;
use tracing_subscriber::EnvFilter;

use factcheck_core::clock::TokioClock;
use factcheck_core::config::AppConfig;
use factcheck_core::feed::system_wall_clock;
use factcheck_service::{router, AppState, IdSource, ServiceParts};

/// Serves the verification, fact-check feed, and discussion API.
#[derive(Parser)]
struct Args {
    /// TOML config file; FACTCHECK_<SECTION>_<KEY> variables override it.
    #[arg(long, env = "FACTCHECK_CONFIG")]
    config: Option<PathBuf>,
    /// Overrides service.bind.
    #[arg(long)]
    bind: Option<String>,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .init();
    let args = Args::parse();
    let mut cfg = AppConfig::load(args.config.as_deref()).context("loading config")?;
    if let Some(bind) = args.bind {
        cfg.service.bind = bind;
    }
    let parts = ServiceParts::from_config(&cfg, TokioClock::shared(), system_wall_clock(), IdSource::Random)?;
    if !parts.credentials_present {
        tracing::warn!("live mode without provider credentials; /health reports degraded");
    }
    let state = AppState::start(parts);
    let listener = tokio::net::TcpListener::bind(&cfg.service.bind)
        .await
        .with_context(|| format!("binding {}", cfg.service.bind))?;
    tracing::info!(addr = %listener.local_addr()?, mode = %cfg.service.provider_mode, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
