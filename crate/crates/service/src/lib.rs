//! HTTP JSON API over a tagger and a predictor loaded once at startup.
//!
//! | method | path             | body                                   |
//! |--------|------------------|----------------------------------------|
//! | POST   | `/api/tag`       | `{text}`                               |
//! | POST   | `/api/predict`   | `{text, input_selection, technique, scheme?, what_if_excluded?, facts_fallback?}` |
//! | POST   | `/api/summarize` | `{text, spec?, roles?}`                |
//! | POST   | `/api/explain`   | `{text, k, input_selection?, technique?}` |
//! | GET    | `/api/schemes`   |                                        |
//! | GET    | `/api/health`    |                                        |
//!
//! Errors are `{"error": {"code": str, "message": str}}`. The JSON schemas of
//! every body live in [`schemas`]; [`contract`] replays recorded exchanges.

pub mod api;
pub mod contract;
mod error;
pub mod fixtures;
pub mod schemas;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::http::{HeaderValue, Method};
use axum::routing::{get, post};
use axum::Router;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tower_http::cors::{AllowOrigin, CorsLayer};

use factlex_core::encoder::{fnv1a_seeded, HashedNgramEncoder};
use factlex_core::predictor::{PredictError, PredictorModel, MODEL_FORMAT, MODEL_FORMAT_VERSION};
use factlex_core::roles::{RolesError, TaggerModel};
use factlex_core::summarizer::RoleWeightScheme;

pub use error::ApiError;

pub const DEFAULT_BODY_LIMIT: usize = 1 << 20;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("invalid service config: {0}")]
    Config(String),
    #[error("loading tagger: {0}")]
    Tagger(#[from] RolesError),
    #[error("loading predictor: {0}")]
    Predictor(#[from] PredictError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn default_bind_address() -> SocketAddr {
    SocketAddr::from(([127, 0, 0, 1], 8080))
}
fn default_scheme() -> RoleWeightScheme {
    RoleWeightScheme::variation1()
}
fn default_body_limit() -> usize {
    DEFAULT_BODY_LIMIT
}
fn default_cors() -> Vec<String> {
    vec!["http://localhost:*".into(), "http://127.0.0.1:*".into()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_bind_address")]
    pub bind_address: SocketAddr,
    pub model_path: PathBuf,
    pub tagger_path: PathBuf,
    /// Scheme for `/api/summarize` requests whose spec names none.
    #[serde(default = "default_scheme")]
    pub default_scheme: RoleWeightScheme,
    #[serde(default = "default_body_limit")]
    pub request_body_limit: usize,
    /// Allowed origins; a trailing `:*` matches any port.
    #[serde(default = "default_cors")]
    pub cors_allow_list: Vec<String>,
}

impl ServiceConfig {
    pub fn new(model_path: impl Into<PathBuf>, tagger_path: impl Into<PathBuf>) -> Self {
        Self {
            bind_address: default_bind_address(),
            model_path: model_path.into(),
            tagger_path: tagger_path.into(),
            default_scheme: default_scheme(),
            request_body_limit: DEFAULT_BODY_LIMIT,
            cors_allow_list: default_cors(),
        }
    }
}

/// Immutable models and settings shared by all requests.
#[derive(Debug)]
pub struct AppState {
    pub tagger: TaggerModel,
    pub model: PredictorModel,
    pub encoder: HashedNgramEncoder,
    pub default_scheme: RoleWeightScheme,
    pub body_limit: usize,
    pub model_version: String,
}

impl AppState {
    pub fn new(
        tagger: TaggerModel,
        model: PredictorModel,
        default_scheme: RoleWeightScheme,
        body_limit: usize,
    ) -> Result<Self, ServiceError> {
        if body_limit == 0 {
            return Err(ServiceError::Config("requestBodyLimit must be positive".into()));
        }
        let encoder = model.builtin_encoder()?;
        let model_version = model_version(&model)?;
        Ok(Self {
            tagger,
            model,
            encoder,
            default_scheme,
            body_limit,
            model_version,
        })
    }

    pub fn load(config: &ServiceConfig) -> Result<Self, ServiceError> {
        let tagger = TaggerModel::load(&config.tagger_path)?;
        let model = PredictorModel::load(&config.model_path)?;
        Self::new(tagger, model, config.default_scheme.clone(), config.request_body_limit)
    }
}

/// `{format}/{version}+{fnv1a of the model file:016x}`.
fn model_version(model: &PredictorModel) -> Result<String, ServiceError> {
    let mut bytes = Vec::new();
    model.write_json(&mut bytes)?;
    Ok(format!(
        "{MODEL_FORMAT}/{MODEL_FORMAT_VERSION}+{:016x}",
        fnv1a_seeded(0, &bytes)
    ))
}

/// Whether `origin` matches an allow-list entry exactly, or an entry
/// `scheme://host:*` with any port or none.
pub fn origin_allowed(allow_list: &[String], origin: &str) -> bool {
    allow_list.iter().any(|entry| match entry.strip_suffix(":*") {
        Some(prefix) => match origin.strip_prefix(prefix) {
            Some("") => true,
            Some(rest) => rest
                .strip_prefix(':')
                .is_some_and(|port| !port.is_empty() && port.bytes().all(|b| b.is_ascii_digit())),
            None => false,
        },
        None => entry == origin,
    })
}

fn cors_layer(allow_list: Vec<String>) -> CorsLayer {
    CorsLayer::new()
        .allow_origin(AllowOrigin::predicate(move |origin: &HeaderValue, _| {
            origin.to_str().is_ok_and(|o| origin_allowed(&allow_list, o))
        }))
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([axum::http::header::CONTENT_TYPE])
}

/// The API routes without CORS.
pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/tag", post(api::tag))
        .route("/api/predict", post(api::predict))
        .route("/api/summarize", post(api::summarize))
        .route("/api/explain", post(api::explain))
        .route("/api/schemes", get(api::schemes))
        .route("/api/health", get(api::health))
        .with_state(state)
}

/// The API routes behind the CORS allow-list.
pub fn app(state: Arc<AppState>, cors_allow_list: Vec<String>) -> Router {
    router(state).layer(cors_layer(cors_allow_list))
}

/// Loads the models and serves until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    let state = Arc::new(AppState::load(&config)?);
    log::info!("loaded model {}", state.model_version);
    let listener = tokio::net::TcpListener::bind(config.bind_address).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app(state, config.cors_allow_list))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_names() {
        let cfg: ServiceConfig =
            serde_json::from_str(r#"{"modelPath": "m.json", "taggerPath": "t.json"}"#).unwrap();
        assert_eq!(cfg, ServiceConfig::new("m.json", "t.json"));
        assert_eq!(cfg.bind_address.to_string(), "127.0.0.1:8080");
        let cfg: ServiceConfig = serde_json::from_str(
            r#"{"modelPath": "m", "taggerPath": "t", "defaultScheme": "variation2",
                "requestBodyLimit": 10, "corsAllowList": [], "bindAddress": "0.0.0.0:1"}"#,
        )
        .unwrap();
        assert_eq!(cfg.default_scheme, RoleWeightScheme::variation2());
        assert!(serde_json::from_str::<ServiceConfig>(r#"{"modelPath": "m"}"#).is_err());
        assert!(serde_json::from_str::<ServiceConfig>(
            r#"{"modelPath": "m", "taggerPath": "t", "port": 1}"#
        )
        .is_err());
    }

    #[test]
    fn origin_matching() {
        let list = default_cors();
        assert!(origin_allowed(&list, "http://localhost:5173"));
        assert!(origin_allowed(&list, "http://localhost"));
        assert!(origin_allowed(&list, "http://127.0.0.1:8080"));
        assert!(!origin_allowed(&list, "http://localhost.evil.com"));
        assert!(!origin_allowed(&list, "http://localhost:"));
        assert!(!origin_allowed(&list, "https://localhost:5173"));
        assert!(!origin_allowed(&list, "http://example.com"));
        let exact = vec!["https://ui.example".to_string()];
        assert!(origin_allowed(&exact, "https://ui.example"));
        assert!(!origin_allowed(&exact, "https://ui.example:1"));
    }

    #[test]
    fn zero_body_limit_is_rejected() {
        let err = AppState::new(
            fixtures::fixture_tagger(),
            fixtures::fixture_predictor().clone(),
            default_scheme(),
            0,
        );
        assert!(matches!(err, Err(ServiceError::Config(_))));
    }
}
