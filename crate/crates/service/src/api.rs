//! Request and response bodies and the route handlers.
//!
//! Handlers read the raw body themselves so that empty, oversized and
//! malformed bodies all map to 400 with a JSON error.

use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::extract::State;
use axum::Json;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use factlex_core::chunker::Technique;
use factlex_core::corpus::{parse_document, DocView, Document, RhetoricalRole};
use factlex_core::explainer::{explain as explain_doc, ExplainError, Explanation};
use factlex_core::pipeline::{resolve_input_excluding, InputSelection, PipelineConfig, PipelineError};
use factlex_core::predictor::{predict_view, PredictError};
use factlex_core::roles::{tag as tag_doc, RoleSequence};
use factlex_core::summarizer::{summarize_view, RoleWeightScheme, SolverKind, SummarySpec};

use crate::{ApiError, AppState};

const REQUEST_DOC_ID: &str = "request";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TagRequest {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggedSentence {
    pub index: usize,
    pub text: String,
    pub role: RhetoricalRole,
    /// Max-marginal margin of the decoded role.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagResponse {
    pub sentences: Vec<TaggedSentence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictRequest {
    pub text: String,
    pub input_selection: InputSelection,
    /// 1 sliding window, 2 last k, 3 first k.
    pub technique: u8,
    #[serde(default)]
    pub scheme: Option<RoleWeightScheme>,
    /// Sentence indices removed before input selection.
    #[serde(default)]
    pub what_if_excluded: Vec<usize>,
    /// Overrides the model's fact-selection fallback.
    #[serde(default)]
    pub facts_fallback: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub label: u8,
    pub p: f64,
    /// Attention weight per chunk.
    pub alpha: Vec<f64>,
    pub used_sentences: Vec<usize>,
    pub fallback_used: bool,
    pub input_selection: InputSelection,
    pub technique: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummarizeRequest {
    pub text: String,
    /// A summary spec; a missing `scheme` means the service default.
    #[serde(default)]
    pub spec: Option<Value>,
    /// Roles per sentence, replacing the tagger's.
    #[serde(default)]
    pub roles: Option<Vec<RhetoricalRole>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummarizeResponse {
    pub selected: Vec<usize>,
    pub objective: f64,
    pub solver: SolverKind,
    pub budget_violated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplainRequest {
    pub text: String,
    pub k: usize,
    #[serde(default)]
    pub input_selection: Option<InputSelection>,
    #[serde(default)]
    pub technique: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeEntry {
    pub name: String,
    pub weights: BTreeMap<RhetoricalRole, u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemesResponse {
    pub schemes: Vec<SchemeEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HealthResponse {
    pub status: String,
    pub model_version: String,
}

type ApiResult<T> = Result<Json<T>, ApiError>;

async fn read_body(body: Body, limit: usize) -> Result<Value, ApiError> {
    let bytes = to_bytes(body, limit).await.map_err(|_| {
        ApiError::bad_request("body_too_large", format!("request body exceeds {limit} bytes"))
    })?;
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Err(ApiError::bad_request("empty_body", "request body is empty"));
    }
    serde_json::from_slice(&bytes)
        .map_err(|e| ApiError::bad_request("invalid_json", format!("request body is not JSON: {e}")))
}

fn typed<T: DeserializeOwned>(value: Value) -> Result<T, ApiError> {
    serde_json::from_value(value).map_err(|e| ApiError::bad_request("invalid_request", e.to_string()))
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
        .map(Json)
}

fn parse_text(text: &str) -> Result<Document, ApiError> {
    if text.trim().is_empty() {
        return Err(ApiError::bad_request("empty_text", "text is empty"));
    }
    let doc = parse_document(text, REQUEST_DOC_ID)
        .map_err(|e| ApiError::unprocessable("unparseable_document", e.to_string()))?;
    let has_words = doc
        .sentences
        .iter()
        .flat_map(|s| &s.tokens)
        .any(|t| t.chars().any(char::is_alphanumeric));
    if !has_words {
        return Err(ApiError::unprocessable("unparseable_document", "text contains no words"));
    }
    Ok(doc)
}

fn tag_roles(state: &AppState, doc: &Document) -> Result<RoleSequence, ApiError> {
    tag_doc(doc, &state.tagger).map_err(|e| ApiError::internal(format!("tagging failed: {e}")))
}

fn tagged(state: &AppState, text: &str) -> Result<Document, ApiError> {
    let doc = parse_text(text)?;
    let roles = tag_roles(state, &doc)?;
    Ok(doc.with_roles(&roles))
}

fn technique(n: u8) -> Result<Technique, ApiError> {
    Technique::from_number(n).ok_or_else(|| {
        ApiError::bad_request("invalid_request", format!("technique must be 1, 2 or 3, got {n}"))
    })
}

fn pipeline_error(e: PipelineError) -> ApiError {
    match e {
        PipelineError::EmptyInput(_) => ApiError::new(
            axum::http::StatusCode::CONFLICT,
            "empty_input",
            e.to_string(),
        ),
        PipelineError::InvalidExclusion { .. } => {
            ApiError::bad_request("invalid_exclusion", e.to_string())
        }
        PipelineError::Summary(_) => ApiError::bad_request("invalid_spec", e.to_string()),
    }
}

fn predict_error(e: PredictError) -> ApiError {
    match e {
        PredictError::Pipeline(p) => pipeline_error(p),
        other => ApiError::internal(other.to_string()),
    }
}

fn pipeline_for(
    state: &AppState,
    selection: InputSelection,
    technique_number: u8,
) -> Result<PipelineConfig, ApiError> {
    let mut cfg = state.model.pipeline.clone();
    cfg.input_selection = selection;
    cfg.chunking.technique = technique(technique_number)?;
    Ok(cfg)
}

pub fn run_tag(state: &AppState, req: TagRequest) -> Result<TagResponse, ApiError> {
    let doc = parse_text(&req.text)?;
    let roles = tag_roles(state, &doc)?;
    let sentences = doc
        .sentences
        .iter()
        .zip(roles.roles.iter().zip(&roles.scores))
        .map(|(s, (&role, &score))| TaggedSentence {
            index: s.index,
            text: s.text.clone(),
            role,
            score,
        })
        .collect();
    Ok(TagResponse { sentences })
}

pub fn run_predict(state: &AppState, req: PredictRequest) -> Result<PredictResponse, ApiError> {
    let mut cfg = pipeline_for(state, req.input_selection, req.technique)?;
    if req.scheme.is_some() {
        cfg.scheme = req.scheme;
    }
    if let Some(fallback) = req.facts_fallback {
        cfg.facts_fallback = fallback;
    }
    let doc = tagged(state, &req.text)?;
    let excluded: HashSet<usize> = req.what_if_excluded.into_iter().collect();
    let resolved = resolve_input_excluding(&doc, &cfg, &excluded).map_err(pipeline_error)?;
    let (p, alpha) = predict_view(&resolved.view, &state.model.params, &cfg.chunking, &state.encoder)
        .map_err(predict_error)?;
    Ok(PredictResponse {
        label: u8::from(p >= 0.5),
        p,
        alpha,
        used_sentences: resolved.view.indices().to_vec(),
        fallback_used: resolved.fallback_used,
        input_selection: cfg.input_selection,
        technique: cfg.chunking.technique.number(),
    })
}

pub fn run_summarize(state: &AppState, req: SummarizeRequest) -> Result<SummarizeResponse, ApiError> {
    let mut spec_value = req.spec.unwrap_or_else(|| Value::Object(Default::default()));
    let Value::Object(fields) = &mut spec_value else {
        return Err(ApiError::bad_request("invalid_spec", "spec must be an object"));
    };
    if !fields.contains_key("scheme") {
        let scheme = serde_json::to_value(&state.default_scheme)
            .map_err(|e| ApiError::internal(e.to_string()))?;
        fields.insert("scheme".into(), scheme);
    }
    let spec: SummarySpec = serde_json::from_value(spec_value)
        .map_err(|e| ApiError::bad_request("invalid_spec", e.to_string()))?;
    let doc = parse_text(&req.text)?;
    let roles = match req.roles {
        Some(roles) if roles.len() != doc.sentences.len() => {
            return Err(ApiError::bad_request(
                "invalid_request",
                format!("{} roles for {} sentences", roles.len(), doc.sentences.len()),
            ))
        }
        Some(roles) => RoleSequence::new(REQUEST_DOC_ID, roles),
        None => tag_roles(state, &doc)?,
    };
    let doc = doc.with_roles(&roles);
    let summary = summarize_view(&DocView::full(&doc), &spec)
        .map_err(|e| ApiError::bad_request("invalid_spec", e.to_string()))?;
    Ok(SummarizeResponse {
        selected: summary.selected,
        objective: summary.objective,
        solver: summary.solver,
        budget_violated: summary.budget_violated,
    })
}

pub fn run_explain(state: &AppState, req: ExplainRequest) -> Result<Explanation, ApiError> {
    if req.k == 0 {
        return Err(ApiError::bad_request("invalid_k", "k must be at least 1"));
    }
    let cfg = pipeline_for(
        state,
        req.input_selection.unwrap_or(state.model.pipeline.input_selection),
        req.technique.unwrap_or(state.model.pipeline.chunking.technique.number()),
    )?;
    let doc = tagged(state, &req.text)?;
    explain_doc(&doc, &state.model, &cfg, req.k, &state.encoder).map_err(|e| match e {
        ExplainError::TooFewSentences(_) => {
            ApiError::unprocessable("too_few_sentences", e.to_string())
        }
        ExplainError::InvalidK => ApiError::bad_request("invalid_k", e.to_string()),
        ExplainError::Predict(p) => predict_error(p),
    })
}

pub fn run_schemes() -> SchemesResponse {
    SchemesResponse {
        schemes: RoleWeightScheme::builtins()
            .into_iter()
            .map(|s| SchemeEntry {
                name: s.name,
                weights: s.weights,
            })
            .collect(),
    }
}

pub fn run_health(state: &AppState) -> HealthResponse {
    HealthResponse {
        status: "ok".into(),
        model_version: state.model_version.clone(),
    }
}

pub async fn tag(State(state): State<Arc<AppState>>, body: Body) -> ApiResult<TagResponse> {
    let req = typed(read_body(body, state.body_limit).await?)?;
    blocking(move || run_tag(&state, req)).await
}

pub async fn predict(State(state): State<Arc<AppState>>, body: Body) -> ApiResult<PredictResponse> {
    let req = typed(read_body(body, state.body_limit).await?)?;
    blocking(move || run_predict(&state, req)).await
}

pub async fn summarize(
    State(state): State<Arc<AppState>>,
    body: Body,
) -> ApiResult<SummarizeResponse> {
    let req = typed(read_body(body, state.body_limit).await?)?;
    blocking(move || run_summarize(&state, req)).await
}

pub async fn explain(State(state): State<Arc<AppState>>, body: Body) -> ApiResult<Explanation> {
    let req = typed(read_body(body, state.body_limit).await?)?;
    blocking(move || run_explain(&state, req)).await
}

pub async fn schemes() -> Json<SchemesResponse> {
    Json(run_schemes())
}

pub async fn health(State(state): State<Arc<AppState>>) -> Json<HealthResponse> {
    Json(run_health(&state))
}
