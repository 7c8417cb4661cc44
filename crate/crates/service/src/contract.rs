//! Recorded request/response exchanges against the fixture models.
//!
//! [`requests`] is the canonical request set covering every endpoint and its
//! error statuses; [`RECORDED_PATH`] holds the responses captured from
//! [`crate::fixtures::fixture_state`]. Replays compare numbers with a
//! relative tolerance and everything else exactly.

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower::ServiceExt;

use crate::fixtures::{planted_example, SCHEME_CONTRAST_TEXT, TWO_SENTENCE_TEXT};

pub const RECORDED_PATH: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/recorded.json");

/// Relative tolerance for recorded numbers.
pub const NUMERIC_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedRequest {
    pub name: String,
    pub method: String,
    pub path: String,
    /// `Value::String` bodies are sent verbatim; other values as JSON.
    #[serde(default)]
    pub body: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    #[serde(flatten)]
    pub request: RecordedRequest,
    pub status: u16,
    pub response: Value,
}

fn post(name: &str, path: &str, body: Value) -> RecordedRequest {
    RecordedRequest {
        name: name.into(),
        method: "POST".into(),
        path: path.into(),
        body: Some(body),
    }
}

fn get(name: &str, path: &str) -> RecordedRequest {
    RecordedRequest {
        name: name.into(),
        method: "GET".into(),
        path: path.into(),
        body: None,
    }
}

pub fn requests() -> Vec<RecordedRequest> {
    let (planted, cue, _) = planted_example();
    let sentences = factlex_core::corpus::parse_document(&planted, "p")
        .expect("planted text parses")
        .sentences
        .len();
    let contrast = |scheme: &str| {
        json!({"text": SCHEME_CONTRAST_TEXT,
               "spec": {"scheme": scheme, "budget_words": 5, "quotas": {}, "lambda": 0}})
    };
    vec![
        post("tag_two_sentences", "/api/tag", json!({"text": TWO_SENTENCE_TEXT})),
        post("tag_empty_text", "/api/tag", json!({"text": ""})),
        post("tag_unparseable", "/api/tag", json!({"text": "... !!! ?"})),
        post("tag_invalid_json", "/api/tag", Value::String("{\"text\": ".into())),
        post("tag_empty_body", "/api/tag", Value::String(String::new())),
        post(
            "predict_planted",
            "/api/predict",
            json!({"text": planted, "input_selection": "factsOnly", "technique": 1}),
        ),
        post(
            "predict_planted_without_cue",
            "/api/predict",
            json!({"text": planted, "input_selection": "factsOnly", "technique": 1,
                   "what_if_excluded": [cue]}),
        ),
        post(
            "predict_var2_custom_scheme",
            "/api/predict",
            json!({"text": planted, "input_selection": "var2", "technique": 2,
                   "scheme": {"Fact": 50, "Issue": 1}}),
        ),
        post(
            "predict_exclude_all",
            "/api/predict",
            json!({"text": TWO_SENTENCE_TEXT, "input_selection": "full", "technique": 1,
                   "what_if_excluded": [0, 1]}),
        ),
        post(
            "predict_no_facts_without_fallback",
            "/api/predict",
            json!({"text": "It was held so.", "input_selection": "factsOnly", "technique": 1,
                   "facts_fallback": false}),
        ),
        post(
            "predict_bad_selection",
            "/api/predict",
            json!({"text": TWO_SENTENCE_TEXT, "input_selection": "facts", "technique": 1}),
        ),
        post(
            "predict_bad_technique",
            "/api/predict",
            json!({"text": TWO_SENTENCE_TEXT, "input_selection": "full", "technique": 4}),
        ),
        post(
            "predict_bad_exclusion",
            "/api/predict",
            json!({"text": planted, "input_selection": "full", "technique": 1,
                   "what_if_excluded": [sentences]}),
        ),
        post("summarize_contrast_variation1", "/api/summarize", contrast("variation1")),
        post("summarize_contrast_variation2", "/api/summarize", contrast("variation2")),
        post(
            "summarize_default_scheme_large_budget",
            "/api/summarize",
            json!({"text": TWO_SENTENCE_TEXT, "spec": {"budget_words": 1000}}),
        ),
        post(
            "summarize_given_roles",
            "/api/summarize",
            json!({"text": SCHEME_CONTRAST_TEXT, "roles": ["Fact", "Fact"],
                   "spec": {"budget_words": 5, "quotas": {}, "lambda": 0}}),
        ),
        post(
            "summarize_bad_scheme",
            "/api/summarize",
            json!({"text": TWO_SENTENCE_TEXT, "spec": {"scheme": "variation9"}}),
        ),
        post("explain_planted", "/api/explain", json!({"text": planted, "k": 3})),
        post(
            "explain_full_technique_3",
            "/api/explain",
            json!({"text": planted, "k": 2, "input_selection": "full", "technique": 3}),
        ),
        post("explain_k_zero", "/api/explain", json!({"text": planted, "k": 0})),
        post(
            "explain_single_sentence",
            "/api/explain",
            json!({"text": "The appellant filed a complaint.", "k": 1}),
        ),
        get("schemes", "/api/schemes"),
        get("health", "/api/health"),
    ]
}

/// Sends one request through `router`, returning the status and JSON body.
pub async fn replay(router: Router, req: &RecordedRequest) -> (StatusCode, Value) {
    let body = match &req.body {
        None => Body::empty(),
        Some(Value::String(raw)) => Body::from(raw.clone()),
        Some(v) => Body::from(v.to_string()),
    };
    let request = Request::builder()
        .method(req.method.as_str())
        .uri(req.path.as_str())
        .header("content-type", "application/json")
        .body(body)
        .expect("valid request");
    let response = router.oneshot(request).await.expect("router is infallible");
    let status = response.status();
    let bytes = to_bytes(response.into_body(), usize::MAX)
        .await
        .expect("response body");
    let value = serde_json::from_slice(&bytes).unwrap_or_else(|e| {
        panic!("{}: response is not JSON ({e}): {}", req.name, String::from_utf8_lossy(&bytes))
    });
    (status, value)
}

/// Replays every request of [`requests`] in order.
pub async fn record(router: Router) -> Vec<Exchange> {
    let mut out = Vec::new();
    for request in requests() {
        let (status, response) = replay(router.clone(), &request).await;
        out.push(Exchange {
            request,
            status: status.as_u16(),
            response,
        });
    }
    out
}

pub fn read_recorded() -> std::io::Result<Vec<Exchange>> {
    let text = std::fs::read_to_string(RECORDED_PATH)?;
    serde_json::from_str(&text).map_err(std::io::Error::other)
}

pub fn write_recorded(exchanges: &[Exchange]) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(exchanges).map_err(std::io::Error::other)?;
    text.push('\n');
    std::fs::write(RECORDED_PATH, text)
}

/// Structural equality with numbers compared to [`NUMERIC_TOLERANCE`];
/// the error names the first differing JSON path.
pub fn compare(expected: &Value, actual: &Value) -> Result<(), String> {
    compare_at("$", expected, actual)
}

fn compare_at(path: &str, expected: &Value, actual: &Value) -> Result<(), String> {
    match (expected, actual) {
        (Value::Number(a), Value::Number(b)) => {
            let (a, b) = (a.as_f64().unwrap_or(f64::NAN), b.as_f64().unwrap_or(f64::NAN));
            if (a - b).abs() <= NUMERIC_TOLERANCE * a.abs().max(b.abs()).max(1.0) {
                Ok(())
            } else {
                Err(format!("{path}: expected {a}, got {b}"))
            }
        }
        (Value::Array(a), Value::Array(b)) => {
            if a.len() != b.len() {
                return Err(format!("{path}: expected {} items, got {}", a.len(), b.len()));
            }
            a.iter()
                .zip(b)
                .enumerate()
                .try_for_each(|(i, (x, y))| compare_at(&format!("{path}[{i}]"), x, y))
        }
        (Value::Object(a), Value::Object(b)) => {
            if let Some(k) = a.keys().chain(b.keys()).find(|k| a.contains_key(*k) != b.contains_key(*k)) {
                return Err(format!("{path}: key {k:?} present on one side only"));
            }
            a.iter()
                .try_for_each(|(k, x)| compare_at(&format!("{path}.{k}"), x, &b[k]))
        }
        (a, b) if a == b => Ok(()),
        (a, b) => Err(format!("{path}: expected {a}, got {b}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comparison_tolerates_rounding_only() {
        assert!(compare(&json!({"p": 0.5, "a": [1, "x"]}), &json!({"p": 0.5 + 1e-12, "a": [1, "x"]})).is_ok());
        assert!(compare(&json!({"p": 0.5}), &json!({"p": 0.51})).unwrap_err().contains("$.p"));
        assert!(compare(&json!([1, 2]), &json!([1])).is_err());
        assert!(compare(&json!({"a": 1}), &json!({"b": 1})).is_err());
        assert!(compare(&json!("x"), &json!("y")).is_err());
    }

    #[test]
    fn request_names_are_unique_and_cover_every_endpoint() {
        let reqs = requests();
        let names: std::collections::HashSet<_> = reqs.iter().map(|r| &r.name).collect();
        assert_eq!(names.len(), reqs.len());
        for e in crate::schemas::ENDPOINTS {
            assert!(reqs.iter().any(|r| r.method == e.method && r.path == e.path), "{}", e.path);
        }
    }
}
