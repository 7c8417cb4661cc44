//! Replays the recorded exchanges and validates every body against its schema.
//! `UPDATE_FIXTURES=1` re-records instead.

use factlex_service::contract::{self, Exchange};
use factlex_service::fixtures::fixture_state;
use factlex_service::router;
use factlex_service::schemas::{self, endpoint};
use serde_json::Value;

fn validator(schema: &str) -> jsonschema::Validator {
    jsonschema::validator_for(&serde_json::from_str::<Value>(schema).unwrap()).unwrap()
}

fn schema_errors(schema: &str, instance: &Value) -> Vec<String> {
    validator(schema).iter_errors(instance).map(|e| format!("{} at {}", e, e.instance_path())).collect()
}

fn recorded() -> Vec<Exchange> {
    contract::read_recorded().expect("recorded fixtures exist; regenerate with UPDATE_FIXTURES=1")
}

fn by_name<'a>(exchanges: &'a [Exchange], name: &str) -> &'a Exchange {
    exchanges.iter().find(|e| e.request.name == name).unwrap_or_else(|| panic!("no exchange {name}"))
}

#[tokio::test(flavor = "multi_thread")]
async fn recorded_exchanges_replay_and_validate() {
    let router = router(fixture_state());
    if std::env::var_os("UPDATE_FIXTURES").is_some() {
        contract::write_recorded(&contract::record(router.clone()).await).unwrap();
    }
    let exchanges = recorded();
    let recorded_requests: Vec<_> = exchanges.iter().map(|e| e.request.clone()).collect();
    assert_eq!(recorded_requests, contract::requests(), "request set changed; re-record");
    for ex in &exchanges {
        let ep = endpoint(&ex.request.method, &ex.request.path).expect("documented endpoint");
        let (status, body) = contract::replay(router.clone(), &ex.request).await;
        assert_eq!(status.as_u16(), ex.status, "{}", ex.request.name);
        if let Err(diff) = contract::compare(&ex.response, &body) {
            panic!("{}: {diff}", ex.request.name);
        }
        let schema = if ex.status < 400 { ep.response } else { schemas::ERROR };
        let errors = schema_errors(schema, &ex.response);
        assert!(errors.is_empty(), "{}: {errors:?}", ex.request.name);
        if let (true, Some(request_schema), Some(req_body)) =
            (ex.status < 400, ep.request, &ex.request.body)
        {
            let errors = schema_errors(request_schema, req_body);
            assert!(errors.is_empty(), "{} request: {errors:?}", ex.request.name);
        }
    }
}

#[test]
fn recorded_statuses_and_values() {
    let ex = recorded();
    let status = |name: &str| by_name(&ex, name).status;
    let body = |name: &str| &by_name(&ex, name).response;

    assert_eq!(status("tag_two_sentences"), 200);
    let sentences = body("tag_two_sentences")["sentences"].as_array().unwrap();
    let roles: Vec<_> = sentences.iter().map(|s| s["role"].as_str().unwrap()).collect();
    assert_eq!(roles, ["Fact", "Issue"]);
    for name in ["tag_empty_text", "tag_invalid_json", "tag_empty_body"] {
        assert_eq!(status(name), 400, "{name}");
    }
    assert_eq!(status("tag_unparseable"), 422);

    assert_eq!(status("predict_planted"), 200);
    assert_eq!(status("predict_exclude_all"), 409);
    assert_eq!(status("predict_no_facts_without_fallback"), 409);
    for name in ["predict_bad_selection", "predict_bad_technique", "predict_bad_exclusion"] {
        assert_eq!(status(name), 400, "{name}");
    }
    let with_cue = body("predict_planted")["p"].as_f64().unwrap();
    let without = body("predict_planted_without_cue")["p"].as_f64().unwrap();
    let flipped = (with_cue >= 0.5) != (without >= 0.5);
    assert!(
        flipped || (without - 0.5).abs() < (with_cue - 0.5).abs(),
        "removing the cue moves p from {with_cue} to {without}"
    );

    assert_eq!(body("summarize_contrast_variation1")["selected"], serde_json::json!([1]));
    assert_eq!(body("summarize_contrast_variation2")["selected"], serde_json::json!([0]));
    assert_eq!(body("summarize_default_scheme_large_budget")["selected"], serde_json::json!([0, 1]));
    assert_eq!(status("summarize_bad_scheme"), 400);

    assert_eq!(status("explain_planted"), 200);
    assert_eq!(body("explain_planted")["items"].as_array().unwrap().len(), 3);
    assert_eq!(status("explain_k_zero"), 400);
    assert_eq!(status("explain_single_sentence"), 422);

    assert_eq!(status("health"), 200);
    let schemes = body("schemes")["schemes"].as_array().unwrap();
    assert_eq!(schemes[0]["name"], "variation1");
    assert_eq!(schemes[0]["weights"]["Fact"], 32);
    assert_eq!(schemes[1]["weights"]["RatioOfDecision"], 64);
}

#[test]
fn schemas_reject_malformed_bodies() {
    let ep = endpoint("POST", "/api/predict").unwrap();
    let bad_request = serde_json::json!({"text": "x", "input_selection": "facts", "technique": 1});
    assert!(!schema_errors(ep.request.unwrap(), &bad_request).is_empty());
    let bad_response = serde_json::json!({"label": 2, "p": 1.5});
    assert!(!schema_errors(ep.response, &bad_response).is_empty());
    let error = serde_json::json!({"error": {"code": "x"}});
    assert!(!schema_errors(schemas::ERROR, &error).is_empty());
}
