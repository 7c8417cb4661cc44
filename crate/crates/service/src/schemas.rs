//! JSON Schemas (draft 2020-12) of every request and response body.

pub const ERROR: &str = include_str!("../schemas/error.schema.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Endpoint {
    pub method: &'static str,
    pub path: &'static str,
    /// `None` for endpoints without a body.
    pub request: Option<&'static str>,
    /// Schema of 2xx bodies; every error body follows [`ERROR`].
    pub response: &'static str,
}

pub const ENDPOINTS: [Endpoint; 6] = [
    Endpoint {
        method: "POST",
        path: "/api/tag",
        request: Some(include_str!("../schemas/tag_request.schema.json")),
        response: include_str!("../schemas/tag_response.schema.json"),
    },
    Endpoint {
        method: "POST",
        path: "/api/predict",
        request: Some(include_str!("../schemas/predict_request.schema.json")),
        response: include_str!("../schemas/predict_response.schema.json"),
    },
    Endpoint {
        method: "POST",
        path: "/api/summarize",
        request: Some(include_str!("../schemas/summarize_request.schema.json")),
        response: include_str!("../schemas/summarize_response.schema.json"),
    },
    Endpoint {
        method: "POST",
        path: "/api/explain",
        request: Some(include_str!("../schemas/explain_request.schema.json")),
        response: include_str!("../schemas/explain_response.schema.json"),
    },
    Endpoint {
        method: "GET",
        path: "/api/schemes",
        request: None,
        response: include_str!("../schemas/schemes_response.schema.json"),
    },
    Endpoint {
        method: "GET",
        path: "/api/health",
        request: None,
        response: include_str!("../schemas/health_response.schema.json"),
    },
];

pub fn endpoint(method: &str, path: &str) -> Option<&'static Endpoint> {
    ENDPOINTS.iter().find(|e| e.method == method && e.path == path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schemas_are_json_objects() {
        for text in ENDPOINTS
            .iter()
            .flat_map(|e| [e.request, Some(e.response)])
            .flatten()
            .chain([ERROR])
        {
            let v: serde_json::Value = serde_json::from_str(text).unwrap();
            assert_eq!(v["type"], "object");
        }
        assert!(endpoint("POST", "/api/tag").is_some());
        assert!(endpoint("GET", "/api/tag").is_none());
    }
}
