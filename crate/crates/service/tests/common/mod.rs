#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use fairsense::config::EngineConfig;
use fairsense::{router, AppState};
use fairsense_core::index::{build_index, ingest_risk_corpus, ingest_rmf_corpus, save_index, StubEmbedder};
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

pub const STUB_DIM: usize = 256;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

/// Build stub-embedded indexes from the fixture corpora into `dir`.
pub fn build_fixture_indexes(dir: &Path) -> (PathBuf, PathBuf) {
    let stub = StubEmbedder::new(STUB_DIM).unwrap();
    let risks = dir.join("risks.idx");
    let rmf = dir.join("rmf.idx");
    let (r, _) = build_index(ingest_risk_corpus(fixture("risks.csv")).unwrap(), &stub).unwrap();
    let (m, _) = build_index(ingest_rmf_corpus(fixture("rmf.csv")).unwrap(), &stub).unwrap();
    save_index(&r, &risks).unwrap();
    save_index(&m, &rmf).unwrap();
    (risks, rmf)
}

/// Stub chat and vision, glyph OCR, stub embeddings, fixture indexes.
pub fn stub_config_text(dir: &Path) -> String {
    let (risks, rmf) = build_fixture_indexes(dir);
    format!(
        r#"
[energy]
joules_per_token = 0.5
grid_intensity = 400.0

[analysis]
model_layer = "optional"
recommendation_layer = "optional"

[chat]
kind = "stub"

[vision]
kind = "stub"

[ocr]
kind = "glyph"

[embedding]
kind = "stub"
dim = {STUB_DIM}

[index]
risks = "{}"
rmf = "{}"
"#,
        risks.display(),
        rmf.display()
    )
}

pub fn stub_config(dir: &Path) -> EngineConfig {
    EngineConfig::from_toml(&stub_config_text(dir), dir).unwrap()
}

pub fn stub_app(dir: &Path) -> Router {
    router(Arc::new(AppState::from_config(&stub_config(dir)).unwrap()))
}

pub struct Reply {
    pub status: StatusCode,
    pub content_type: String,
    pub body: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|e| {
            panic!("not JSON ({e}): {}", String::from_utf8_lossy(&self.body))
        })
    }
}

pub async fn send(app: &Router, req: Request<Body>) -> Reply {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let content_type = resp
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or_default()
        .to_string();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply {
        status,
        content_type,
        body,
    }
}

pub fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

pub fn post_json(uri: &str, body: &Value) -> Request<Body> {
    Request::post(uri)
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(body.to_string()))
        .unwrap()
}

pub fn post_bytes(uri: &str, content_type: &str, accept: Option<&str>, body: Vec<u8>) -> Request<Body> {
    let mut b = Request::post(uri).header(header::CONTENT_TYPE, content_type);
    if let Some(a) = accept {
        b = b.header(header::ACCEPT, a);
    }
    b.body(Body::from(body)).unwrap()
}

pub const BOUNDARY: &str = "fairsense-test-boundary";

/// `(name, optional (filename, content type), data)` parts.
pub fn multipart(parts: &[(&str, Option<(&str, &str)>, &[u8])]) -> Request<Body> {
    let mut body = Vec::new();
    for (name, file, data) in parts {
        body.extend_from_slice(format!("--{BOUNDARY}\r\n").as_bytes());
        match file {
            Some((filename, ct)) => body.extend_from_slice(
                format!(
                    "Content-Disposition: form-data; name=\"{name}\"; filename=\"{filename}\"\r\nContent-Type: {ct}\r\n\r\n"
                )
                .as_bytes(),
            ),
            None => body.extend_from_slice(
                format!("Content-Disposition: form-data; name=\"{name}\"\r\n\r\n").as_bytes(),
            ),
        }
        body.extend_from_slice(data);
        body.extend_from_slice(b"\r\n");
    }
    body.extend_from_slice(format!("--{BOUNDARY}--\r\n").as_bytes());
    Request::post("/v1/analyze/image")
        .header(
            header::CONTENT_TYPE,
            format!("multipart/form-data; boundary={BOUNDARY}"),
        )
        .body(Body::from(body))
        .unwrap()
}

/// Drop measured wall-clock fields so responses can be compared.
pub fn without_timing(mut v: Value) -> Value {
    fn walk(v: &mut Value) {
        match v {
            Value::Object(map) => {
                map.remove("wall_ms");
                map.values_mut().for_each(walk);
            }
            Value::Array(items) => items.iter_mut().for_each(walk),
            _ => {}
        }
    }
    walk(&mut v);
    v
}
