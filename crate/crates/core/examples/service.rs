//! Drives the HTTP editing service in-process: creates a session from an
//! uploaded raster, applies an age edit, undoes it and exports.
//!
//! `cargo run --release --example service`

use std::sync::Arc;

use axum::body::Body;
use base64::Engine;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use semm::edit::EditConfig;
use semm::io::{displacement_scale, encode_displacement_png};
use semm::model::{DetailModel, TrainConfig};
use semm::service::{router, AppState};
use semm::synth::{Corpus, CorpusConfig};

async fn call(app: &axum::Router, method: &str, uri: &str, body: Value) -> (u16, Value) {
    let req = axum::http::Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status().as_u16();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

#[tokio::main]
async fn main() -> semm::Result<()> {
    let corpus = Corpus::generate(&CorpusConfig::new(20, 8, 64, 12))?;
    let model = Arc::new(DetailModel::fit(&corpus, &TrainConfig { steps: 20, ..TrainConfig::default() })?);
    let app = router(AppState::new(model, Some(Arc::new(corpus.clone())), EditConfig::default()));

    let (_, info) = call(&app, "GET", "/model/info", Value::Null).await;
    println!("model info: {info}");
    let disp = &corpus.test().next().expect("test sample").sample.disp;
    let scale = displacement_scale(disp);
    let png = encode_displacement_png(disp, scale)?;
    let body = json!({ "displacement_png": base64::engine::general_purpose::STANDARD.encode(png), "scale": scale, "age": 35.0 });
    let (status, created) = call(&app, "POST", "/session", body).await;
    let id = created["session_id"].as_str().expect("session id").to_owned();
    println!("POST /session -> {status}, id {id}");
    let (status, edited) = call(&app, "POST", &format!("/session/{id}/edit/age"), json!({ "age": 65.0 })).await;
    println!("edit/age -> {status}, history {}", edited["history_len"]);
    let (status, err) = call(&app, "POST", &format!("/session/{id}/edit/age"), json!({ "age": 95.0 })).await;
    println!("edit/age 95 -> {status} {}", err["error"]);
    let (status, undone) = call(&app, "POST", &format!("/session/{id}/undo"), Value::Null).await;
    println!("undo -> {status}, undone {}", undone["undone"]);
    let (status, export) = call(&app, "GET", &format!("/session/{id}/export"), Value::Null).await;
    println!("export -> {status}, age {}, {} history entries", export["age"], export["history"].as_array().map_or(0, |h| h.len()));
    Ok(())
}
