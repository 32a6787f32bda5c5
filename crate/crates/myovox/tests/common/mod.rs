#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use myovox::io::{self, CurveJson, TagsFile};
use myovox::service::{router, AppState, CreateRequest};
use myovox_core::curves::MuscleCurve;
use myovox_core::tetmesh::TetMesh;
use serde_json::Value;
use tower::ServiceExt;

pub fn create_request(mesh: &TetMesh, d_fat: Option<f64>) -> CreateRequest {
    CreateRequest {
        name: Some("cube".into()),
        node: io::write_node(mesh.vertices()),
        ele: io::write_ele(mesh.tets()),
        tags: Some(TagsFile::from(mesh.mesh_tags())),
        alpha: None,
        d_fat,
        eps: None,
    }
}

pub fn curve_body(c: &MuscleCurve) -> Value {
    serde_json::to_value(CurveJson::from(c)).unwrap()
}

pub struct Client {
    pub app: Router,
    pub state: Arc<AppState>,
}

impl Client {
    pub fn new(dir: &std::path::Path) -> Self {
        let state = AppState::new(dir);
        Client { app: router(state.clone()), state }
    }

    pub async fn send(&self, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
        let req = Request::builder().method(method).uri(uri);
        let req = match body {
            Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
            None => req.body(Body::empty()),
        }
        .unwrap();
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
        (status, bytes)
    }

    pub async fn json(&self, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let (s, b) = self.send(method, uri, body).await;
        (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
    }

    pub async fn create(&self, mesh: &TetMesh, d_fat: Option<f64>) -> String {
        let body = serde_json::to_value(create_request(mesh, d_fat)).unwrap();
        let (s, v) = self.json(Method::POST, "/sessions", Some(body)).await;
        assert_eq!(s, StatusCode::CREATED, "{v}");
        v["id"].as_str().unwrap().to_string()
    }

    pub async fn upsert(&self, id: &str, c: &MuscleCurve) -> u64 {
        let (s, v) = self.json(Method::POST, &format!("/sessions/{id}/curves"), Some(curve_body(c))).await;
        assert_eq!(s, StatusCode::OK, "{v}");
        v["revision"].as_u64().unwrap()
    }
}
