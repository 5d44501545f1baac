mod common;

use std::path::{Path, PathBuf};

use common::{fixture_workspace, run};
use serde_json::{json, Value};

struct Server {
    base: String,
}

impl Server {
    fn start(root: &Path, ui_dir: Option<PathBuf>) -> Self {
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        listener.set_nonblocking(true).unwrap();
        let addr = listener.local_addr().unwrap();
        let app = scenewatch_cli::server::router(root.to_path_buf(), ui_dir);
        std::thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(listener).unwrap();
                axum::serve(listener, app).await.unwrap();
            });
        });
        Self { base: format!("http://{addr}") }
    }

    fn agent() -> ureq::Agent {
        ureq::Agent::config_builder().http_status_as_error(false).build().into()
    }

    fn get(&self, path: &str) -> (u16, Vec<u8>) {
        let mut resp = Self::agent().get(&format!("{}{path}", self.base)).call().unwrap();
        let status = resp.status().as_u16();
        (status, resp.body_mut().read_to_vec().unwrap())
    }

    fn get_json(&self, path: &str) -> (u16, Value) {
        let (s, body) = self.get(path);
        (s, serde_json::from_slice(&body).unwrap())
    }

    fn post(&self, path: &str, body: &Value) -> (u16, Value) {
        let mut resp = Self::agent().post(&format!("{}{path}", self.base)).send_json(body).unwrap();
        let status = resp.status().as_u16();
        (status, serde_json::from_str(&resp.body_mut().read_to_string().unwrap()).unwrap())
    }
}

fn labeled_workspace(dir: &Path) -> PathBuf {
    let ws = fixture_workspace(dir);
    for id in ["fx", "fx2"] {
        assert!(run(&ws, &["segment", id, "--backend", "builtin"]).status.success());
    }
    ws
}

fn labels_body(scene: &str, records: &[(&str, &str)]) -> Value {
    json!({
        "schema": "scenewatch-labels/1",
        "scene_id": scene,
        "reference_id": "fx",
        "labels": records.iter().map(|(s, l)| json!({"segment_id": s, "label": l})).collect::<Vec<_>>(),
    })
}

#[test]
fn lists_scenes_and_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let ws = labeled_workspace(dir.path());
    let srv = Server::start(&ws, None);
    let (status, body) = srv.get_json("/api/scenes");
    assert_eq!(status, 200);
    assert_eq!(body["scenes"].as_array().unwrap().len(), 2);
    assert_eq!(body["pairs"][0]["id"], "same");
    assert_eq!(body["pairs"][0]["has_report"], false);
    assert_eq!(body["pairs"][0]["has_labels"], false);
}

#[test]
fn image_segments_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let ws = labeled_workspace(dir.path());
    let srv = Server::start(&ws, None);
    let (status, png) = srv.get("/api/scenes/fx/image");
    assert_eq!(status, 200);
    assert!(png.starts_with(b"\x89PNG"));
    let (status, manifest) = srv.get_json("/api/scenes/fx2/segments");
    assert_eq!(status, 200);
    assert_eq!(manifest["segments"].as_array().unwrap().len(), 2);
    let (status, err) = srv.get_json("/api/scenes/nope/segments");
    assert_eq!(status, 404);
    assert_eq!(err["error"]["code"], "UnknownScene");

    let (status, err) = srv.get_json("/api/reports/same");
    assert_eq!(status, 404);
    assert!(err["error"]["message"].is_string());
    std::fs::create_dir_all(ws.join("reports")).unwrap();
    std::fs::write(ws.join("reports/same.json"), "{\"schema\":\"scenewatch-report/1\"}").unwrap();
    let (status, rep) = srv.get_json("/api/reports/same");
    assert_eq!(status, 200);
    assert_eq!(rep["schema"], "scenewatch-report/1");
    assert_eq!(srv.get_json("/api/scenes").1["pairs"][0]["has_report"], true);
}

#[test]
fn label_round_trip_merge_and_persistence() {
    let dir = tempfile::tempdir().unwrap();
    let ws = labeled_workspace(dir.path());
    let srv = Server::start(&ws, None);

    let (status, empty) = srv.get_json("/api/labels/fx2");
    assert_eq!(status, 200);
    assert_eq!(empty["labels"].as_array().unwrap().len(), 0);
    assert_eq!(empty["reference_id"], "fx");

    let (status, _) = srv.post("/api/labels/fx2", &labels_body("fx2", &[("s0", "anomaly")]));
    assert_eq!(status, 200);
    let (status, merged) = srv.post("/api/labels/fx2", &labels_body("fx2", &[("s1", "normal"), ("s0", "normal")]));
    assert_eq!(status, 200);
    let got = merged["labels"].as_array().unwrap();
    assert_eq!(got.len(), 2);
    assert_eq!(got[0]["segment_id"], "s0");
    assert_eq!(got[0]["label"], "normal");

    let (_, fetched) = srv.get_json("/api/labels/fx2");
    assert_eq!(fetched, merged);

    let restarted = Server::start(&ws, None);
    let (_, after) = restarted.get_json("/api/labels/fx2");
    assert_eq!(after, merged);
    assert_eq!(restarted.get_json("/api/scenes").1["pairs"][0]["has_labels"], true);
}

#[test]
fn label_validation_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let ws = labeled_workspace(dir.path());
    let srv = Server::start(&ws, None);

    let mut bad = labels_body("fx2", &[("s0", "maybe")]);
    let (status, err) = srv.post("/api/labels/fx2", &bad);
    assert_eq!(status, 400);
    assert_eq!(err["error"]["field"], "labels[0].label");

    bad = labels_body("fx", &[("s0", "normal")]);
    let (status, err) = srv.post("/api/labels/fx2", &bad);
    assert_eq!(status, 400);
    assert_eq!(err["error"]["field"], "scene_id");

    bad = labels_body("fx2", &[("s0", "normal"), ("s9", "normal")]);
    let (status, err) = srv.post("/api/labels/fx2", &bad);
    assert_eq!(status, 400);
    assert_eq!(err["error"]["code"], "DanglingLabel");
    assert_eq!(err["error"]["field"], "labels[1].segment_id");

    bad = json!({"scene_id": "fx2", "reference_id": "fx", "labels": []});
    let (status, err) = srv.post("/api/labels/fx2", &bad);
    assert_eq!(status, 400);
    assert_eq!(err["error"]["field"], "schema");

    assert!(!ws.join("labels/fx2.json").exists());
}

#[test]
fn concurrent_label_writes_all_land() {
    let dir = tempfile::tempdir().unwrap();
    let ws = fixture_workspace(dir.path());
    let mut img = scenewatch_core::RgbImage::filled(64, 64, [0, 0, 0]);
    for i in 0..10 {
        let (x0, y0) = ((i % 5) * 12 + 2, (i / 5) * 12 + 2);
        for y in y0..y0 + 7 {
            for x in x0..x0 + 7 {
                img.set_pixel(x, y, [250, 250, 250]);
            }
        }
    }
    img.save_png(&ws.join("scenes/fx.png")).unwrap();
    let o = run(&ws, &["segment", "fx2", "--backend", "builtin"]);
    assert!(o.status.success());
    let manifest = scenewatch_core::manifest::load_manifest(&ws.join("manifests/fx2.json")).unwrap();
    let ids: Vec<String> = manifest.segments.iter().map(|m| m.id.clone()).collect();
    assert_eq!(ids.len(), 10);

    let srv = Server::start(&ws, None);
    std::thread::scope(|s| {
        for id in &ids {
            let srv = &srv;
            s.spawn(move || {
                let (status, _) = srv.post("/api/labels/fx2", &labels_body("fx2", &[(id, "anomaly")]));
                assert_eq!(status, 200);
            });
        }
    });
    let (_, labels) = srv.get_json("/api/labels/fx2");
    assert_eq!(labels["labels"].as_array().unwrap().len(), 10);
}

#[test]
fn serves_ui() {
    let dir = tempfile::tempdir().unwrap();
    let ws = labeled_workspace(dir.path());
    let srv = Server::start(&ws, None);
    let (status, html) = srv.get("/");
    assert_eq!(status, 200);
    assert!(String::from_utf8(html).unwrap().contains("<html"));
    assert_eq!(srv.get("/api/unknown").0, 404);

    let ui = dir.path().join("dist");
    std::fs::create_dir_all(&ui).unwrap();
    std::fs::write(ui.join("index.html"), "<html>built</html>").unwrap();
    std::fs::write(ui.join("app.js"), "console.log(1)").unwrap();
    let srv = Server::start(&ws, Some(ui));
    assert_eq!(srv.get("/").1, b"<html>built</html>");
    assert_eq!(srv.get("/app.js").0, 200);
    assert_eq!(srv.get("/missing.js").0, 404);
}
