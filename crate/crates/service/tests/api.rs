use std::path::Path;
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use orderscope_core::ensemble::write_ensemble;
use orderscope_core::synth::{generate_run, generate_to_dir, EnsembleSpec, GeneratorSpec};
use orderscope_core::{Ensemble, ParameterPoint};
use orderscope_service::{router, AppState};
use serde_json::{json, Value};
use tempfile::TempDir;
use tower::ServiceExt;

struct Fixture {
    _dir: TempDir,
    app: Router,
}

/// Data root with the default 5 x 6 grid (200 steps, t up to 497.5) under
/// `grid/`, a one-run 6664-step ensemble under `long/`, and a corrupted
/// ensemble under `bad/`.
fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = EnsembleSpec::default_grid(7);
    spec.steps = 200;
    generate_to_dir(&spec, &dir.path().join("grid")).unwrap();

    let mut long = GeneratorSpec::noisy(7, 6664, 0.1, 3);
    long.id = "long".into();
    long.params = ParameterPoint::new(2.0, -1.0);
    let ensemble = Ensemble::new("long", 7, vec![generate_run(&long).unwrap()]).unwrap();
    write_ensemble(&ensemble, &dir.path().join("long")).unwrap();

    write_bad(&dir.path().join("bad"));
    let app = router(Arc::new(AppState::new(dir.path())));
    Fixture { _dir: dir, app }
}

fn write_bad(dir: &Path) {
    std::fs::create_dir_all(dir).unwrap();
    std::fs::write(
        dir.join("manifest.json"),
        r#"{"k":1,"runs":[{"id":"ok","d":1,"beta":0,"file":"ok.csv"},{"id":"broken","d":2,"beta":0,"file":"broken.csv"}]}"#,
    )
    .unwrap();
    std::fs::write(dir.join("ok.csv"), "t,p0x,p0y,p0z\n0,1,0,0\n1,0,1,0\n").unwrap();
    std::fs::write(dir.join("broken.csv"), "t,p0x,p0y,p0z\n0,1,0,0\n1,0,1,0\n2,0.6,0,0\n").unwrap();
}

async fn raw(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Bytes) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes())
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, bytes) = raw(app, method, uri, body).await;
    let value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, value)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    call(app, Method::GET, uri, None).await
}

async fn post(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    call(app, Method::POST, uri, Some(body)).await
}

async fn put(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    call(app, Method::PUT, uri, Some(body)).await
}

async fn load(app: &Router, path: &str) -> String {
    let (status, body) = post(app, "/ensembles", json!({ "path": path })).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    body["ensemble_id"].as_str().unwrap().to_string()
}

async fn session(app: &Router, ensemble: &str) -> String {
    let (status, body) = post(app, "/sessions", json!({ "ensemble_id": ensemble })).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    body["session_id"].as_str().unwrap().to_string()
}

async fn add_measure(app: &Router, s: &str, name: &str, kind: &str, source: &str) {
    let (status, body) = post(
        app,
        &format!("/sessions/{s}/measures"),
        json!({ "name": name, "kind": kind, "source": source }),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
}

/// Session on the grid ensemble with `recurrence` (per-step) and `order`
/// (aggregate) measures.
async fn grid_session(app: &Router) -> (String, String) {
    let e = load(app, "grid").await;
    let s = session(app, &e).await;
    add_measure(app, &s, "recurrence", "per_step", "recurrence(10)").await;
    add_measure(app, &s, "order", "aggregate", "mean(S)").await;
    (e, s)
}

#[tokio::test]
async fn health_and_builtins() {
    let f = fixture();
    let (status, body) = get(&f.app, "/health").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
    let (status, body) = get(&f.app, "/builtins").await;
    assert_eq!(status, StatusCode::OK);
    let names: Vec<&str> = body
        .as_array()
        .unwrap()
        .iter()
        .map(|b| b["name"].as_str().unwrap())
        .collect();
    assert_eq!(names.len(), 25);
    assert!(names.contains(&"recurrence") && names.contains(&"twmean"));
}

#[tokio::test]
async fn load_valid_directory() {
    let f = fixture();
    let (status, body) = post(&f.app, "/ensembles", json!({ "path": "grid" })).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["k"], 7);
    assert_eq!(body["D"], 21);
    let runs = body["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 30);
    let first = &runs[0];
    assert_eq!(first["steps"], 200);
    assert_eq!(first["t_min"], 0.0);
    assert_eq!(first["t_max"], 497.5);

    let id = body["ensemble_id"].as_str().unwrap();
    let (status, again) = get(&f.app, &format!("/ensembles/{id}")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(again, body);
}

#[tokio::test]
async fn load_errors() {
    let f = fixture();
    let (status, body) = post(&f.app, "/ensembles", json!({ "path": "bad" })).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["code"], "validation");
    assert_eq!(body["error"]["run"], "broken");
    assert_eq!(body["error"]["row"], 2);

    let (status, body) = post(&f.app, "/ensembles", json!({ "path": "nowhere" })).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"]["code"], "not_found");

    let (status, _) = post(&f.app, "/ensembles", json!({ "path": ".." })).await;
    assert_eq!(status, StatusCode::FORBIDDEN);

    let (status, _) = post(&f.app, "/ensembles", json!({ "nonsense": 1 })).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, _) = get(&f.app, "/ensembles/e999").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn load_inline_manifest() {
    let f = fixture();
    let manifest = json!({
        "k": 1,
        "runs": [{ "id": "ok", "d": 1.0, "beta": 0.0, "file": "ok.csv" }]
    });
    let (status, body) = post(&f.app, "/ensembles", json!({ "manifest": manifest, "base": "bad" })).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["runs"].as_array().unwrap().len(), 1);
    assert_eq!(body["D"], 3);
}

#[tokio::test]
async fn component_series() {
    let f = fixture();
    let e = load(&f.app, "grid").await;
    let uri = format!("/ensembles/{e}/runs/d1.0_beta0.0/series");

    let (status, all) = get(&f.app, &format!("{uri}?particle=0&axis=x")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(all["times"].as_array().unwrap().len(), 200);
    let csv = std::fs::read_to_string(f._dir.path().join("grid/runs/d1.0_beta0.0.csv")).unwrap();
    let second_row: Vec<f64> = csv
        .lines()
        .nth(2)
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(all["values"][1].as_f64().unwrap(), second_row[1]);

    let (status, late) = get(&f.app, &format!("{uri}?particle=0&axis=x&from=300")).await;
    assert_eq!(status, StatusCode::OK);
    let times: Vec<f64> = late["times"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| t.as_f64().unwrap())
        .collect();
    assert_eq!(times.first(), Some(&300.0));
    assert!(times.iter().all(|&t| t >= 300.0));
    assert_eq!(times.len(), 80);

    let (status, z) = get(&f.app, &format!("{uri}?particle=6&axis=z")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(z["values"].as_array().unwrap().len(), 200);

    for bad in [
        "particle=9&axis=x",
        "particle=0&axis=w",
        "axis=x",
        "particle=x&axis=x",
        "particle=0&axis=x&from=5&to=1",
    ] {
        let (status, body) = get(&f.app, &format!("{uri}?{bad}")).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{bad}");
        assert!(body["error"]["message"].is_string());
    }
    let (status, _) = get(&f.app, &format!("/ensembles/{e}/runs/nope/series?particle=0&axis=x")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn measure_submission() {
    let f = fixture();
    let e = load(&f.app, "grid").await;
    let s = session(&f.app, &e).await;
    let uri = format!("/sessions/{s}/measures");

    let (status, body) = post(
        &f.app,
        &uri,
        json!({"name": "recurrence", "kind": "per_step", "source": "recurrence(10)"}),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["measure_id"], "recurrence");
    let (status, _) = post(
        &f.app,
        &uri,
        json!({"name": "order", "kind": "aggregate", "source": "mean(S)"}),
    )
    .await;
    assert_eq!(status, StatusCode::OK);

    let (status, body) = post(
        &f.app,
        &uri,
        json!({"name": "broken", "kind": "per_step", "source": "norm("}),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"]["line"], 1);
    assert_eq!(body["error"]["col"], 6);

    let (status, body) = post(&f.app, &uri, json!({"name": "vec", "kind": "per_step", "source": "X"})).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"]["code"], "measure");

    // re-posting a name replaces the definition
    let (status, _) = post(
        &f.app,
        &uri,
        json!({"name": "order", "kind": "aggregate", "source": "max(S)"}),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let (_, sess) = get(&f.app, &format!("/sessions/{s}")).await;
    let measures = sess["measures"].as_array().unwrap();
    assert_eq!(measures.len(), 2);
    let order = measures.iter().find(|m| m["name"] == "order").unwrap();
    assert_eq!(order["source"], "max(S)");

    let (status, _) = post(
        &f.app,
        "/sessions/s999/measures",
        json!({"name": "a", "kind": "per_step", "source": "t"}),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn evaluate_per_step_and_aggregate() {
    let f = fixture();
    let (_, s) = grid_session(&f.app).await;
    let uri = format!("/sessions/{s}/evaluate");
    let runs = json!(["d1.0_beta0.0", "d2.0_beta-4.5", "d3.0_beta-1.0"]);

    let (status, body) = post(&f.app, &uri, json!({"measure": "recurrence", "runs": runs})).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let results = body["results"].as_array().unwrap();
    assert_eq!(results.len(), 3);
    assert_eq!(results[0]["run"], "d1.0_beta0.0");
    assert!(results.iter().all(|r| r["values"].as_array().unwrap().len() == 200));
    assert!(results[0]["values"]
        .as_array()
        .unwrap()
        .iter()
        .all(|v| v.as_f64().unwrap() <= 1e-9));

    let (status, body) = post(&f.app, &uri, json!({"measure": "order", "step_measure": "recurrence"})).await;
    assert_eq!(status, StatusCode::OK);
    let results = body["results"].as_array().unwrap();
    assert_eq!(results.len(), 30);
    let ids: Vec<&str> = results.iter().map(|r| r["run"].as_str().unwrap()).collect();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);
    assert!(results.iter().all(|r| r["value"].is_number()));

    // empty window gives a per-run error, not a failed batch
    let (status, body) = post(
        &f.app,
        &uri,
        json!({"measure": "order", "step_measure": "recurrence", "runs": ["d1.0_beta0.0"], "from": 1000.0, "to": 2000.0}),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["results"][0]["error"]["kind"], "empty_window");

    let (status, _) = post(&f.app, &uri, json!({"measure": "order"})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = post(&f.app, &uri, json!({"measure": "missing"})).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = post(&f.app, &uri, json!({"measure": "recurrence", "runs": ["nope"]})).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn runtime_failures_are_per_run() {
    let f = fixture();
    let (_, s) = grid_session(&f.app).await;
    add_measure(&f.app, &s, "ratio", "per_step", "1 / (d - 1)").await;
    let (status, body) = post(&f.app, &format!("/sessions/{s}/evaluate"), json!({"measure": "ratio"})).await;
    assert_eq!(status, StatusCode::OK);
    let results = body["results"].as_array().unwrap();
    let failed: Vec<&Value> = results.iter().filter(|r| r.get("error").is_some()).collect();
    assert_eq!(failed.len(), 6);
    assert!(failed.iter().all(|r| r["run"].as_str().unwrap().starts_with("d1.0_")));
    assert_eq!(failed[0]["error"]["kind"], "measure");
    assert_eq!(failed[0]["error"]["step"], 0);
}

#[tokio::test]
async fn decimation_keeps_extremes() {
    let f = fixture();
    let e = load(&f.app, "long").await;
    let s = session(&f.app, &e).await;
    add_measure(&f.app, &s, "x0", "per_step", "X[0] + 0.5 * X[4]").await;
    let uri = format!("/sessions/{s}/evaluate");

    let (_, full) = post(&f.app, &uri, json!({"measure": "x0"})).await;
    let full: Vec<f64> = full["results"][0]["values"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(full.len(), 6664);
    let lo = full.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = full.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let (status, body) = post(&f.app, &uri, json!({"measure": "x0", "max_points": 1000})).await;
    assert_eq!(status, StatusCode::OK);
    let values: Vec<f64> = body["results"][0]["values"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    let times = body["results"][0]["times"].as_array().unwrap();
    assert!(values.len() <= 1000);
    assert_eq!(values.len(), times.len());
    assert!(values.contains(&lo) && values.contains(&hi));

    let (status, _) = post(&f.app, &uri, json!({"measure": "x0", "max_points": 0})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn heatmap_endpoint() {
    let f = fixture();
    let (_, s) = grid_session(&f.app).await;
    let uri = format!("/sessions/{s}/heatmap?step_measure=recurrence&agg_measure=order");

    let (status, first) = raw(&f.app, Method::GET, &uri, None).await;
    assert_eq!(status, StatusCode::OK);
    let (_, second) = raw(&f.app, Method::GET, &uri, None).await;
    assert_eq!(first, second);

    let body: Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(body["measure"], "order");
    assert_eq!(body["d_boundaries"], json!([0.75, 1.25, 1.75, 2.25, 2.75, 3.25]));
    let cells = body["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 30);
    for c in cells {
        let d_col = c["col"].as_u64().unwrap();
        let v = c["value"].as_f64().unwrap();
        if d_col < 2 {
            assert!(v <= 0.01, "periodic cell {c}");
        } else {
            assert!(v > 0.1, "noisy cell {c}");
        }
        assert_eq!(c["count"], 1);
    }
    assert_eq!(body["samples"].as_array().unwrap().len(), 30);

    let (status, _) = get(
        &f.app,
        &format!("/sessions/{s}/heatmap?step_measure=nope&agg_measure=order"),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = get(&f.app, &format!("/sessions/{s}/heatmap?step_measure=recurrence")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = get(
        &f.app,
        &format!("/sessions/{s}/heatmap?step_measure=order&agg_measure=order"),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, late) = get(&f.app, &format!("{uri}&from=300")).await;
    assert_eq!(status, StatusCode::OK);
    assert_ne!(late, body);
}

#[tokio::test]
async fn heatmap_cell_detail() {
    let f = fixture();
    let (_, s) = grid_session(&f.app).await;
    let q = "step_measure=recurrence&agg_measure=order&bins=5";
    let (status, body) = get(&f.app, &format!("/sessions/{s}/heatmap/cells/0/0?{q}")).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["run_ids"], json!(["d1.0_beta-4.5"]));
    let counts: Vec<u64> = body["histogram"]["counts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c.as_u64().unwrap())
        .collect();
    assert_eq!(counts.iter().sum::<u64>(), 200);
    assert_eq!(counts[0], 200);

    let (status, _) = get(&f.app, &format!("/sessions/{s}/heatmap/cells/9/9?{q}")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn pca_endpoint() {
    let f = fixture();
    let (_, s) = grid_session(&f.app).await;
    let uri = format!("/sessions/{s}/runs/d2.5_beta-2.3/pca");

    let (status, body) = get(&f.app, &uri).await;
    assert_eq!(status, StatusCode::OK);
    let dim = body["intrinsic_dim"].as_u64().unwrap() as usize;
    assert!(dim >= 1);
    let width = body["projected"][0].as_array().unwrap().len();
    assert_eq!(width, dim.min(8));
    assert_eq!(body["projected"].as_array().unwrap().len(), 200);

    let (status, capped) = get(&f.app, &format!("{uri}?max=2&from=300")).await;
    assert_eq!(status, StatusCode::OK);
    assert!(capped["projected"][0].as_array().unwrap().len() <= 2);
    assert_eq!(capped["projected"].as_array().unwrap().len(), 80);

    for bad in ["threshold=0", "threshold=1.5", "threshold=-1", "max=0"] {
        let (status, _) = get(&f.app, &format!("{uri}?{bad}")).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{bad}");
    }
    let (status, _) = get(&f.app, &format!("/sessions/{s}/runs/nope/pca")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn histogram_endpoint() {
    let f = fixture();
    let (_, s) = grid_session(&f.app).await;
    add_measure(&f.app, &s, "three", "per_step", "3").await;
    let base = format!("/sessions/{s}/runs/d3.0_beta0.0/histogram");

    let (status, body) = get(&f.app, &format!("{base}?measure=three&bins=5")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["bin_edges"], json!([2.5, 3.5]));
    assert_eq!(body["counts"], json!([200]));

    let (status, body) = get(&f.app, &format!("{base}?measure=recurrence")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["counts"].as_array().unwrap().len(), 20);
    let total: u64 = body["counts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c.as_u64().unwrap())
        .sum();
    assert_eq!(total, 200);

    let (status, _) = get(&f.app, &format!("{base}?measure=order")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = get(&f.app, &format!("{base}?measure=three&bins=0")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = get(&f.app, &format!("{base}?measure=missing")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn selections() {
    let f = fixture();
    let (_, s) = grid_session(&f.app).await;
    let uri = format!("/sessions/{s}/selection");

    let (status, all) = put(
        &f.app,
        &uri,
        json!({"d_range": [0.0, 5.0], "beta_range": [-10.0, 10.0]}),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(all["run_ids"].as_array().unwrap().len(), 30);
    assert_eq!(all["origin"], "region_rect");

    let (_, none) = put(
        &f.app,
        &uri,
        json!({"d_range": [10.0, 11.0], "beta_range": [-10.0, 10.0]}),
    )
    .await;
    assert!(none["run_ids"].as_array().unwrap().is_empty());

    let (_, column) = put(
        &f.app,
        &uri,
        json!({"d_range": [2.4, 2.6], "beta_range": [-10.0, 10.0]}),
    )
    .await;
    let ids = column["run_ids"].as_array().unwrap();
    assert_eq!(ids.len(), 6);
    assert!(ids.iter().all(|id| id.as_str().unwrap().starts_with("d2.5_")));

    let (_, hm) = get(
        &f.app,
        &format!("/sessions/{s}/heatmap?step_measure=recurrence&agg_measure=order"),
    )
    .await;
    let selected = hm["samples"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|s| s["selected"] == true)
        .count();
    assert_eq!(selected, 6);

    let (status, one) = put(&f.app, &uri, json!({"run_ids": ["d1.0_beta0.0"]})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(one["origin"], "single_point");

    let (status, _) = put(&f.app, &uri, json!({"run_ids": ["nope"]})).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (_, sess) = get(&f.app, &format!("/sessions/{s}")).await;
    assert_eq!(sess["selection"]["run_ids"], json!(["d1.0_beta0.0"]));
}

#[tokio::test]
async fn window_settings_export_import() {
    let f = fixture();
    let (e, s) = grid_session(&f.app).await;

    let (status, body) = put(&f.app, &format!("/sessions/{s}/window"), json!({"from": 300.0})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["window"]["from"], 300.0);
    assert!(body["window"]["to"].is_null());
    let (status, _) = put(
        &f.app,
        &format!("/sessions/{s}/window"),
        json!({"from": 5.0, "to": 1.0}),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    // the session window applies when the request gives none
    let (_, series) = post(
        &f.app,
        &format!("/sessions/{s}/evaluate"),
        json!({"measure": "recurrence", "runs": ["d1.0_beta0.0"]}),
    )
    .await;
    assert_eq!(series["results"][0]["values"].as_array().unwrap().len(), 80);

    let mut settings = json!({"histogram_bins": 7, "pca_threshold": 0.99, "color_by": "beta"});
    let (status, body) = put(&f.app, &format!("/sessions/{s}/settings"), settings.clone()).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["settings"]["histogram_bins"], 7);
    assert_eq!(body["settings"]["recurrence_width"], 10);
    settings["pca_threshold"] = json!(0.0);
    let (status, _) = put(&f.app, &format!("/sessions/{s}/settings"), settings).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    put(
        &f.app,
        &format!("/sessions/{s}/selection"),
        json!({"run_ids": ["d2.0_beta0.0", "d3.0_beta0.0"]}),
    )
    .await;
    let (status, exported) = get(&f.app, &format!("/sessions/{s}/export")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(exported["measures"].as_array().unwrap().len(), 2);

    let (status, imported) = post(&f.app, "/sessions/import", json!({"ensemble_id": e, "state": exported})).await;
    assert_eq!(status, StatusCode::OK, "{imported}");
    let s2 = imported["session_id"].as_str().unwrap();
    assert_ne!(s2, s);
    let (_, exported2) = get(&f.app, &format!("/sessions/{s2}/export")).await;
    assert_eq!(exported, exported2);

    let mut bad = exported.clone();
    bad["measures"][0]["source"] = json!("norm(");
    let (status, _) = post(&f.app, "/sessions/import", json!({"ensemble_id": e, "state": bad})).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_evaluations_see_whole_snapshots() {
    let f = fixture();
    let (_, s) = grid_session(&f.app).await;
    add_measure(&f.app, &s, "level", "per_step", "0").await;

    let mut tasks = Vec::new();
    for round in 0..16 {
        let app = f.app.clone();
        let s = s.clone();
        tasks.push(tokio::spawn(async move {
            if round % 2 == 0 {
                let source = format!("{round}");
                post(
                    &app,
                    &format!("/sessions/{s}/measures"),
                    json!({"name": "level", "kind": "per_step", "source": source}),
                )
                .await;
                None
            } else {
                let (status, body) = post(&app, &format!("/sessions/{s}/evaluate"), json!({"measure": "level"})).await;
                assert_eq!(status, StatusCode::OK);
                Some(body)
            }
        }));
    }
    for t in tasks {
        if let Some(body) = t.await.unwrap() {
            // every run in one response was evaluated with the same definition
            let results = body["results"].as_array().unwrap();
            let first = results[0]["values"][0].clone();
            for r in results {
                assert!(r["values"].as_array().unwrap().iter().all(|v| *v == first));
            }
        }
    }
}
