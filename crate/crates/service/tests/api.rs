mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use base64::Engine;
use common::*;
use serde_json::{json, Value};
use uispec::client::ScriptedClient;
use uispec::codegen::CommandToolchain;
use uispec::spec::{parse_spec, SpecDocument};
use uispec::validate::validate;
use uispec_service::http_client::UnconfiguredClient;

fn spec_of(value: &Value) -> SpecDocument {
    parse_spec(&value.to_string()).expect("response carries a parseable SPEC")
}

#[tokio::test(flavor = "multi_thread")]
async fn walkthrough_produces_a_compiling_artifact() {
    let data = tempfile::tempdir().unwrap();
    let app = TestApp::new(data.path());
    let w = dashboard_walkthrough(&app).await;

    assert_eq!(
        w.uploads
            .iter()
            .map(|u| u["ref_id"].as_str().unwrap())
            .collect::<Vec<_>>(),
        ["r-1", "r-2", "r-3"]
    );
    assert_eq!(w.uploads[0]["regions"].as_array().unwrap().len(), 2);

    let composed = spec_of(&w.composed["spec"]);
    assert!(validate(&composed).ok);
    let ids: Vec<_> = composed.sections.iter().map(|s| s.id.as_str()).collect();
    assert_eq!(ids, ["sec-1", "sec-2", "sec-3"]);
    assert_eq!(composed.global.colors[0].hex, "#CF9BDE");
    assert_eq!(composed.global.layout.grid_columns, 12);

    assert_eq!(w.edits[0]["attempts"], 2);
    assert_eq!(w.edits[0]["repair_calls"], 1);
    assert_eq!(w.edits[0]["repair_log"].as_array().unwrap().len(), 1);
    let dark = spec_of(&w.edits[0]["spec"]);
    assert_eq!(dark.palette_role("Background").unwrap().hex, "#0B1020");

    assert_eq!(w.edits[1]["attempts"], 1);
    let cards = spec_of(&w.edits[1]["spec"]);
    assert_eq!(cards.sections[1].components[0].kind, "Card");
    assert!(validate(&cards).ok);

    let g = &w.generated;
    assert_eq!(g["version_id"], "v-3");
    assert_eq!(g["compile_ok"], true);
    assert_eq!(g["revisions"], 1);
    assert_eq!(g["hits"].as_array().unwrap().len(), 2);

    let base = format!("/api/v1/sessions/{}", w.session);
    let (status, session) = app.get(&base).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(session["depth"], 3);
    assert_eq!(session["head"], "v-3");

    let (status, bytes) = app
        .send(
            Request::get(format!("{base}/artifacts/v-3/src/App.jsx"))
                .body(Body::empty())
                .unwrap(),
        )
        .await;
    assert_eq!(status, StatusCode::OK);
    let app_jsx = String::from_utf8(bytes).unwrap();
    for id in ids {
        assert_eq!(
            app_jsx.matches(&format!("data-spec-id=\"{id}\"")).count(),
            1,
            "{id}"
        );
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn version_tree_rollback_and_diff() {
    let data = tempfile::tempdir().unwrap();
    let app = TestApp::new(data.path());
    let w = dashboard_walkthrough(&app).await;
    let base = format!("/api/v1/sessions/{}", w.session);

    let (_, listing) = app.get(&format!("{base}/versions")).await;
    let versions = listing["versions"].as_array().unwrap();
    let chain: Vec<_> = versions
        .iter()
        .map(|v| {
            (
                v["id"].clone(),
                v["parent"].clone(),
                v["produced_by"].clone(),
            )
        })
        .collect();
    assert_eq!(
        chain,
        [
            (json!("v-1"), Value::Null, json!("compose")),
            (json!("v-2"), json!("v-1"), json!("edit")),
            (json!("v-3"), json!("v-2"), json!("edit")),
        ]
    );

    let (status, same) = app.get(&format!("{base}/diff?from=v-2&to=v-2")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(same, json!([]));
    let (_, forward) = app.get(&format!("{base}/diff?from=v-2&to=v-3")).await;
    assert!(forward
        .as_array()
        .unwrap()
        .iter()
        .any(|e| e["path"] == "/sections/#sec-2/components/#sec-2-c2/type"));

    let (status, body) = app
        .post(&format!("{base}/rollback"), json!({"version_id": "v-1"}))
        .await;
    assert_eq!((status, body), (StatusCode::OK, json!({"head": "v-1"})));
    let (status, body) = app
        .post(
            &format!("{base}/edit"),
            json!([{"op": "replace", "path": "/page_goal", "value": "branch"}]),
        )
        .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["version_id"], "v-4");
    let (_, v4) = app.get(&format!("{base}/versions/v-4")).await;
    assert_eq!(v4["parent"], "v-1");
    assert_eq!(v4["spec"]["page_goal"], "branch");
    let (_, session) = app.get(&base).await;
    assert_eq!(
        (session["head"].as_str(), session["depth"].as_u64()),
        (Some("v-4"), Some(3))
    );

    let (status, _) = app
        .post(&format!("{base}/rollback"), json!({"version_id": "v-99"}))
        .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = app.get(&format!("{base}/diff?from=v-1&to=v-99")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread")]
async fn state_survives_a_restart() {
    let data = tempfile::tempdir().unwrap();
    let before = {
        let app = TestApp::new(data.path());
        let w = dashboard_walkthrough(&app).await;
        app.get(&format!("/api/v1/sessions/{}/versions", w.session))
            .await
            .1
    };
    let app = TestApp::new(data.path());
    let (status, after) = app.get("/api/v1/sessions/s-1/versions").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(before, after);
    let (_, reference) = app.get("/api/v1/sessions/s-1/references/r-2").await;
    assert_eq!(reference["spec"]["sections"].as_array().unwrap().len(), 2);
    assert_eq!(app.new_session().await, "s-2");
}

#[tokio::test(flavor = "multi_thread")]
async fn concurrent_edits_serialize_into_a_chain() {
    let data = tempfile::tempdir().unwrap();
    let app = Arc::new(TestApp::new(data.path()));
    let w = dashboard_walkthrough(&app).await;
    let uri = format!("/api/v1/sessions/{}/edit", w.session);
    let tasks: Vec<_> = (0..8)
        .map(|i| {
            let (app, uri) = (app.clone(), uri.clone());
            tokio::spawn(async move {
                app.post(
                    &uri,
                    json!([{"op": "replace", "path": "/page_goal", "value": format!("goal {i}")}]),
                )
                .await
            })
        })
        .collect();
    for t in tasks {
        let (status, body) = t.await.unwrap();
        assert_eq!(status, StatusCode::OK, "{body}");
    }
    let (_, listing) = app
        .get(&format!("/api/v1/sessions/{}/versions", w.session))
        .await;
    let versions = listing["versions"].as_array().unwrap();
    assert_eq!(versions.len(), 11);
    for pair in versions.windows(2).skip(2) {
        assert_eq!(pair[1]["parent"], pair[0]["id"]);
    }
    assert_eq!(listing["head"], "v-11");
}

#[tokio::test(flavor = "multi_thread")]
async fn generate_scores_a_render_against_a_reference() {
    let data = tempfile::tempdir().unwrap();
    let app = TestApp::new(data.path());
    let w = dashboard_walkthrough(&app).await;
    let png = std::fs::read(fixtures().join("references/ref-a.png")).unwrap();
    let (status, body) = app
        .post(
            &format!("/api/v1/sessions/{}/generate", w.session),
            json!({"render_png_base64": base64::engine::general_purpose::STANDARD.encode(png), "reference": "r-1"}),
        )
        .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["metrics"]["mse"], 0.0);
    assert!((body["metrics"]["ssim"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[tokio::test(flavor = "multi_thread")]
async fn validate_endpoint_reports_violations() {
    let data = tempfile::tempdir().unwrap();
    let app = TestApp::new(data.path());
    let mut doc = SpecDocument::empty("x");
    let section: uispec::spec::SectionSpec = serde_json::from_value(json!({
        "id": "sec-1",
        "pos": {"anchor": "full", "fraction": 1.0},
        "layout": {"grid_rows": 1, "grid_cols": 1, "spacing_px": 8},
        "colors": ["Neon"],
        "components": []
    }))
    .unwrap();
    doc.sections.push(section);
    let request = Request::post("/api/v1/validate")
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(uispec::spec::serialize_spec(&doc)))
        .unwrap();
    let (status, bytes) = app.send(request).await;
    assert_eq!(status, StatusCode::OK);
    let report: Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(report["ok"], false);
    let (status, _) = app
        .call(
            Method::POST,
            "/api/v1/validate",
            Some(json!({"page_goal": 1})),
        )
        .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test(flavor = "multi_thread")]
async fn client_errors_map_to_statuses() {
    let data = tempfile::tempdir().unwrap();
    let app = TestApp::new(data.path());
    assert_eq!(
        app.get("/api/v1/sessions/s-404").await.0,
        StatusCode::NOT_FOUND
    );

    let s = app.new_session().await;
    let base = format!("/api/v1/sessions/{s}");
    let raw = |body: &'static [u8]| {
        Request::post(format!("{base}/references"))
            .header(header::CONTENT_TYPE, "image/png")
            .body(Body::from(body))
            .unwrap()
    };
    assert_eq!(app.send(raw(b"")).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(app.send(raw(b"not a png")).await.0, StatusCode::BAD_REQUEST);

    let (status, body) = app
        .post(&format!("{base}/edit"), json!({"intent": "anything"}))
        .await;
    assert_eq!(status, StatusCode::CONFLICT, "{body}");
    assert_eq!(
        app.post(&format!("{base}/edit"), json!(42)).await.0,
        StatusCode::BAD_REQUEST
    );
    assert_eq!(
        app.post(&format!("{base}/generate"), json!({})).await.0,
        StatusCode::CONFLICT
    );

    app.upload(&s, "ref-a").await;
    let compose = |selections: Value| json!({"page_goal": "x", "selections": selections});
    let (status, _) = app
        .post(
            &format!("{base}/compose"),
            compose(json!([{"ref_id": "r-9", "path": "/sections/0"}])),
        )
        .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = app
        .post(
            &format!("{base}/compose"),
            compose(json!([{"ref_id": "r-1", "path": "/sections/#sec-7"}])),
        )
        .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = app
        .post(&format!("{base}/compose"), json!({"nope": true}))
        .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, body) = app
        .post(
            &format!("{base}/compose"),
            compose(json!([{"ref_id": "r-1", "path": "/sections/#sec-1"}])),
        )
        .await;
    assert_eq!(status, StatusCode::CONFLICT, "{body}");
    assert!(body["violations"]
        .as_array()
        .unwrap()
        .iter()
        .any(|v| v["code"] == "EmptyPalette"));
    let (status, body) = app
        .post(
            &format!("{base}/compose"),
            compose(json!([{"ref_id": "r-1", "path": "/global/colors"}, {"ref_id": "r-1", "path": "/sections/#sec-1"}])),
        )
        .await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    assert_eq!(
        app.post(&format!("{base}/edit"), json!([])).await.0,
        StatusCode::BAD_REQUEST
    );
    let (status, _) = app.get(&format!("{base}/artifacts/v-1/src/App.jsx")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(
        app.get(&format!("{base}/references/r-5")).await.0,
        StatusCode::NOT_FOUND
    );
}

#[tokio::test(flavor = "multi_thread")]
async fn unrepairable_edits_answer_422_and_leave_head_alone() {
    let data = tempfile::tempdir().unwrap();
    dashboard_walkthrough(&TestApp::new(data.path())).await;

    let broken = r#"[{"op": "remove", "path": "/global/colors"}]"#;
    let mut config = config(data.path());
    let client = Arc::new(ScriptedClient::always(broken));
    config.client = client.clone();
    let app = TestApp::with_config(config);
    let (status, body) = app
        .post(
            "/api/v1/sessions/s-1/edit",
            serde_json::from_str(broken).unwrap(),
        )
        .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
    assert_eq!(body["error"], "repair_exhausted");
    assert_eq!(body["attempts"], 4);
    assert_eq!(body["repair_log"].as_array().unwrap().len(), 4);
    assert_eq!(client.calls(), 3);
    assert_eq!(app.get("/api/v1/sessions/s-1").await.1["head"], "v-3");
}

#[tokio::test(flavor = "multi_thread")]
async fn missing_toolchain_answers_424() {
    let data = tempfile::tempdir().unwrap();
    dashboard_walkthrough(&TestApp::new(data.path())).await;
    let mut config = config(data.path());
    config.toolchain =
        Arc::new(CommandToolchain::parse("/nonexistent/uispec-checker {dir}").unwrap());
    let app = TestApp::with_config(config);
    let (status, body) = app.post("/api/v1/sessions/s-1/generate", json!({})).await;
    assert_eq!(status, StatusCode::FAILED_DEPENDENCY, "{body}");
    assert_eq!(body["error"], "toolchain_unavailable");
}

#[tokio::test(flavor = "multi_thread")]
async fn model_failures_answer_502() {
    let data = tempfile::tempdir().unwrap();
    let mut config = config(data.path());
    config.client = Arc::new(UnconfiguredClient);
    let app = TestApp::with_config(config);
    let s = app.new_session().await;
    let (status, body) = app.upload(&s, "ref-b").await;
    assert_eq!(status, StatusCode::BAD_GATEWAY, "{body}");
    assert_eq!(body["repair_log"], json!([]));
    let (_, session) = app.get(&format!("/api/v1/sessions/{s}")).await;
    assert_eq!(session["references"], json!([]));
}
