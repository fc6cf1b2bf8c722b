//! Drives the HTTP API end to end against recorded model answers:
//! upload three references, compose a page from parts of them, edit it by
//! intent, generate code, then browse the version tree.
//!
//! ```text
//! cargo run -p uispec-service --example api_walkthrough
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::{json, Value};
use uispec::client::MockClient;
use uispec::codegen::StubToolchain;
use uispec::retrieval::ExemplarStore;
use uispec_service::{api, AppState, ServiceConfig};

type Result<T = ()> = std::result::Result<T, Box<dyn std::error::Error>>;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

fn multipart(png: Vec<u8>, boxes: Vec<u8>) -> (String, Vec<u8>) {
    let boundary = "uispec-example";
    let mut body = format!(
        "--{boundary}\r\nContent-Disposition: form-data; name=\"image\"; filename=\"ref.png\"\r\nContent-Type: image/png\r\n\r\n"
    )
    .into_bytes();
    body.extend(png);
    body.extend(
        format!("\r\n--{boundary}\r\nContent-Disposition: form-data; name=\"boxes\"\r\n\r\n")
            .into_bytes(),
    );
    body.extend(boxes);
    body.extend(format!("\r\n--{boundary}--\r\n").into_bytes());
    (format!("multipart/form-data; boundary={boundary}"), body)
}

fn check(response: reqwest::blocking::Response) -> Result<Value> {
    let status = response.status();
    let body: Value = response.json()?;
    if !status.is_success() {
        return Err(format!("{status}: {body}").into());
    }
    Ok(body)
}

fn walkthrough(base: &str) -> Result {
    let http = reqwest::blocking::Client::new();
    let session = check(http.post(format!("{base}/sessions")).send()?)?["session_id"]
        .as_str()
        .unwrap()
        .to_string();
    let s = format!("{base}/sessions/{session}");
    println!("session {session}");

    for name in ["ref-a", "ref-b", "ref-c"] {
        let refs = fixtures().join("references");
        let (content_type, body) = multipart(
            std::fs::read(refs.join(format!("{name}.png")))?,
            std::fs::read(refs.join(format!("{name}.boxes.json")))?,
        );
        let r = check(
            http.post(format!("{s}/references"))
                .header("content-type", content_type)
                .body(body)
                .send()?,
        )?;
        println!(
            "  uploaded {name} as {} ({} regions)",
            r["ref_id"],
            r["regions"].as_array().unwrap().len()
        );
    }

    // Palette and shape from the pastel page, grid and navigation from the
    // first page, its sessions table, and the monitor widgets.
    let selections = json!({
        "page_goal": "session monitoring dashboard",
        "selections": [
            {"ref_id": "r-3", "path": "/global/colors"},
            {"ref_id": "r-3", "path": "/global/shape"},
            {"ref_id": "r-1", "path": "/global/layout"},
            {"ref_id": "r-1", "path": "/sections/#sec-1"},
            {"ref_id": "r-1", "path": "/sections/#sec-2/components/#sec-2-c2"},
            {"ref_id": "r-2", "path": "/sections/#sec-2"}
        ]
    });
    let v = check(http.post(format!("{s}/compose")).json(&selections).send()?)?;
    println!("  composed {}", v["version_id"]);

    for intent in [
        "Give the dashboard a tech-inspired dark palette.",
        "Display using cards for the Online Sessions table.",
    ] {
        let r = check(
            http.post(format!("{s}/edit"))
                .json(&json!({"intent": intent}))
                .send()?,
        )?;
        println!(
            "  {} after {} attempt(s): {intent}",
            r["version_id"], r["attempts"]
        );
    }

    let g = check(http.post(format!("{s}/generate")).send()?)?;
    println!(
        "  generated for {}: compile_ok={} revisions={}",
        g["version_id"], g["compile_ok"], g["revisions"]
    );
    for f in g["artifact"]["files"].as_array().unwrap() {
        println!("    {} {} bytes", f["path"].as_str().unwrap(), f["bytes"]);
    }

    let listing = check(http.get(format!("{s}/versions")).send()?)?;
    for v in listing["versions"].as_array().unwrap() {
        println!("  {} <- {} ({})", v["id"], v["parent"], v["produced_by"]);
    }
    let diff = check(http.get(format!("{s}/diff?from=v-2&to=v-3")).send()?)?;
    println!("  v-2 -> v-3: {diff}");
    Ok(())
}

fn main() -> Result {
    let data = tempfile::tempdir()?;
    let fixtures = fixtures();
    let mut config = ServiceConfig::new(
        data.path(),
        Arc::new(MockClient::new(fixtures.join("mock"))?),
        Arc::new(StubToolchain::default()),
    );
    config.store = Some(Arc::new(ExemplarStore::open(
        fixtures.join("store/exemplars.jsonl"),
    )?));
    let state = AppState::open(config)?;

    let runtime = tokio::runtime::Runtime::new()?;
    let listener = runtime.block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))?;
    let base = format!("http://{}/api/v1", listener.local_addr()?);
    let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
    let server = runtime.spawn(api::serve(listener, state, async {
        let _ = stopped.await;
    }));

    // The blocking client must not run on the runtime's threads.
    let result = std::thread::spawn(move || walkthrough(&base).map_err(|e| e.to_string()))
        .join()
        .unwrap();
    let _ = stop.send(());
    runtime.block_on(server)??;
    Ok(result?)
}
