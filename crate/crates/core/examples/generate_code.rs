//! Retrieval-grounded code generation with the compile-and-revise loop.
//!
//! ```text
//! cargo run -p uispec --example generate_code
//! ```
//!
//! The recorded first answer has an unbalanced bracket; the stub toolchain
//! reports it and the recorded revision fixes it.

use std::path::Path;

use uispec::client::{CountingClient, MockClient};
use uispec::codegen::{generate_ui, CodegenConfig, StubToolchain};
use uispec::retrieval::ExemplarStore;
use uispec::spec::parse_spec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let doc = parse_spec(&std::fs::read_to_string(
        fixtures.join("specs/dashboard.json"),
    )?)?;
    let store = ExemplarStore::open(fixtures.join("store/exemplars.jsonl"))?;
    let client = CountingClient::new(MockClient::new(fixtures.join("mock"))?);

    let out = generate_ui(
        &doc,
        Some(&store),
        2,
        &client,
        &StubToolchain::default(),
        &CodegenConfig::default(),
    )?;
    for hit in &out.hits {
        println!(
            "exemplar {} similarity {:.4}",
            hit.record_id, hit.similarity
        );
    }
    for report in &out.reports {
        println!(
            "revision requested: {} at {}:{} in {}",
            report.error_type,
            report.file,
            report.line,
            report
                .region_path
                .as_ref()
                .map_or("(no section)".into(), |p| p.to_string())
        );
    }
    println!(
        "compile_ok={} revisions={} model calls={}",
        out.compile.ok,
        out.revisions,
        client.total()
    );
    for (path, text) in &out.artifact.files {
        println!("--- {path} ({} lines)", text.lines().count());
    }
    Ok(())
}
