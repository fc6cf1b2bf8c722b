//! Path-addressed edits: apply a JSONL script, diff versions, and let the
//! repair loop fix a batch that breaks validation.
//!
//! ```text
//! cargo run -p uispec --example scoped_edits
//! ```

use std::path::Path;

use uispec::client::MockClient;
use uispec::edit::{apply_edits, apply_with_repair, EditInstruction};
use uispec::spec::{parse_spec, spec_diff, SpecPath};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let doc = parse_spec(&std::fs::read_to_string(
        fixtures.join("specs/dashboard.json"),
    )?)?;

    let script = EditInstruction::parse_jsonl(&std::fs::read_to_string(
        fixtures.join("edits/retitle.jsonl"),
    )?)?;
    let edited = apply_edits(&doc, &script)?;
    println!(
        "retitle.jsonl, {} instructions; recovered diff:",
        script.len()
    );
    print!("{}", EditInstruction::to_jsonl(&spec_diff(&doc, &edited)));

    // A batch is all-or-nothing.
    let mut mixed = script.clone();
    mixed.push(EditInstruction::remove(SpecPath::parse(
        "/sections/#sec-9",
    )?));
    match apply_edits(&doc, &mixed) {
        Ok(_) => unreachable!("the last instruction cannot resolve"),
        Err(e) => println!("\nmixed batch rejected: {e}"),
    }

    // This palette drops the Text role that a table still uses.
    let client = MockClient::new(fixtures.join("mock"))?;
    let broken = EditInstruction::parse_jsonl(&std::fs::read_to_string(
        fixtures.join("edits/needs-repair.jsonl"),
    )?)?;
    let outcome = apply_with_repair(&doc, &broken, &client)?;
    println!(
        "\nneeds-repair.jsonl: succeeded={} attempts={} repair calls={}",
        outcome.succeeded, outcome.attempts, outcome.repair_calls
    );
    for ctx in &outcome.repair_log {
        println!("  failed attempt: {}", ctx.error_message);
    }
    print!("applied:\n{}", EditInstruction::to_jsonl(&outcome.applied));
    Ok(())
}
