//! Parse a SPEC, check it, break it, and read the violation report.
//!
//! ```text
//! cargo run -p uispec --example validate_spec -- [spec.json]
//! ```

use std::path::PathBuf;

use uispec::spec::{parse_spec, resolve_path, serialize_spec};
use uispec::validate::validate;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/specs/dashboard.json")
        });
    let mut doc = parse_spec(&std::fs::read_to_string(&path)?)?;
    let canonical = serialize_spec(&doc);
    assert_eq!(parse_spec(&canonical)?, doc);
    println!(
        "{}: {} sections, {} canonical bytes",
        path.display(),
        doc.sections.len(),
        canonical.len()
    );
    println!("valid: {}", validate(&doc).ok);

    // Drop the palette's Text role and give a component an unknown type.
    doc.global.colors.retain(|c| c.role != "Text");
    if let Some(c) = doc
        .sections
        .iter_mut()
        .flat_map(|s| &mut s.components)
        .next()
    {
        c.kind = "Carousel".into();
    }
    let report = validate(&doc);
    println!("after breaking it, valid: {}", report.ok);
    for v in &report.violations {
        let node = resolve_path(&doc, &v.path)?;
        println!(
            "  {:<24} {:<48} {}",
            format!("{:?}", v.code),
            v.path.to_string(),
            node.value
        );
    }
    Ok(())
}
