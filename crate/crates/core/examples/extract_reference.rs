//! Screenshot to SPEC with recorded model answers and a box sidecar.
//!
//! ```text
//! cargo run -p uispec --example extract_reference -- [ref-a|ref-b|ref-c]
//! ```

use std::path::Path;

use uispec::client::MockClient;
use uispec::extraction::{extract_spec, ExtractionOptions, SidecarDetector};
use uispec::metrics::load_png;
use uispec::spec::serialize_spec;
use uispec::validate::validate;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "ref-a".into());
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let image = load_png(fixtures.join(format!("references/{name}.png")))?;
    let detector = SidecarDetector::new(fixtures.join(format!("references/{name}.boxes.json")));
    let client = MockClient::new(fixtures.join("mock"))?;
    let options = ExtractionOptions {
        page_goal: "session monitoring dashboard".into(),
        ..ExtractionOptions::default()
    };

    let out = extract_spec(&image, &detector, &client, &options)?;
    println!("{name}: {}x{}", image.width(), image.height());
    for (region, section) in out.regions.iter().zip(&out.spec.sections) {
        println!(
            "  {:<6} bbox {},{},{}x{} -> {:?} {:.4}, {} components",
            section.id,
            region.x,
            region.y,
            region.w,
            region.h,
            section.pos.anchor,
            section.pos.fraction.as_f64(),
            section.components.len()
        );
    }
    println!("valid: {}", validate(&out.spec).ok);
    println!("{}", serialize_spec(&out.spec));
    Ok(())
}
