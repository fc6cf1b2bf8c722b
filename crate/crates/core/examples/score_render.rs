//! Fidelity metrics between renders and references, written as CSV.
//!
//! ```text
//! cargo run -p uispec --example score_render -- [render.png reference.png]...
//! ```
//!
//! Without arguments every reference is scored against itself and against a
//! shifted copy of itself.

use std::path::{Path, PathBuf};

use image::imageops;
use uispec::metrics::{evaluate_batch, load_png, write_csv};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<PathBuf> = std::env::args().skip(1).map(PathBuf::from).collect();
    let scratch = tempfile::tempdir()?;
    let pairs: Vec<(PathBuf, PathBuf)> = if args.is_empty() {
        let refs = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/references");
        let mut pairs = Vec::new();
        for name in ["ref-a", "ref-b", "ref-c"] {
            let reference = refs.join(format!("{name}.png"));
            let img = load_png(&reference)?;
            let mut shifted = img.clone();
            imageops::replace(
                &mut shifted,
                &imageops::crop_imm(&img, 0, 0, img.width() - 6, img.height()).to_image(),
                6,
                0,
            );
            let render = scratch.path().join(format!("{name}-shifted.png"));
            shifted.save(&render)?;
            pairs.push((reference.clone(), reference.clone()));
            pairs.push((render, reference));
        }
        pairs
    } else {
        args.chunks(2)
            .map(|c| {
                (
                    c[0].clone(),
                    c.get(1).cloned().unwrap_or_else(|| c[0].clone()),
                )
            })
            .collect()
    };
    let rows = evaluate_batch(&pairs, None)?;
    write_csv(std::io::stdout().lock(), &rows)?;
    Ok(())
}
