//! Extracts the wrinkle line map of a detail raster and its truncated
//! distance field.
//!
//! `cargo run --release --example wrinkle_structure -- out_dir`

use std::path::PathBuf;

use semm::io::{save_distance_field, save_lines};
use semm::structure::{distance_transform, extract_lines, symmetric_chamfer};
use semm::synth::{render_details, CorpusConfig};

fn main() -> semm::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "wrinkle_structure_out".into()));
    std::fs::create_dir_all(&out)?;
    let res = 128;
    let subject = CorpusConfig::new(1, 1, res, 3).subject(0);
    let rendered = render_details(&subject, &[0.0; 8], 62.0, res)?;
    let lines = extract_lines(&rendered.sample.disp);
    let df = distance_transform(&lines);
    let components = lines.components();
    println!("{} line pixels in {} components, total length {:.1} px", lines.count(), components.len(), lines.total_length());
    println!("truncation {:.2} px, mean distance {:.2} px", df.truncation(), df.grid().mean());
    println!("chamfer to the drawn ridges: {:.2} px", symmetric_chamfer(&lines, &rendered.lines));
    save_lines(out.join("lines.png"), &lines)?;
    save_distance_field(out.join("df.png"), &df)?;
    Ok(())
}
