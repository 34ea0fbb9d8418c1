//! Renders one synthetic subject, isolates its fine detail with a high-pass
//! filter and writes the raster plus a shaded preview.
//!
//! `cargo run --release --example detail_raster -- out_dir`

use std::path::PathBuf;

use semm::io::{preview_png, save_displacement};
use semm::raster::{default_high_pass_sigma, high_pass, DisplacementMap};
use semm::synth::{render_raw_displacement, CorpusConfig};

fn main() -> semm::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "detail_raster_out".into()));
    std::fs::create_dir_all(&out)?;
    let res = 128;
    let subject = CorpusConfig::new(1, 1, res, 7).subject(0);
    let mut smile = vec![0.0; 8];
    smile[1] = 1.0;
    let raw = DisplacementMap::new(render_raw_displacement(&subject, &smile, 55.0, res))?;
    let detail = high_pass(&raw, default_high_pass_sigma(res))?;
    println!("raw rms {:.5}, detail rms {:.5}, detail mean {:+.2e}", raw.grid().rms(), detail.grid().rms(), detail.grid().mean());
    let scale = save_displacement(out.join("detail.png"), &detail)?;
    std::fs::write(out.join("detail.preview.png"), preview_png(&detail)?)?;
    println!("wrote {} (scale {scale:.5})", out.join("detail.png").display());
    Ok(())
}
