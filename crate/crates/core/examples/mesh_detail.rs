//! Bakes the detail of a ridged sphere into a displacement map, applies it
//! back to the plain sphere and writes the meshes.
//!
//! `cargo run --release --example mesh_detail -- out_dir`

use std::path::PathBuf;

use semm::evaluation::mesh_round_trip;
use semm::io::save_displacement;
use semm::mesh::{apply_displacement, bake_displacement, save_obj, uv_sphere, Vec3};

fn main() -> semm::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "mesh_detail_out".into()));
    std::fs::create_dir_all(&out)?;
    let smooth = uv_sphere(48, 96, 1.0);
    // A single ridge around the equator.
    let scan: Vec<Vec3> = smooth
        .vertices()
        .iter()
        .zip(smooth.normals())
        .zip(smooth.uvs())
        .map(|((p, n), uv)| p + 0.01 * (-((uv.y - 0.5) / 0.05).powi(2)).exp() * n)
        .collect();
    let scan = smooth.with_vertices(scan)?;
    let disp = bake_displacement(&scan, &smooth, 256)?;
    let rebuilt = apply_displacement(&smooth, &disp, 2)?;
    println!("baked max {:.5}, rebuilt {} vertices from {}", disp.grid().max_abs(), rebuilt.vertices().len(), smooth.vertices().len());
    save_displacement(out.join("baked.png"), &disp)?;
    save_obj(out.join("scan.obj"), &scan)?;
    save_obj(out.join("rebuilt.obj"), &rebuilt)?;

    let r = mesh_round_trip(48, 0.01, 256, 2, 0.03)?;
    println!("two-ridge sphere: max error {:.2e} ({:.1}% of amplitude) over {} vertices", r.max_error, 100.0 * r.ratio, r.vertices);
    Ok(())
}
