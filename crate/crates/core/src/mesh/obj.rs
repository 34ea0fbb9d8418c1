//! Minimal Wavefront OBJ support: `v`, `vt` and `f` records. Faces with more
//! than three corners are fan-triangulated. A position used with several
//! texture coordinates is split into one vertex per distinct pair.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{DetailMesh, Vec2, Vec3};
use crate::error::{Error, Result};

pub fn load_obj(path: impl AsRef<Path>) -> Result<DetailMesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_obj(&text).map_err(|e| match e {
        Error::InvalidInput(reason) => Error::format(path, reason),
        other => other,
    })
}

pub fn parse_obj(text: &str) -> Result<DetailMesh> {
    let mut positions: Vec<Vec3> = Vec::new();
    let mut texcoords: Vec<Vec2> = Vec::new();
    let mut faces: Vec<Vec<(usize, usize)>> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut it = line.split_whitespace();
        let bad = |what: &str| Error::InvalidInput(format!("line {}: {what}", lineno + 1));
        match it.next() {
            Some("v") => {
                let c: Vec<f64> = it.take(3).map(str::parse).collect::<std::result::Result<_, _>>().map_err(|_| bad("bad vertex"))?;
                if c.len() != 3 {
                    return Err(bad("vertex needs 3 coordinates"));
                }
                positions.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("vt") => {
                let c: Vec<f64> = it.take(2).map(str::parse).collect::<std::result::Result<_, _>>().map_err(|_| bad("bad texcoord"))?;
                if c.len() != 2 {
                    return Err(bad("texcoord needs 2 coordinates"));
                }
                texcoords.push(Vec2::new(c[0], c[1]));
            }
            Some("f") => {
                let mut face = Vec::new();
                for tok in it {
                    let mut parts = tok.split('/');
                    let vi = resolve(parts.next(), positions.len()).ok_or_else(|| bad("bad face position index"))?;
                    let ti = resolve(parts.next(), texcoords.len()).ok_or_else(|| bad("face corner needs a texture index"))?;
                    face.push((vi, ti));
                }
                if face.len() < 3 {
                    return Err(bad("face needs at least 3 corners"));
                }
                faces.push(face);
            }
            _ => {}
        }
    }

    // Output vertices follow position order, so a file with one UV per
    // position keeps its vertex numbering.
    let mut pairs: Vec<(usize, usize)> = faces.iter().flatten().copied().collect();
    pairs.sort_unstable();
    pairs.dedup();
    let ids: HashMap<(usize, usize), u32> = pairs.iter().enumerate().map(|(k, &p)| (p, k as u32)).collect();
    let vertices = pairs.iter().map(|&(vi, _)| positions[vi]).collect();
    let uvs = pairs.iter().map(|&(_, ti)| texcoords[ti]).collect();
    let mut triangles = Vec::new();
    for face in &faces {
        let f: Vec<u32> = face.iter().map(|p| ids[p]).collect();
        for k in 1..f.len() - 1 {
            triangles.push([f[0], f[k], f[k + 1]]);
        }
    }
    DetailMesh::new(vertices, triangles, uvs)
}

/// 1-based (or negative, relative) OBJ index to 0-based.
fn resolve(tok: Option<&str>, len: usize) -> Option<usize> {
    let i: i64 = tok.filter(|t| !t.is_empty())?.parse().ok()?;
    let idx = if i > 0 { i - 1 } else { len as i64 + i };
    (0..len as i64).contains(&idx).then_some(idx as usize)
}

pub fn to_obj_string(mesh: &DetailMesh) -> String {
    let mut s = String::new();
    for v in mesh.vertices() {
        let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
    }
    for t in mesh.uvs() {
        let _ = writeln!(s, "vt {} {}", t.x, t.y);
    }
    for n in mesh.normals() {
        let _ = writeln!(s, "vn {} {} {}", n.x, n.y, n.z);
    }
    for t in mesh.triangles() {
        let [a, b, c] = t.map(|i| i + 1);
        let _ = writeln!(s, "f {a}/{a}/{a} {b}/{b}/{b} {c}/{c}/{c}");
    }
    s
}

pub fn save_obj(path: impl AsRef<Path>, mesh: &DetailMesh) -> Result<()> {
    std::fs::write(path, to_obj_string(mesh))?;
    Ok(())
}
