//! Triangle meshes with per-vertex UVs: Laplacian smoothing, baking the
//! difference between two meshes into a displacement map, and displacing a
//! mesh by a map.

mod obj;
mod shapes;

use nalgebra::{Vector2, Vector3};

use crate::error::{Error, Result};
use crate::raster::{DisplacementMap, Grid};

pub use obj::{load_obj, parse_obj, save_obj, to_obj_string};
pub use shapes::{grid_plane, uv_sphere};

pub type Vec3 = Vector3<f64>;
pub type Vec2 = Vector2<f64>;

/// Triangle mesh with one UV and one (area-weighted) normal per vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct DetailMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
    uvs: Vec<Vec2>,
    normals: Vec<Vec3>,
}

impl DetailMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>, uvs: Vec<Vec2>) -> Result<Self> {
        if uvs.len() != vertices.len() {
            return Err(Error::shape(format!("{} uvs", vertices.len()), format!("{} uvs", uvs.len())));
        }
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i as usize >= vertices.len())) {
            return Err(Error::Topology(format!("triangle {t:?} indexes past {} vertices", vertices.len())));
        }
        if vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidInput("non-finite vertex".into()));
        }
        let mut mesh = DetailMesh {
            vertices,
            triangles,
            uvs,
            normals: Vec::new(),
        };
        mesh.recompute_normals();
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn uvs(&self) -> &[Vec2] {
        &self.uvs
    }

    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    /// Replaces vertex positions, keeping connectivity and UVs.
    pub fn with_vertices(&self, vertices: Vec<Vec3>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::Topology(format!(
                "expected {} vertices, got {}",
                self.vertices.len(),
                vertices.len()
            )));
        }
        DetailMesh::new(vertices, self.triangles.clone(), self.uvs.clone())
    }

    /// Same mesh with every normal negated.
    pub fn with_flipped_normals(&self) -> Self {
        let mut m = self.clone();
        m.normals.iter_mut().for_each(|n| *n = -*n);
        m
    }

    fn recompute_normals(&mut self) {
        let mut acc = vec![Vec3::zeros(); self.vertices.len()];
        for t in &self.triangles {
            let [a, b, c] = t.map(|i| self.vertices[i as usize]);
            // Cross product length is twice the area: area weighting.
            let n = (b - a).cross(&(c - a));
            for &i in t {
                acc[i as usize] += n;
            }
        }
        self.normals = acc
            .into_iter()
            .map(|n| {
                let len = n.norm();
                if len > 0.0 {
                    n / len
                } else {
                    Vec3::zeros()
                }
            })
            .collect();
    }

    /// Sorted unique one-ring neighbours of every vertex.
    pub fn neighbours(&self) -> Vec<Vec<u32>> {
        let mut nb: Vec<Vec<u32>> = vec![Vec::new(); self.vertices.len()];
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                nb[a as usize].push(b);
                nb[b as usize].push(a);
            }
        }
        for n in &mut nb {
            n.sort_unstable();
            n.dedup();
        }
        nb
    }

    fn same_topology(&self, other: &DetailMesh) -> bool {
        self.vertices.len() == other.vertices.len() && self.triangles == other.triangles && self.uvs == other.uvs
    }
}

/// Uniform umbrella operator applied `iterations` times:
/// `v <- v + step * (mean(neighbours) - v)`. Isolated vertices stay put.
pub fn laplacian_smooth(mesh: &DetailMesh, iterations: usize, step: f64) -> Result<DetailMesh> {
    if !(0.0..=1.0).contains(&step) {
        return Err(Error::InvalidInput(format!("smoothing step must be in [0, 1], got {step}")));
    }
    let nb = mesh.neighbours();
    let mut v = mesh.vertices.clone();
    for _ in 0..iterations {
        v = umbrella_step(&v, &nb, step);
    }
    mesh.with_vertices(v)
}

fn umbrella_step(v: &[Vec3], nb: &[Vec<u32>], step: f64) -> Vec<Vec3> {
    v.iter()
        .zip(nb)
        .map(|(p, n)| {
            if n.is_empty() {
                return *p;
            }
            let mean = n.iter().fold(Vec3::zeros(), |acc, &j| acc + v[j as usize]) / n.len() as f64;
            p + step * (mean - p)
        })
        .collect()
}

/// `sum ||v - mean(neighbours)||^2` over non-isolated vertices.
pub fn umbrella_energy(mesh: &DetailMesh) -> f64 {
    let nb = mesh.neighbours();
    mesh.vertices
        .iter()
        .zip(&nb)
        .filter(|(_, n)| !n.is_empty())
        .map(|(p, n)| {
            let mean = n.iter().fold(Vec3::zeros(), |acc, &j| acc + mesh.vertices[j as usize]) / n.len() as f64;
            (p - mean).norm_squared()
        })
        .sum()
}

/// Number of 4-neighbour dilation passes used to fill texels just outside
/// the UV charts.
pub const SEAM_DILATION_PASSES: usize = 2;

/// Bakes `(P_orig - P_smooth) . n_smooth` into UV space.
///
/// Texel `(i, j)` samples UV `((i + 0.5) / res, (j + 0.5) / res)`. Both
/// meshes must share connectivity and UVs; the original point is found by
/// reusing the barycentric coordinates of the smooth triangle. Where UV
/// triangles overlap, the higher triangle index wins. Texels within
/// [`SEAM_DILATION_PASSES`] of a chart are filled by dilation; the rest stay 0.
pub fn bake_displacement(orig: &DetailMesh, smooth: &DetailMesh, resolution: usize) -> Result<DisplacementMap> {
    if !orig.same_topology(smooth) {
        return Err(Error::Topology("original and smooth meshes differ in connectivity or UVs".into()));
    }
    let res = resolution;
    let mut values = Grid::zeros(res, res);
    let mut covered = vec![false; res * res];
    let rf = res as f64;
    for t in &smooth.triangles {
        let idx = t.map(|i| i as usize);
        let uv = idx.map(|i| smooth.uvs[i] * rf);
        let area = (uv[1] - uv[0]).perp(&(uv[2] - uv[0]));
        if area.abs() < 1e-12 * rf * rf {
            continue;
        }
        let min_x = uv.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
        let max_x = uv.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
        let min_y = uv.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
        let max_y = uv.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
        let x0 = ((min_x - 0.5).floor().max(0.0)) as usize;
        let x1 = ((max_x - 0.5).ceil().min(rf - 1.0)).max(0.0) as usize;
        let y0 = ((min_y - 0.5).floor().max(0.0)) as usize;
        let y1 = ((max_y - 0.5).ceil().min(rf - 1.0)).max(0.0) as usize;
        for j in y0..=y1 {
            for i in x0..=x1 {
                let p = Vec2::new(i as f64 + 0.5, j as f64 + 0.5);
                let w1 = (p - uv[0]).perp(&(uv[2] - uv[0])) / area;
                let w2 = (uv[1] - uv[0]).perp(&(p - uv[0])) / area;
                let w0 = 1.0 - w1 - w2;
                let eps = -1e-9;
                if w0 < eps || w1 < eps || w2 < eps {
                    continue;
                }
                let bary = [w0, w1, w2];
                let interp = |f: &dyn Fn(usize) -> Vec3| {
                    bary.iter().zip(idx).fold(Vec3::zeros(), |acc, (w, k)| acc + *w * f(k))
                };
                let ps = interp(&|k| smooth.vertices[k]);
                let po = interp(&|k| orig.vertices[k]);
                let n = interp(&|k| smooth.normals[k]);
                let len = n.norm();
                if len == 0.0 {
                    continue;
                }
                values[(i, j)] = (po - ps).dot(&(n / len));
                covered[j * res + i] = true;
            }
        }
    }
    dilate_uncovered(&mut values, &mut covered, SEAM_DILATION_PASSES);
    DisplacementMap::new(values)
}

fn dilate_uncovered(values: &mut Grid, covered: &mut [bool], passes: usize) {
    let (w, h) = (values.width(), values.height());
    for _ in 0..passes {
        let prev = covered.to_vec();
        let snapshot = values.clone();
        for y in 0..h {
            for x in 0..w {
                if prev[y * w + x] {
                    continue;
                }
                let mut sum = 0.0;
                let mut n = 0;
                for (dx, dy) in [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)] {
                    let (nx, ny) = (x as isize + dx, y as isize + dy);
                    if nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h && prev[ny as usize * w + nx as usize] {
                        sum += snapshot[(nx as usize, ny as usize)];
                        n += 1;
                    }
                }
                if n > 0 {
                    values[(x, y)] = sum / n as f64;
                    covered[y * w + x] = true;
                }
            }
        }
    }
}

/// Bilinear lookup at UV coordinates using the pixel-centre convention,
/// clamped at the borders.
pub fn sample_bilinear(grid: &Grid, uv: Vec2) -> f64 {
    let (w, h) = (grid.width(), grid.height());
    let fx = (uv.x * w as f64 - 0.5).clamp(0.0, (w - 1) as f64);
    let fy = (uv.y * h as f64 - 0.5).clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (tx, ty) = (fx - x0 as f64, fy - y0 as f64);
    let top = grid[(x0, y0)] * (1.0 - tx) + grid[(x1, y0)] * tx;
    let bottom = grid[(x0, y1)] * (1.0 - tx) + grid[(x1, y1)] * tx;
    top * (1.0 - ty) + bottom * ty
}

/// Subdivides `subdiv` times, then moves each vertex along its normal by the
/// bilinearly sampled displacement.
pub fn apply_displacement(mesh: &DetailMesh, disp: &DisplacementMap, subdiv: usize) -> Result<DetailMesh> {
    let mut m = mesh.clone();
    for _ in 0..subdiv {
        m = subdivide_midpoint(&m)?;
    }
    let moved: Vec<Vec3> = m
        .vertices
        .iter()
        .zip(&m.normals)
        .zip(&m.uvs)
        .map(|((v, n), uv)| v + sample_bilinear(disp.grid(), *uv) * n)
        .collect();
    // Keep the normals of the undisplaced surface on the output.
    let mut out = m.with_vertices(moved)?;
    out.normals = m.normals;
    Ok(out)
}

/// One level of 1-to-4 midpoint subdivision; positions and UVs of new
/// vertices are edge midpoints.
pub fn subdivide_midpoint(mesh: &DetailMesh) -> Result<DetailMesh> {
    use std::collections::HashMap;
    let mut vertices = mesh.vertices.clone();
    let mut uvs = mesh.uvs.clone();
    let mut mid: HashMap<(u32, u32), u32> = HashMap::new();
    let mut triangles = Vec::with_capacity(mesh.triangles.len() * 4);
    let mut midpoint = |a: u32, b: u32, vertices: &mut Vec<Vec3>, uvs: &mut Vec<Vec2>| -> u32 {
        let key = (a.min(b), a.max(b));
        *mid.entry(key).or_insert_with(|| {
            vertices.push((vertices[a as usize] + vertices[b as usize]) * 0.5);
            uvs.push((uvs[a as usize] + uvs[b as usize]) * 0.5);
            (vertices.len() - 1) as u32
        })
    };
    for &[a, b, c] in &mesh.triangles {
        let ab = midpoint(a, b, &mut vertices, &mut uvs);
        let bc = midpoint(b, c, &mut vertices, &mut uvs);
        let ca = midpoint(c, a, &mut vertices, &mut uvs);
        triangles.extend_from_slice(&[[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
    }
    DetailMesh::new(vertices, triangles, uvs)
}
