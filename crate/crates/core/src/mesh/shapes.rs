use super::{DetailMesh, Vec2, Vec3};

/// Unit square in the `z = 0` plane split into `n x n` quads, UVs equal to
/// the xy coordinates.
pub fn grid_plane(n: usize) -> DetailMesh {
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    let mut uvs = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            let (u, v) = (i as f64 / n as f64, j as f64 / n as f64);
            vertices.push(Vec3::new(u, v, 0.0));
            uvs.push(Vec2::new(u, v));
        }
    }
    let idx = |i: usize, j: usize| (j * (n + 1) + i) as u32;
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            triangles.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            triangles.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    DetailMesh::new(vertices, triangles, uvs).expect("grid plane is well formed")
}

/// Latitude/longitude sphere of the given radius with an equirectangular
/// chart: `u` follows longitude, `v` runs from the north pole (0) to the
/// south pole (1). The seam column and pole rows are duplicated so every
/// vertex has a single UV.
pub fn uv_sphere(n_lat: usize, n_lon: usize, radius: f64) -> DetailMesh {
    let mut vertices = Vec::new();
    let mut uvs = Vec::new();
    for j in 0..=n_lat {
        let v = j as f64 / n_lat as f64;
        let theta = v * std::f64::consts::PI;
        for i in 0..=n_lon {
            let u = i as f64 / n_lon as f64;
            // Pole vertices sit at the centre of their UV cell so pole
            // triangles stay non-degenerate in UV.
            let u = if j == 0 || j == n_lat { (i as f64 + 0.5) / n_lon as f64 } else { u };
            let phi = u * 2.0 * std::f64::consts::PI;
            vertices.push(radius * Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()));
            uvs.push(Vec2::new(u, v));
        }
    }
    let stride = n_lon + 1;
    let idx = |i: usize, j: usize| (j * stride + i) as u32;
    let mut triangles = Vec::new();
    for j in 0..n_lat {
        for i in 0..n_lon {
            if j == 0 {
                triangles.push([idx(i, 0), idx(i, 1), idx(i + 1, 1)]);
            } else if j == n_lat - 1 {
                triangles.push([idx(i, j), idx(i, j + 1), idx(i + 1, j)]);
            } else {
                triangles.push([idx(i, j), idx(i, j + 1), idx(i + 1, j + 1)]);
                triangles.push([idx(i, j), idx(i + 1, j + 1), idx(i + 1, j)]);
            }
        }
    }
    // Pole rows have one spare vertex each.
    let mut mesh = DetailMesh::new(vertices, triangles, uvs).expect("sphere is well formed");
    mesh.drop_unreferenced();
    mesh
}

impl DetailMesh {
    /// Removes vertices not referenced by any triangle.
    pub(crate) fn drop_unreferenced(&mut self) {
        let mut used = vec![false; self.vertices.len()];
        for t in &self.triangles {
            for &i in t {
                used[i as usize] = true;
            }
        }
        if used.iter().all(|&u| u) {
            return;
        }
        let mut remap = vec![u32::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        let mut uvs = Vec::new();
        for (i, &u) in used.iter().enumerate() {
            if u {
                remap[i] = vertices.len() as u32;
                vertices.push(self.vertices[i]);
                uvs.push(self.uvs[i]);
            }
        }
        let triangles = self.triangles.iter().map(|t| t.map(|i| remap[i as usize])).collect();
        *self = DetailMesh::new(vertices, triangles, uvs).expect("remapped mesh is well formed");
    }
}
