//! Wrinkle-line extraction, exact truncated distance fields, and line-map
//! editing.
//!
//! Lines are extracted classically: a 3x3 median denoise, a magnitude
//! threshold at `k` standard deviations, thinning to single-pixel curves, and
//! pruning of short spurs and fragments.

mod edt;
mod thinning;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{DisplacementMap, Grid};

pub use edt::{distance_transform, squared_distance_transform};
pub use thinning::skeletonize;

/// Binary wrinkle-line raster.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LineMap {
    width: usize,
    height: usize,
    mask: Vec<bool>,
}

impl LineMap {
    pub fn empty(width: usize, height: usize) -> Self {
        LineMap {
            width,
            height,
            mask: vec![false; width * height],
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        LineMap {
            width,
            height,
            mask: vec![true; width * height],
        }
    }

    pub fn from_mask(width: usize, height: usize, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != width * height {
            return Err(Error::shape(width * height, mask.len()));
        }
        Ok(LineMap { width, height, mask })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut mask = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                mask.push(f(x, y));
            }
        }
        LineMap { width, height, mask }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.mask[y * self.width + x]
    }

    #[inline]
    pub(crate) fn get_signed(&self, x: isize, y: isize) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height && self.get(x as usize, y as usize)
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.mask[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&v| v).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn pixels(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    out.push((x, y));
                }
            }
        }
        out
    }

    /// 8-connected components in raster order of their first pixel.
    pub fn components(&self) -> Vec<Vec<(usize, usize)>> {
        let mut label = vec![usize::MAX; self.mask.len()];
        let mut comps = Vec::new();
        let mut stack = Vec::new();
        for start in 0..self.mask.len() {
            if !self.mask[start] || label[start] != usize::MAX {
                continue;
            }
            let id = comps.len();
            let mut comp = Vec::new();
            label[start] = id;
            stack.push(start);
            while let Some(i) = stack.pop() {
                let (x, y) = ((i % self.width) as isize, (i / self.width) as isize);
                comp.push((x as usize, y as usize));
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        if self.get_signed(x + dx, y + dy) {
                            let j = (y + dy) as usize * self.width + (x + dx) as usize;
                            if label[j] == usize::MAX {
                                label[j] = id;
                                stack.push(j);
                            }
                        }
                    }
                }
            }
            comp.sort_by_key(|&(x, y)| (y, x));
            comps.push(comp);
        }
        comps
    }

    /// Curve length estimate: axial links count 1, diagonal links count
    /// sqrt(2), and a diagonal link is skipped when an axial path already
    /// joins its ends.
    pub fn total_length(&self) -> f64 {
        let mut len = 0.0;
        for y in 0..self.height as isize {
            for x in 0..self.width as isize {
                if !self.get_signed(x, y) {
                    continue;
                }
                if self.get_signed(x + 1, y) {
                    len += 1.0;
                }
                if self.get_signed(x, y + 1) {
                    len += 1.0;
                }
                for dx in [-1isize, 1] {
                    if self.get_signed(x + dx, y + 1) && !self.get_signed(x + dx, y) && !self.get_signed(x, y + 1) {
                        len += std::f64::consts::SQRT_2;
                    }
                }
            }
        }
        len
    }

    /// Number of 8-neighbours that are set.
    pub fn degree(&self, x: usize, y: usize) -> usize {
        let (x, y) = (x as isize, y as isize);
        let mut n = 0;
        for dy in -1..=1 {
            for dx in -1..=1 {
                if (dx, dy) != (0, 0) && self.get_signed(x + dx, y + dy) {
                    n += 1;
                }
            }
        }
        n
    }

    /// Mirror/rotation by one of the eight square symmetries (`0..8`).
    /// Requires a square map.
    pub fn transformed(&self, sym: u8) -> LineMap {
        let n = self.width;
        LineMap::from_fn(n, n, |x, y| {
            let (sx, sy) = inverse_symmetry(sym, x, y, n);
            self.get(sx, sy)
        })
    }
}

/// Source coordinate for output `(x, y)` under square symmetry `sym`.
pub fn inverse_symmetry(sym: u8, x: usize, y: usize, n: usize) -> (usize, usize) {
    let m = n - 1;
    match sym % 8 {
        0 => (x, y),
        1 => (y, m - x),
        2 => (m - x, m - y),
        3 => (m - y, x),
        4 => (m - x, y),
        5 => (x, m - y),
        6 => (y, x),
        _ => (m - y, m - x),
    }
}

/// Which pixels count as line candidates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    /// `|v|` above threshold.
    #[default]
    Absolute,
    /// Negative values only (creases).
    Crease,
    /// Positive values only.
    Ridge,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractConfig {
    /// Threshold in standard deviations.
    pub threshold_k: f64,
    /// Reference deviation; the map's own deviation when `None`.
    pub sigma: Option<f64>,
    /// Minimum component / spur length in pixels.
    pub min_length: usize,
    pub polarity: Polarity,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig {
            threshold_k: 1.5,
            sigma: None,
            min_length: 4,
            polarity: Polarity::Absolute,
        }
    }
}

/// Extracts single-pixel wrinkle lines from a high-passed displacement map.
pub fn extract_lines(disp: &DisplacementMap) -> LineMap {
    extract_lines_with(disp, &ExtractConfig::default())
}

pub fn extract_lines_with(disp: &DisplacementMap, cfg: &ExtractConfig) -> LineMap {
    let g = disp.grid();
    let (w, h) = (g.width(), g.height());
    let den = median3(g);
    let sigma = cfg.sigma.unwrap_or_else(|| g.std());
    if !(sigma > 0.0) {
        return LineMap::empty(w, h);
    }
    let t = cfg.threshold_k * sigma;
    let mut lines = LineMap::from_fn(w, h, |x, y| {
        let v = den[(x, y)];
        match cfg.polarity {
            Polarity::Absolute => v.abs() > t,
            Polarity::Crease => -v > t,
            Polarity::Ridge => v > t,
        }
    });
    skeletonize(&mut lines);
    prune_spurs(&mut lines, cfg.min_length);
    remove_short_components(&mut lines, cfg.min_length);
    lines
}

fn median3(g: &Grid) -> Grid {
    let (w, h) = (g.width(), g.height());
    Grid::from_fn(w, h, |x, y| {
        let mut win = [0.0; 9];
        let mut i = 0;
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                let sx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                let sy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                win[i] = g[(sx, sy)];
                i += 1;
            }
        }
        win.sort_by(|a, b| a.total_cmp(b));
        win[4]
    })
}

/// Removes branches shorter than `min_len` pixels that run from an endpoint
/// into a junction.
fn prune_spurs(lines: &mut LineMap, min_len: usize) {
    let endpoints: Vec<(usize, usize)> = lines.pixels().into_iter().filter(|&(x, y)| lines.degree(x, y) == 1).collect();
    let mut doomed = Vec::new();
    for start in endpoints {
        let mut path = vec![start];
        let mut prev: Option<(usize, usize)> = None;
        let mut cur = start;
        loop {
            let next: Vec<(usize, usize)> = neighbours(lines, cur)
                .into_iter()
                .filter(|p| Some(*p) != prev && !path.contains(p))
                .collect();
            if next.len() != 1 {
                break;
            }
            let n = next[0];
            if lines.degree(n.0, n.1) >= 3 {
                if path.len() < min_len {
                    doomed.extend(path.iter().copied());
                }
                break;
            }
            if path.len() >= min_len {
                break;
            }
            prev = Some(cur);
            cur = n;
            path.push(n);
        }
    }
    for (x, y) in doomed {
        lines.set(x, y, false);
    }
}

fn neighbours(lines: &LineMap, (x, y): (usize, usize)) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for dy in -1isize..=1 {
        for dx in -1isize..=1 {
            if (dx, dy) != (0, 0) && lines.get_signed(x as isize + dx, y as isize + dy) {
                out.push(((x as isize + dx) as usize, (y as isize + dy) as usize));
            }
        }
    }
    out
}

fn remove_short_components(lines: &mut LineMap, min_len: usize) {
    for comp in lines.components() {
        if comp.len() < min_len {
            for (x, y) in comp {
                lines.set(x, y, false);
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrokeMode {
    Draw,
    Erase,
}

/// One user stroke in pixel coordinates (`x` right, `y` down).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stroke {
    pub mode: StrokeMode,
    /// Erase radius in pixels; ignored for draw strokes.
    #[serde(default)]
    pub radius: f64,
    pub points: Vec<[f64; 2]>,
}

impl Stroke {
    pub fn draw(points: Vec<[f64; 2]>) -> Self {
        Stroke {
            mode: StrokeMode::Draw,
            radius: 0.0,
            points,
        }
    }

    pub fn erase(points: Vec<[f64; 2]>, radius: f64) -> Self {
        Stroke {
            mode: StrokeMode::Erase,
            radius,
            points,
        }
    }
}

/// Ordered list of draw/erase strokes. Serializes as a bare JSON list.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LineEdit {
    pub strokes: Vec<Stroke>,
}

impl LineEdit {
    pub fn new(strokes: Vec<Stroke>) -> Self {
        LineEdit { strokes }
    }

    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        for (i, s) in self.strokes.iter().enumerate() {
            if s.points.len() < 2 {
                return Err(Error::InvalidEdit(format!("stroke {i} has fewer than 2 points")));
            }
            if s.mode == StrokeMode::Erase && !(s.radius >= 0.0 && s.radius.is_finite()) {
                return Err(Error::InvalidEdit(format!("stroke {i} has invalid radius {}", s.radius)));
            }
            for p in &s.points {
                let inside = p[0].is_finite()
                    && p[1].is_finite()
                    && p[0] >= 0.0
                    && p[1] >= 0.0
                    && p[0] <= (width - 1) as f64
                    && p[1] <= (height - 1) as f64;
                if !inside {
                    return Err(Error::InvalidEdit(format!(
                        "stroke {i} point ({}, {}) outside {width}x{height} map",
                        p[0], p[1]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Applies strokes in order, then re-thins the result.
pub fn apply_line_edit(lines: &LineMap, edit: &LineEdit) -> Result<LineMap> {
    edit.validate(lines.width(), lines.height())?;
    if edit.strokes.is_empty() {
        return Ok(lines.clone());
    }
    let mut out = lines.clone();
    for stroke in &edit.strokes {
        match stroke.mode {
            StrokeMode::Draw => {
                for seg in stroke.points.windows(2) {
                    for (x, y) in rasterize_segment(seg[0], seg[1]) {
                        out.set(x, y, true);
                    }
                }
            }
            StrokeMode::Erase => {
                let r2 = stroke.radius * stroke.radius;
                for y in 0..out.height() {
                    for x in 0..out.width() {
                        if !out.get(x, y) {
                            continue;
                        }
                        let p = [x as f64, y as f64];
                        let hit = stroke.points.windows(2).any(|s| point_segment_dist2(p, s[0], s[1]) <= r2);
                        if hit {
                            out.set(x, y, false);
                        }
                    }
                }
            }
        }
    }
    skeletonize(&mut out);
    Ok(out)
}

/// Bresenham rasterization of the segment between the rounded endpoints.
pub fn rasterize_segment(a: [f64; 2], b: [f64; 2]) -> Vec<(usize, usize)> {
    let (mut x0, mut y0) = (a[0].round() as i64, a[1].round() as i64);
    let (x1, y1) = (b[0].round() as i64, b[1].round() as i64);
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut out = Vec::with_capacity((dx - dy + 1) as usize);
    loop {
        out.push((x0 as usize, y0 as usize));
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
    out
}

/// Rasterizes an open polyline onto an empty map of the given size.
pub fn rasterize_polyline(width: usize, height: usize, points: &[[f64; 2]]) -> LineMap {
    let mut lines = LineMap::empty(width, height);
    for seg in points.windows(2) {
        for (x, y) in rasterize_segment(seg[0], seg[1]) {
            if x < width && y < height {
                lines.set(x, y, true);
            }
        }
    }
    lines
}

pub(crate) fn point_segment_dist2(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (abx, aby) = (b[0] - a[0], b[1] - a[1]);
    let (apx, apy) = (p[0] - a[0], p[1] - a[1]);
    let len2 = abx * abx + aby * aby;
    let t = if len2 > 0.0 { ((apx * abx + apy * aby) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let (dx, dy) = (apx - t * abx, apy - t * aby);
    dx * dx + dy * dy
}

/// Mean distance from each pixel of `from` to the nearest pixel of `to`.
///
/// Infinite when `to` is empty and `from` is not; zero when `from` is empty.
pub fn chamfer(from: &LineMap, to: &LineMap) -> f64 {
    let pts = from.pixels();
    if pts.is_empty() {
        return 0.0;
    }
    let sq = squared_distance_transform(to);
    pts.iter().map(|&(x, y)| sq[(x, y)].sqrt()).sum::<f64>() / pts.len() as f64
}

/// Symmetric chamfer: the mean of both directions.
pub fn symmetric_chamfer(a: &LineMap, b: &LineMap) -> f64 {
    0.5 * (chamfer(a, b) + chamfer(b, a))
}
