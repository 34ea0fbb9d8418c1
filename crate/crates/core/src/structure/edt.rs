//! Exact Euclidean distance transform by lower envelopes of parabolas,
//! applied along columns and then rows.

use super::LineMap;
use crate::raster::{truncation_for, DistanceField, Grid};

/// Squared distance from each pixel to the nearest set pixel of `mask`.
///
/// Pixels of an empty mask get `f64::INFINITY`. Every finite result is an
/// exact integer.
pub fn squared_distance_transform(lines: &LineMap) -> Grid {
    let (w, h) = (lines.width(), lines.height());
    let mut cols = Grid::zeros(w, h);
    let n = w.max(h);
    let mut f = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut scratch = Envelope::with_capacity(n);

    for x in 0..w {
        for (y, v) in f[..h].iter_mut().enumerate() {
            *v = if lines.get(x, y) { 0.0 } else { f64::INFINITY };
        }
        scratch.transform(&f[..h], &mut d[..h]);
        for y in 0..h {
            cols[(x, y)] = d[y];
        }
    }
    let mut out = Grid::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            f[x] = cols[(x, y)];
        }
        scratch.transform(&f[..w], &mut d[..w]);
        for x in 0..w {
            out[(x, y)] = d[x];
        }
    }
    out
}

/// Truncated unsigned Euclidean distance field with `delta = 0.05 * width`.
pub fn distance_transform(lines: &LineMap) -> DistanceField {
    let delta = truncation_for(lines.width());
    let sq = squared_distance_transform(lines);
    DistanceField::clamped(sq.map(|v| v.sqrt().min(delta)), delta)
}

struct Envelope {
    sites: Vec<usize>,
    bounds: Vec<f64>,
}

impl Envelope {
    fn with_capacity(n: usize) -> Self {
        Envelope {
            sites: Vec::with_capacity(n),
            bounds: Vec::with_capacity(n + 1),
        }
    }

    /// 1-D squared distance transform of the sampled function `f`, where
    /// infinite samples are not sites.
    fn transform(&mut self, f: &[f64], out: &mut [f64]) {
        self.sites.clear();
        self.bounds.clear();
        for (q, &fq) in f.iter().enumerate() {
            if !fq.is_finite() {
                continue;
            }
            loop {
                let Some(&p) = self.sites.last() else {
                    self.sites.push(q);
                    self.bounds.push(f64::NEG_INFINITY);
                    break;
                };
                let s = intersection(f, p, q);
                if s <= *self.bounds.last().unwrap() {
                    self.sites.pop();
                    self.bounds.pop();
                } else {
                    self.sites.push(q);
                    self.bounds.push(s);
                    break;
                }
            }
        }
        if self.sites.is_empty() {
            out.iter_mut().for_each(|v| *v = f64::INFINITY);
            return;
        }
        let mut k = 0;
        for (q, o) in out.iter_mut().enumerate() {
            while k + 1 < self.sites.len() && self.bounds[k + 1] < q as f64 {
                k += 1;
            }
            let p = self.sites[k];
            let dq = q as f64 - p as f64;
            *o = dq * dq + f[p];
        }
    }
}

#[inline]
fn intersection(f: &[f64], p: usize, q: usize) -> f64 {
    let (pf, qf) = (p as f64, q as f64);
    ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * qf - 2.0 * pf)
}
