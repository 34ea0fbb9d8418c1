//! Procedural wrinkle corpus: subjects made of wrinkle templates, rendered to
//! joint samples at chosen expressions and ages, with exact structure labels.

mod corpus;
mod subject;

use crate::error::Result;
use crate::raster::{default_high_pass_sigma, high_pass_grid, DisplacementMap, Grid, JointSample, MAX_AGE, MIN_AGE};
use crate::structure::{distance_transform, point_segment_dist2, rasterize_polyline, LineMap};

pub use corpus::{build_corpus, key_expressions, nearest_key_expression, Corpus, CorpusConfig, CorpusSample, Split, WITHHELD_AGES};
pub use subject::{generate_subject, Region, SyntheticSubject, WrinkleTemplate, AMPLITUDE_UNIT};

/// Number of age groups over `[16, 70]`.
pub const AGE_GROUPS: usize = 7;

/// Wrinkles weaker than this are not drawn into the structure labels.
pub const VISIBLE_AMPLITUDE: f64 = 0.25 * AMPLITUDE_UNIT;

/// `floor((a - 16) / 54 * 7)`, clamped to `[0, 6]`.
pub fn age_group(age: f64) -> usize {
    let g = ((age - MIN_AGE) / (MAX_AGE - MIN_AGE) * AGE_GROUPS as f64).floor();
    g.clamp(0.0, (AGE_GROUPS - 1) as f64) as usize
}

/// A rendered sample with its ground-truth line map.
#[derive(Clone, Debug, PartialEq)]
pub struct Rendered {
    pub sample: JointSample,
    pub lines: LineMap,
}

fn uv_to_pixel(res: usize, [u, v]: [f64; 2]) -> [f64; 2] {
    [u * res as f64 - 0.5, v * res as f64 - 0.5]
}

/// Sum of Gaussian creases before high-pass filtering.
pub fn render_raw_displacement(subject: &SyntheticSubject, expression: &[f64], age: f64, resolution: usize) -> Grid {
    let mut g = Grid::zeros(resolution, resolution);
    for w in &subject.wrinkles {
        let amp = w.amplitude(expression, age);
        if amp == 0.0 {
            continue;
        }
        let pts: Vec<[f64; 2]> = w.polyline.iter().map(|&p| uv_to_pixel(resolution, p)).collect();
        let reach = 5.0 * w.width_sigma;
        let lo = |k: usize| (pts.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min) - reach).floor().max(0.0) as usize;
        let hi = |k: usize| ((pts.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max) + reach).ceil().max(0.0) as usize).min(resolution - 1);
        let inv = 1.0 / (2.0 * w.width_sigma * w.width_sigma);
        for y in lo(1)..=hi(1) {
            for x in lo(0)..=hi(0) {
                let p = [x as f64, y as f64];
                let d2 = pts.windows(2).map(|s| point_segment_dist2(p, s[0], s[1])).fold(f64::INFINITY, f64::min);
                g[(x, y)] -= amp * (-d2 * inv).exp();
            }
        }
    }
    g
}

/// Line map of the wrinkles whose amplitude reaches [`VISIBLE_AMPLITUDE`].
pub fn render_lines(subject: &SyntheticSubject, expression: &[f64], age: f64, resolution: usize) -> LineMap {
    let mut lines = LineMap::empty(resolution, resolution);
    for w in &subject.wrinkles {
        if w.amplitude(expression, age) < VISIBLE_AMPLITUDE {
            continue;
        }
        let pts: Vec<[f64; 2]> = w
            .polyline
            .iter()
            .map(|&p| {
                let [x, y] = uv_to_pixel(resolution, p);
                [x.clamp(0.0, (resolution - 1) as f64), y.clamp(0.0, (resolution - 1) as f64)]
            })
            .collect();
        let stroke = rasterize_polyline(resolution, resolution, &pts);
        for (x, y) in stroke.pixels() {
            lines.set(x, y, true);
        }
    }
    lines
}

/// Renders the high-passed displacement map and the exact distance field of
/// the visible ground-truth lines.
pub fn render_details(subject: &SyntheticSubject, expression: &[f64], age: f64, resolution: usize) -> Result<Rendered> {
    let raw = render_raw_displacement(subject, expression, age, resolution);
    let disp = DisplacementMap::new(high_pass_grid(&raw, default_high_pass_sigma(resolution))?)?;
    let lines = render_lines(subject, expression, age, resolution);
    let df = distance_transform(&lines);
    Ok(Rendered { sample: JointSample::new(disp, df, expression.to_vec(), age)?, lines })
}
