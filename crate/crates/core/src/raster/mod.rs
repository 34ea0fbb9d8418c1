//! Raster types for displacement maps and distance fields, plus the
//! high-pass filter, joint normalization and shaded-relief previews.

pub mod filter;
mod preview;

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

pub use preview::{shaded_preview, shaded_preview_scaled};

/// Resolutions a displacement map may have.
pub const SUPPORTED_RESOLUTIONS: [usize; 3] = [64, 128, 256];

/// Fraction of the map width at which distance fields are truncated.
pub const TRUNCATION_FRACTION: f64 = 0.05;

/// Truncation distance `delta` in pixels for a map of the given width.
pub fn truncation_for(width: usize) -> f64 {
    // Division keeps e.g. 256 -> 12.8 exactly representable as the nearest double.
    width as f64 / (1.0 / TRUNCATION_FRACTION).round()
}

/// Default high-pass cutoff, `width / 32` pixels.
pub fn default_high_pass_sigma(width: usize) -> f64 {
    width as f64 / 32.0
}

/// Row-major grid of `f64` samples.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Grid {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Grid {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::shape(width * height, data.len()));
        }
        Ok(Grid { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Grid { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Grid {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Grid, f: impl Fn(f64, f64) -> f64) -> Grid {
        debug_assert!(self.same_shape(other));
        Grid {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn dot(&self, other: &Grid) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Population standard deviation.
    pub fn std(&self) -> f64 {
        let m = self.mean();
        let var = self.data.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.data.len().max(1) as f64;
        var.sqrt()
    }

    pub fn rms(&self) -> f64 {
        (self.data.iter().map(|v| v * v).sum::<f64>() / self.data.len().max(1) as f64).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn argmin(&self) -> usize {
        arg_best(&self.data, |a, b| a < b)
    }

    pub fn argmax(&self) -> usize {
        arg_best(&self.data, |a, b| a > b)
    }
}

fn arg_best(data: &[f64], better: impl Fn(f64, f64) -> bool) -> usize {
    let mut best = 0;
    for (i, &v) in data.iter().enumerate() {
        if better(v, data[best]) {
            best = i;
        }
    }
    best
}

impl Index<(usize, usize)> for Grid {
    type Output = f64;

    #[inline]
    fn index(&self, (x, y): (usize, usize)) -> &f64 {
        &self.data[y * self.width + x]
    }
}

impl IndexMut<(usize, usize)> for Grid {
    #[inline]
    fn index_mut(&mut self, (x, y): (usize, usize)) -> &mut f64 {
        &mut self.data[y * self.width + x]
    }
}

/// Signed offsets along the surface normal, sampled in UV space.
///
/// Positive values push the surface outward. Values are in normalized mesh
/// units.
#[derive(Clone, Debug, PartialEq)]
pub struct DisplacementMap {
    grid: Grid,
}

impl DisplacementMap {
    pub fn new(grid: Grid) -> Result<Self> {
        if grid.width() != grid.height() || !SUPPORTED_RESOLUTIONS.contains(&grid.width()) {
            return Err(Error::InvalidInput(format!(
                "displacement maps must be square with width in {:?}, got {}x{}",
                SUPPORTED_RESOLUTIONS,
                grid.width(),
                grid.height()
            )));
        }
        if !grid.all_finite() {
            return Err(Error::InvalidInput("displacement map has non-finite values".into()));
        }
        Ok(DisplacementMap { grid })
    }

    pub fn zeros(resolution: usize) -> Result<Self> {
        Self::new(Grid::zeros(resolution, resolution))
    }

    pub fn resolution(&self) -> usize {
        self.grid.width()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        self.grid.data()
    }

    pub fn into_grid(self) -> Grid {
        self.grid
    }
}

/// Unsigned distance (pixels) to the nearest wrinkle line, capped at
/// `truncation`.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceField {
    grid: Grid,
    truncation: f64,
}

impl DistanceField {
    /// Wraps `grid` with the standard truncation `0.05 * width`.
    pub fn new(grid: Grid) -> Result<Self> {
        let truncation = truncation_for(grid.width());
        Self::with_truncation(grid, truncation)
    }

    pub fn with_truncation(grid: Grid, truncation: f64) -> Result<Self> {
        if !(truncation > 0.0) {
            return Err(Error::InvalidInput(format!("truncation must be positive, got {truncation}")));
        }
        if let Some(bad) = grid.data().iter().find(|v| !(**v >= 0.0 && **v <= truncation)) {
            return Err(Error::InvalidInput(format!(
                "distance value {bad} outside [0, {truncation}]"
            )));
        }
        Ok(DistanceField { grid, truncation })
    }

    /// Builds a field by clamping arbitrary values into `[0, truncation]`.
    pub fn clamped(grid: Grid, truncation: f64) -> Self {
        let grid = grid.map(|v| if v.is_nan() { truncation } else { v.clamp(0.0, truncation) });
        DistanceField { grid, truncation }
    }

    /// A field with no lines: every pixel at the truncation distance.
    pub fn empty(width: usize, height: usize) -> Self {
        let truncation = truncation_for(width);
        DistanceField {
            grid: Grid::filled(width, height, truncation),
            truncation,
        }
    }

    pub fn width(&self) -> usize {
        self.grid.width()
    }

    pub fn height(&self) -> usize {
        self.grid.height()
    }

    pub fn truncation(&self) -> f64 {
        self.truncation
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        self.grid.data()
    }

    pub fn into_grid(self) -> Grid {
        self.grid
    }
}

/// A displacement map paired with its distance field and annotations.
#[derive(Clone, Debug, PartialEq)]
pub struct JointSample {
    pub disp: DisplacementMap,
    pub df: DistanceField,
    /// Blendshape weights in `[0, 1]`.
    pub expression: Vec<f64>,
    /// Age in years, `[16, 70]`.
    pub age: f64,
}

pub const MIN_AGE: f64 = 16.0;
pub const MAX_AGE: f64 = 70.0;

impl JointSample {
    pub fn new(disp: DisplacementMap, df: DistanceField, expression: Vec<f64>, age: f64) -> Result<Self> {
        if disp.resolution() != df.width() || df.width() != df.height() {
            return Err(Error::shape(
                format!("{0}x{0}", disp.resolution()),
                format!("{}x{}", df.width(), df.height()),
            ));
        }
        if expression.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::InvalidInput("blendshape weights must lie in [0, 1]".into()));
        }
        if !(MIN_AGE..=MAX_AGE).contains(&age) {
            return Err(Error::OutOfRange { what: "age", value: age });
        }
        Ok(JointSample { disp, df, expression, age })
    }

    pub fn resolution(&self) -> usize {
        self.disp.resolution()
    }
}

/// Returns `disp - G_sigma * disp` with the residual mean removed.
///
/// The blur uses half-sample symmetric padding, which does not preserve the
/// mean exactly, so the tiny residual mean is subtracted; the operator stays
/// linear.
pub fn high_pass(disp: &DisplacementMap, sigma: f64) -> Result<DisplacementMap> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidInput(format!("high-pass sigma must be positive, got {sigma}")));
    }
    let out = high_pass_grid(disp.grid(), sigma)?;
    Ok(DisplacementMap { grid: out })
}

/// [`high_pass`] on an unconstrained grid.
pub fn high_pass_grid(grid: &Grid, sigma: f64) -> Result<Grid> {
    if !grid.all_finite() {
        return Err(Error::InvalidInput("non-finite values in high-pass input".into()));
    }
    let blurred = filter::convolve_separable(grid, &filter::gaussian_kernel(sigma));
    let mut out = grid.zip_map(&blurred, |a, b| a - b);
    let m = out.mean();
    out.data_mut().iter_mut().for_each(|v| *v -= m);
    Ok(out)
}

/// Corpus-level channel scales that bring both channels to unit deviation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormStats {
    pub disp_std: f64,
    pub df_std: f64,
}

impl NormStats {
    pub fn new(disp_std: f64, df_std: f64) -> Result<Self> {
        if !(disp_std > 0.0 && disp_std.is_finite()) || !(df_std > 0.0 && df_std.is_finite()) {
            return Err(Error::DegenerateCorpus(format!(
                "channel deviations must be positive (disp {disp_std}, df {df_std})"
            )));
        }
        Ok(NormStats { disp_std, df_std })
    }

    /// Pooled per-pixel standard deviation of each channel over `samples`.
    pub fn from_samples<'a>(samples: impl IntoIterator<Item = &'a JointSample>) -> Result<Self> {
        let mut n = 0usize;
        let (mut sd, mut sd2, mut sf, mut sf2) = (0.0, 0.0, 0.0, 0.0);
        for s in samples {
            for &v in s.disp.values() {
                sd += v;
                sd2 += v * v;
            }
            for &v in s.df.values() {
                sf += v;
                sf2 += v * v;
            }
            n += s.disp.values().len();
        }
        if n == 0 {
            return Err(Error::DegenerateCorpus("no samples".into()));
        }
        let n = n as f64;
        let disp_std = (sd2 / n - (sd / n).powi(2)).max(0.0).sqrt();
        let df_std = (sf2 / n - (sf / n).powi(2)).max(0.0).sqrt();
        Self::new(disp_std, df_std)
    }
}

/// Scales the displacement channel by `1/disp_std` and the distance channel
/// by `1/df_std`; the truncation scales with it.
pub fn normalize_joint(sample: &JointSample, stats: NormStats) -> Result<JointSample> {
    let stats = NormStats::new(stats.disp_std, stats.df_std)?;
    scale_joint(sample, 1.0 / stats.disp_std, 1.0 / stats.df_std)
}

pub fn denormalize_joint(sample: &JointSample, stats: NormStats) -> Result<JointSample> {
    let stats = NormStats::new(stats.disp_std, stats.df_std)?;
    scale_joint(sample, stats.disp_std, stats.df_std)
}

fn scale_joint(sample: &JointSample, disp_scale: f64, df_scale: f64) -> Result<JointSample> {
    let disp = DisplacementMap::new(sample.disp.grid().map(|v| v * disp_scale))?;
    let df = DistanceField::with_truncation(
        sample.df.grid().map(|v| v * df_scale),
        sample.df.truncation() * df_scale,
    )?;
    Ok(JointSample {
        disp,
        df,
        expression: sample.expression.clone(),
        age: sample.age,
    })
}

#[cfg(test)]
mod tests;
