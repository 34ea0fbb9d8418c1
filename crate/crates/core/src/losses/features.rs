use crate::raster::filter::{convolve_separable, convolve_separable_adjoint, downsample, downsample_adjoint, forward_diff, forward_diff_adjoint, Axis, BINOMIAL5};
use crate::raster::Grid;

use super::RasterPair;

/// Number of pyramid levels in the perceptual detail metric.
pub const PERCEPTUAL_LEVELS: usize = 5;

/// Maps a joint raster pair to layers of feature grids.
///
/// `backward` is the vector-Jacobian product: given the gradient of a scalar
/// with respect to every feature grid, it returns the gradient with respect to
/// the displacement and distance-field inputs.
pub trait FeatureExtractor: Send + Sync {
    fn layer_count(&self) -> usize;
    fn layer_channels(&self, layer: usize) -> usize;
    fn extract(&self, x: RasterPair<'_>) -> Vec<Vec<Grid>>;
    fn backward(&self, x: RasterPair<'_>, grad: &[Vec<Grid>]) -> (Grid, Grid);
}

/// Handcrafted multi-scale extractor: at each of `scales` pyramid levels,
/// blurred intensity, `|d/dx|` and `|d/dy|` of both channels (6 per layer).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceExtractor {
    pub scales: usize,
}

impl Default for ReferenceExtractor {
    fn default() -> Self {
        ReferenceExtractor { scales: 4 }
    }
}

impl FeatureExtractor for ReferenceExtractor {
    fn layer_count(&self) -> usize {
        self.scales
    }

    fn layer_channels(&self, _layer: usize) -> usize {
        6
    }

    fn extract(&self, x: RasterPair<'_>) -> Vec<Vec<Grid>> {
        let pd = pyramid(x.disp, self.scales);
        let ps = pyramid(x.df, self.scales);
        pd.iter()
            .zip(&ps)
            .map(|(d, s)| {
                let mut layer: Vec<Grid> = level_features(d).into();
                layer.extend(level_features(s));
                layer
            })
            .collect()
    }

    fn backward(&self, x: RasterPair<'_>, grad: &[Vec<Grid>]) -> (Grid, Grid) {
        let pd = pyramid(x.disp, self.scales);
        let ps = pyramid(x.df, self.scales);
        let gd: Vec<[Grid; 3]> = grad.iter().map(|g| [g[0].clone(), g[1].clone(), g[2].clone()]).collect();
        let gs: Vec<[Grid; 3]> = grad.iter().map(|g| [g[3].clone(), g[4].clone(), g[5].clone()]).collect();
        (pyramid_backward(&pd, &gd), pyramid_backward(&ps, &gs))
    }
}

/// `levels` images, each a binomial downsample of the previous one.
pub(crate) fn pyramid(x: &Grid, levels: usize) -> Vec<Grid> {
    let mut out = Vec::with_capacity(levels);
    out.push(x.clone());
    for _ in 1..levels {
        let next = downsample(out.last().expect("non-empty"));
        out.push(next);
    }
    out
}

/// Blurred intensity, `|d/dx|`, `|d/dy|`.
pub(crate) fn level_features(img: &Grid) -> [Grid; 3] {
    [
        convolve_separable(img, &BINOMIAL5),
        forward_diff(img, Axis::X).map(f64::abs),
        forward_diff(img, Axis::Y).map(f64::abs),
    ]
}

fn level_backward(img: &Grid, g: &[Grid; 3]) -> Grid {
    let mut out = convolve_separable_adjoint(&g[0], &BINOMIAL5);
    for (axis, gk) in [(Axis::X, &g[1]), (Axis::Y, &g[2])] {
        let d = forward_diff(img, axis);
        let through_abs = d.zip_map(gk, |v, gv| sign(v) * gv);
        let back = forward_diff_adjoint(&through_abs, axis);
        out = out.zip_map(&back, |a, b| a + b);
    }
    out
}

/// Gradient with respect to the finest level, given per-level feature
/// gradients.
pub(crate) fn pyramid_backward(levels: &[Grid], grads: &[[Grid; 3]]) -> Grid {
    let mut acc: Option<Grid> = None;
    for s in (0..levels.len()).rev() {
        let mut g = level_backward(&levels[s], &grads[s]);
        if let Some(up) = acc.take() {
            g = g.zip_map(&up, |a, b| a + b);
        }
        acc = Some(if s > 0 {
            downsample_adjoint(&g, levels[s - 1].width(), levels[s - 1].height())
        } else {
            g
        });
    }
    acc.expect("at least one level")
}

/// Mean absolute difference per feature grid and its gradient with respect
/// to `a`'s features, each grid weighted by `weight / len`.
pub(crate) fn l1_with_grad(a: &Grid, b: &Grid, weight: f64) -> (f64, Grid) {
    let n = a.len() as f64;
    let sum: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).sum();
    let grad = a.zip_map(b, |x, y| weight * sign(x - y) / n);
    (weight * sum / n, grad)
}

/// Sign with `sign(0) = 0`, the subgradient used at kinks of `|.|`.
pub(crate) fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}
