//! Loss functions and metrics, each with an analytic gradient with respect to
//! the predicted rasters.
//!
//! All losses are means over pixels (and channels), so their values do not
//! depend on resolution.

mod adversarial;
mod features;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{truncation_for, DisplacementMap, DistanceField, Grid, JointSample};

pub use adversarial::{
    adversarial_objective, gan_loss_fake, gan_loss_generator, gan_loss_real, AdversarialBatch, FixedCritic, LogisticCritic,
    MultiTaskCritic, PROB_EPS,
};
pub use features::{FeatureExtractor, ReferenceExtractor, PERCEPTUAL_LEVELS};

use features::{l1_with_grad, level_features, pyramid, pyramid_backward, sign};

/// Borrowed displacement and distance-field rasters of one joint sample.
#[derive(Clone, Copy, Debug)]
pub struct RasterPair<'a> {
    pub disp: &'a Grid,
    pub df: &'a Grid,
}

impl<'a> RasterPair<'a> {
    pub fn new(disp: &'a Grid, df: &'a Grid) -> Self {
        RasterPair { disp, df }
    }
}

impl<'a> From<&'a JointSample> for RasterPair<'a> {
    fn from(s: &'a JointSample) -> Self {
        RasterPair { disp: s.disp.grid(), df: s.df.grid() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub lambda_df: f64,
    pub lambda_gan: f64,
    pub lambda_cyc: f64,
    /// Distance-field truncation in pixels.
    pub delta: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self::for_resolution(256)
    }
}

impl LossWeights {
    pub fn for_resolution(width: usize) -> Self {
        LossWeights { lambda_df: 2.5, lambda_gan: 0.05, lambda_cyc: 1.0, delta: truncation_for(width) }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda_df", self.lambda_df), ("lambda_gan", self.lambda_gan), ("lambda_cyc", self.lambda_cyc), ("delta", self.delta)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be a finite non-negative number, got {v}")));
            }
        }
        Ok(())
    }
}

fn check_shape(a: &Grid, b: &Grid) -> Result<()> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(Error::shape(format!("{}x{}", b.width(), b.height()), format!("{}x{}", a.width(), a.height())))
    }
}

/// Mean of `|min(pred, delta) - min(target, delta)|`.
pub fn distance_field_loss(pred: &DistanceField, target: &DistanceField, delta: f64) -> Result<f64> {
    df_loss_grad(pred.grid(), target.grid(), delta).map(|(v, _)| v)
}

/// Truncated distance-field loss on raw grids and its gradient with respect
/// to `pred`. Where `pred >= delta` the gradient is 0.
pub fn df_loss_grad(pred: &Grid, target: &Grid, delta: f64) -> Result<(f64, Grid)> {
    check_shape(pred, target)?;
    let n = pred.len() as f64;
    let sum: f64 = pred.data().iter().zip(target.data()).map(|(p, t)| (p.min(delta) - t.min(delta)).abs()).sum();
    let grad = pred.zip_map(target, |p, t| if p < delta { sign(p - t.min(delta)) / n } else { 0.0 });
    Ok((sum / n, grad))
}

/// `sum_i (1 / N_i) * sum_c mean |f_ic(pred) - f_ic(target)|` over the
/// extractor's layers.
pub fn feature_matching_loss(pred: RasterPair<'_>, target: RasterPair<'_>, fx: &dyn FeatureExtractor) -> Result<f64> {
    fm_loss_grad(pred, target, fx).map(|(v, _, _)| v)
}

pub fn fm_loss_grad(pred: RasterPair<'_>, target: RasterPair<'_>, fx: &dyn FeatureExtractor) -> Result<(f64, Grid, Grid)> {
    check_shape(pred.disp, target.disp)?;
    check_shape(pred.df, target.df)?;
    check_shape(pred.disp, pred.df)?;
    let fp = fx.extract(pred);
    let ft = fx.extract(target);
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(fp.len());
    for (i, (lp, lt)) in fp.iter().zip(&ft).enumerate() {
        let w = 1.0 / fx.layer_channels(i) as f64;
        let mut layer = Vec::with_capacity(lp.len());
        for (a, b) in lp.iter().zip(lt) {
            let (v, g) = l1_with_grad(a, b, w);
            total += v;
            layer.push(g);
        }
        grads.push(layer);
    }
    let (gd, gs) = fx.backward(pred, &grads);
    Ok((total, gd, gs))
}

/// `feature_matching_loss + lambda_df * distance_field_loss`.
pub fn reconstruction_loss(pred: RasterPair<'_>, target: RasterPair<'_>, fx: &dyn FeatureExtractor, weights: &LossWeights) -> Result<f64> {
    reconstruction_loss_grad(pred, target, fx, weights).map(|(v, _, _)| v)
}

pub fn reconstruction_loss_grad(
    pred: RasterPair<'_>,
    target: RasterPair<'_>,
    fx: &dyn FeatureExtractor,
    weights: &LossWeights,
) -> Result<(f64, Grid, Grid)> {
    let (fm, gd, gs) = fm_loss_grad(pred, target, fx)?;
    let (df, gdf) = df_loss_grad(pred.df, target.df, weights.delta)?;
    let gs = gs.zip_map(&gdf, |a, b| a + weights.lambda_df * b);
    Ok((fm + weights.lambda_df * df, gd, gs))
}

/// Multi-scale structural distance between displacement maps: five binomial
/// pyramid levels, each compared on blurred intensity and absolute x/y
/// differences, averaged over channels, pixels and levels.
pub fn perceptual_detail_distance(a: &DisplacementMap, b: &DisplacementMap) -> Result<f64> {
    perceptual_grad(a.grid(), b.grid()).map(|(v, _)| v)
}

/// Perceptual distance on raw grids and its gradient with respect to `pred`.
pub fn perceptual_grad(pred: &Grid, target: &Grid) -> Result<(f64, Grid)> {
    check_shape(pred, target)?;
    let pp = pyramid(pred, PERCEPTUAL_LEVELS);
    let pt = pyramid(target, PERCEPTUAL_LEVELS);
    let w = 1.0 / (3 * PERCEPTUAL_LEVELS) as f64;
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(PERCEPTUAL_LEVELS);
    for (a, b) in pp.iter().zip(&pt) {
        let (fa, fb) = (level_features(a), level_features(b));
        let mut g: [Grid; 3] = std::array::from_fn(|_| Grid::zeros(0, 0));
        for k in 0..3 {
            let (v, gk) = l1_with_grad(&fa[k], &fb[k], w);
            total += v;
            g[k] = gk;
        }
        grads.push(g);
    }
    Ok((total, pyramid_backward(&pp, &grads)))
}

/// Mean absolute per-pixel difference, reported next to the perceptual
/// metric.
pub fn mean_abs_difference(a: &DisplacementMap, b: &DisplacementMap) -> Result<f64> {
    check_shape(a.grid(), b.grid())?;
    Ok(a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.grid().len() as f64)
}

#[cfg(test)]
mod tests;
