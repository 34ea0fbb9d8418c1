use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Grid;

use super::features::{FeatureExtractor, ReferenceExtractor};
use super::RasterPair;

/// Probabilities are clamped to `[EPS, 1 - EPS]` before taking logs.
pub const PROB_EPS: f64 = 1e-7;

/// A critic with `n_exp` expression heads followed by `n_age` age heads, each
/// giving the probability that a sample is real for that class.
pub trait MultiTaskCritic {
    fn n_exp(&self) -> usize;
    fn n_age(&self) -> usize;
    fn probabilities(&self, x: RasterPair<'_>) -> Vec<f64>;
}

/// Critic whose heads return fixed values regardless of input.
#[derive(Clone, Debug, PartialEq)]
pub struct FixedCritic {
    pub n_exp: usize,
    pub outputs: Vec<f64>,
}

impl MultiTaskCritic for FixedCritic {
    fn n_exp(&self) -> usize {
        self.n_exp
    }

    fn n_age(&self) -> usize {
        self.outputs.len() - self.n_exp
    }

    fn probabilities(&self, _x: RasterPair<'_>) -> Vec<f64> {
        self.outputs.clone()
    }
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

fn head_pair(critic: &dyn MultiTaskCritic, x: RasterPair<'_>, e_index: usize, a_index: usize) -> Result<(f64, f64)> {
    if e_index >= critic.n_exp() {
        return Err(Error::LabelOutOfRange { index: e_index, limit: critic.n_exp() });
    }
    if a_index >= critic.n_age() {
        return Err(Error::LabelOutOfRange { index: a_index, limit: critic.n_age() });
    }
    let p = critic.probabilities(x);
    Ok((clamp_prob(p[e_index]), clamp_prob(p[critic.n_exp() + a_index])))
}

/// `ln(1 - D_e(x)) + ln(1 - D_a(x))`.
pub fn gan_loss_fake(x: RasterPair<'_>, e_index: usize, a_index: usize, critic: &dyn MultiTaskCritic) -> Result<f64> {
    let (pe, pa) = head_pair(critic, x, e_index, a_index)?;
    Ok((1.0 - pe).ln() + (1.0 - pa).ln())
}

/// `ln D_e(x) + ln D_a(x)`.
pub fn gan_loss_real(x: RasterPair<'_>, e_index: usize, a_index: usize, critic: &dyn MultiTaskCritic) -> Result<f64> {
    let (pe, pa) = head_pair(critic, x, e_index, a_index)?;
    Ok(pe.ln() + pa.ln())
}

/// Non-saturating generator form `-ln D_e(x) - ln D_a(x)`.
pub fn gan_loss_generator(x: RasterPair<'_>, e_index: usize, a_index: usize, critic: &dyn MultiTaskCritic) -> Result<f64> {
    let (pe, pa) = head_pair(critic, x, e_index, a_index)?;
    Ok(-pe.ln() - pa.ln())
}

/// The five samples of one adversarial evaluation and their class labels.
pub struct AdversarialBatch<'a> {
    pub real: RasterPair<'a>,
    pub rec: RasterPair<'a>,
    pub exp: RasterPair<'a>,
    pub age: RasterPair<'a>,
    pub mix: RasterPair<'a>,
    pub e: usize,
    pub a: usize,
    pub e_target: usize,
    pub a_target: usize,
}

/// Real term on `x` with `(e, a)`, fake terms on the reconstruction and the
/// mix with `(e, a)`, on the expression edit with `(e_target, a)` and on the
/// age edit with `(e, a_target)`.
pub fn adversarial_objective(batch: &AdversarialBatch<'_>, critic: &dyn MultiTaskCritic) -> Result<f64> {
    let b = batch;
    Ok(gan_loss_real(b.real, b.e, b.a, critic)?
        + gan_loss_fake(b.rec, b.e, b.a, critic)?
        + gan_loss_fake(b.exp, b.e_target, b.a, critic)?
        + gan_loss_fake(b.age, b.e, b.a_target, critic)?
        + gan_loss_fake(b.mix, b.e, b.a, critic)?)
}

/// Toy critic: logistic heads over the spatial means of the reference
/// extractor's feature grids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticCritic {
    n_exp: usize,
    n_age: usize,
    scales: usize,
    /// One row per head: feature weights followed by a bias.
    weights: Vec<Vec<f64>>,
}

impl LogisticCritic {
    pub fn new(n_exp: usize, n_age: usize, rng: &mut impl Rng) -> Self {
        let fx = ReferenceExtractor::default();
        let n_feat = (0..fx.layer_count()).map(|l| fx.layer_channels(l)).sum::<usize>();
        let weights = (0..n_exp + n_age)
            .map(|_| (0..=n_feat).map(|_| 0.01 * rng.random_range(-1.0..1.0)).collect())
            .collect();
        LogisticCritic { n_exp, n_age, scales: fx.scales, weights }
    }

    fn extractor(&self) -> ReferenceExtractor {
        ReferenceExtractor { scales: self.scales }
    }

    /// Spatial mean of every feature grid, in layer then channel order.
    pub fn pooled_features(&self, x: RasterPair<'_>) -> Vec<f64> {
        self.extractor().extract(x).iter().flatten().map(Grid::mean).collect()
    }

    fn logit(&self, head: usize, phi: &[f64]) -> f64 {
        let w = &self.weights[head];
        w[..phi.len()].iter().zip(phi).map(|(a, b)| a * b).sum::<f64>() + w[phi.len()]
    }

    /// One logistic-regression step pushing the `(e, a)` heads toward 1 on
    /// real samples and 0 on fakes. Returns the mean binary cross-entropy.
    pub fn train_step(
        &mut self,
        real: &[(RasterPair<'_>, usize, usize)],
        fake: &[(RasterPair<'_>, usize, usize)],
        lr: f64,
        weight_decay: f64,
    ) -> f64 {
        let mut grads = vec![vec![0.0; self.weights[0].len()]; self.weights.len()];
        let mut loss = 0.0;
        let mut count = 0.0;
        for (set, label) in [(real, 1.0), (fake, 0.0)] {
            for &(x, e, a) in set {
                let phi = self.pooled_features(x);
                for head in [e, self.n_exp + a] {
                    let p = clamp_prob(sigmoid(self.logit(head, &phi)));
                    loss -= label * p.ln() + (1.0 - label) * (1.0 - p).ln();
                    count += 1.0;
                    let r = p - label;
                    for (g, f) in grads[head].iter_mut().zip(phi.iter().chain(std::iter::once(&1.0))) {
                        *g += r * f;
                    }
                }
            }
        }
        if count == 0.0 {
            return 0.0;
        }
        for (w, g) in self.weights.iter_mut().zip(&grads) {
            for (wi, gi) in w.iter_mut().zip(g) {
                *wi -= lr * (gi / count + weight_decay * *wi);
            }
        }
        loss / count
    }

    /// Non-saturating generator loss on the `(e, a)` heads and its gradient
    /// with respect to both input rasters.
    pub fn generator_loss_grad(&self, x: RasterPair<'_>, e: usize, a: usize) -> (f64, Grid, Grid) {
        let fx = self.extractor();
        let feats = fx.extract(x);
        let phi: Vec<f64> = feats.iter().flatten().map(Grid::mean).collect();
        let mut dphi = vec![0.0; phi.len()];
        let mut loss = 0.0;
        for head in [e, self.n_exp + a] {
            let p = sigmoid(self.logit(head, &phi));
            loss -= clamp_prob(p).ln();
            // d(-ln p)/d logit = p - 1
            for (d, w) in dphi.iter_mut().zip(&self.weights[head]) {
                *d += (p - 1.0) * w;
            }
        }
        let mut k = 0;
        let grad: Vec<Vec<Grid>> = feats
            .iter()
            .map(|layer| {
                layer
                    .iter()
                    .map(|g| {
                        let v = dphi[k] / g.len() as f64;
                        k += 1;
                        Grid::filled(g.width(), g.height(), v)
                    })
                    .collect()
            })
            .collect();
        let (gd, gs) = fx.backward(x, &grad);
        (loss, gd, gs)
    }
}

impl MultiTaskCritic for LogisticCritic {
    fn n_exp(&self) -> usize {
        self.n_exp
    }

    fn n_age(&self) -> usize {
        self.n_age
    }

    fn probabilities(&self, x: RasterPair<'_>) -> Vec<f64> {
        let phi = self.pooled_features(x);
        (0..self.weights.len()).map(|h| sigmoid(self.logit(h, &phi))).collect()
    }
}

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}
