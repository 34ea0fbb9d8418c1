//! Stage-B training losses on normalized rasters, with analytic gradients
//! with respect to the transformation-module parameters.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{
    adversarial_objective, df_loss_grad, reconstruction_loss_grad, AdversarialBatch, FeatureExtractor, LogisticCritic,
    LossWeights, MultiTaskCritic, RasterPair,
};
use crate::raster::{Grid, JointSample, MAX_AGE, MIN_AGE};
use crate::synth::{age_group, CorpusSample};

use super::{DetailModel, AGE_SPAN};

/// One training tuple: a sample, a same-subject sample at another
/// expression, a style sample for the structure mix (same expression and age
/// group, another subject) and a target age.
#[derive(Clone, Copy, Debug)]
pub struct TrainingItem<'a> {
    pub x: &'a JointSample,
    pub x_exp: &'a JointSample,
    pub style: &'a JointSample,
    pub target_age: f64,
}

/// [`TrainingItem`] as indices into a sample list.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemIndices {
    pub x: usize,
    pub x_exp: usize,
    pub style: usize,
    pub target_age: f64,
}

impl ItemIndices {
    pub fn resolve<'a>(&self, samples: &[&'a CorpusSample]) -> TrainingItem<'a> {
        TrainingItem {
            x: &samples[self.x].sample,
            x_exp: &samples[self.x_exp].sample,
            style: &samples[self.style].sample,
            target_age: self.target_age,
        }
    }
}

/// Draws `count` training tuples from `samples`.
///
/// The style partner comes from another subject with the same key expression
/// and age group; failing that, the same key expression at the nearest age;
/// failing that, the sample itself.
pub fn sample_training_items(samples: &[&CorpusSample], count: usize, rng: &mut impl Rng) -> Vec<ItemIndices> {
    if samples.is_empty() {
        return Vec::new();
    }
    let mut by_subject: HashMap<u32, Vec<usize>> = HashMap::new();
    for (i, s) in samples.iter().enumerate() {
        by_subject.entry(s.subject_id).or_default().push(i);
    }
    (0..count)
        .map(|_| {
            let x = rng.random_range(0..samples.len());
            let sx = samples[x];
            let mates: Vec<usize> = by_subject[&sx.subject_id].iter().copied().filter(|&j| j != x).collect();
            let x_exp = if mates.is_empty() { x } else { mates[rng.random_range(0..mates.len())] };
            let same_key: Vec<usize> = (0..samples.len())
                .filter(|&j| samples[j].subject_id != sx.subject_id && samples[j].key_expression == sx.key_expression)
                .collect();
            let group = age_group(sx.sample.age);
            let same_group: Vec<usize> = same_key.iter().copied().filter(|&j| age_group(samples[j].sample.age) == group).collect();
            let style = if !same_group.is_empty() {
                same_group[rng.random_range(0..same_group.len())]
            } else {
                same_key
                    .iter()
                    .copied()
                    .min_by(|&a, &b| {
                        let da = (samples[a].sample.age - sx.sample.age).abs();
                        let db = (samples[b].sample.age - sx.sample.age).abs();
                        da.total_cmp(&db)
                    })
                    .unwrap_or(x)
            };
            ItemIndices { x, x_exp, style, target_age: rng.random_range(MIN_AGE..MAX_AGE) }
        })
        .collect()
}

/// Mean loss values over a set of training tuples.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    /// Reconstruction of `x` plus reconstruction of `x_exp` from the edited code.
    pub rec: f64,
    pub rec_self: f64,
    pub rec_exp: f64,
    /// Weighted distance-field loss of the structure mix.
    pub structure: f64,
    pub cycle: f64,
    /// Squared age-head error of the aged code in units of half the age range.
    /// Drives the age module in place of a deep critic; not part of `total`.
    pub age_target: f64,
    pub gan: Option<f64>,
    /// `rec + structure + lambda_cyc * cycle (+ lambda_gan * gan)`.
    pub total: f64,
}

/// Loss gradients with respect to the transformation-module parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct StageBGradients {
    pub losses: LossBreakdown,
    /// Of `rec` (only its second term depends on the expression module).
    pub rec_expression: Vec<f64>,
    /// Of `cycle`.
    pub cycle_age: Vec<f64>,
    /// Of `age_target`.
    pub age_target_age: Vec<f64>,
}

impl DetailModel {
    /// Loss weights with the truncation expressed in normalized units.
    pub(crate) fn normalized_weights(&self, w: &LossWeights) -> LossWeights {
        LossWeights { delta: w.delta / self.norm.df_std, ..*w }
    }
}

/// Reconstruction loss of `mu + W z` against a normalized target and its
/// gradient with respect to `z`.
fn rec_at(model: &DetailModel, z: &[f64], target: RasterPair<'_>, w: &LossWeights, fx: &dyn FeatureExtractor) -> Result<(f64, Vec<f64>)> {
    let (pd, ps) = model.split_normalized(&model.generate_normalized(z));
    let (v, gd, gs) = reconstruction_loss_grad(RasterPair::new(&pd, &ps), target, fx, w)?;
    let mut g = gd.into_vec();
    g.extend(gs.into_vec());
    Ok((v, model.project(&g)))
}

/// `lambda_df * l_df(G(z).df, target)` on normalized rasters and its gradient
/// with respect to `z`. `target_df` is in pixels.
pub fn structure_loss_grad(model: &DetailModel, z: &[f64], target_df: &Grid, weights: &LossWeights) -> Result<(f64, Vec<f64>)> {
    if z.len() != model.latent_dim() {
        return Err(Error::DimensionMismatch { what: "latent code", expected: model.latent_dim(), found: z.len() });
    }
    let r = model.resolution();
    let w = model.normalized_weights(weights);
    let target = target_df.map(|v| v / model.norm.df_std);
    let pred = Grid::from_vec(r, r, model.generate_df_normalized(z))?;
    let (v, g) = df_loss_grad(&pred, &target, w.delta)?;
    let mut gz = model.project_df(g.data());
    gz.iter_mut().for_each(|x| *x *= w.lambda_df);
    Ok((w.lambda_df * v, gz))
}

struct Normalized {
    disp: Grid,
    df: Grid,
}

impl Normalized {
    fn of(model: &DetailModel, s: &JointSample) -> Self {
        let (disp, df) = model.split_normalized(&model.normalized(s.disp.grid(), s.df.grid()));
        Normalized { disp, df }
    }

    fn pair(&self) -> RasterPair<'_> {
        RasterPair::new(&self.disp, &self.df)
    }

    fn vector(&self) -> Vec<f64> {
        self.disp.data().iter().chain(self.df.data()).copied().collect()
    }
}

struct ItemTerms {
    rec_self: f64,
    rec_exp: f64,
    structure: f64,
    cycle: f64,
    age_target: f64,
    /// Codes of the reconstruction, expression edit, aged sample and mix.
    codes: [Vec<f64>; 4],
}

fn check_item(model: &DetailModel, item: &TrainingItem<'_>) -> Result<()> {
    for s in [item.x, item.x_exp, item.style] {
        if s.resolution() != model.resolution() {
            return Err(Error::shape(format!("{0}x{0}", model.resolution()), format!("{0}x{0}", s.resolution())));
        }
    }
    model.check_expression(&item.x_exp.expression)?;
    DetailModel::check_age(item.target_age)?;
    DetailModel::check_age(item.x.age)
}

/// Evaluates one tuple, accumulating parameter gradients when `grads` is
/// given as (expression rec, age cycle, age target).
fn item_terms(
    model: &DetailModel,
    item: &TrainingItem<'_>,
    weights: &LossWeights,
    fx: &dyn FeatureExtractor,
    full: bool,
    mut grads: Option<(&mut [f64], &mut [f64], &mut [f64])>,
) -> Result<ItemTerms> {
    check_item(model, item)?;
    let w = model.normalized_weights(weights);
    let sigma = model.latent_std();
    let xn = Normalized::of(model, item.x);
    let z = model.encode_normalized(&xn.vector());

    let rec_self = if full { rec_at(model, &z, xn.pair(), &w, fx)?.0 } else { 0.0 };

    // Expression edit toward x_exp.
    let xe = Normalized::of(model, item.x_exp);
    let u = model.expression_input(&z, &item.x_exp.expression);
    let (out, cache) = model.t_exp.forward(&u);
    let z_exp = model.add_whitened(&z, &out);
    let (rec_exp, gz) = rec_at(model, &z_exp, xe.pair(), &w, fx)?;
    if let Some((g_exp, _, _)) = grads.as_mut() {
        let gout: Vec<f64> = gz.iter().zip(sigma).map(|(g, s)| g * s).collect();
        model.t_exp.backward(&u, &cache, &gout, g_exp);
    }

    // Structure mix: style displacement with the sample's own lines.
    let z_mix = model.encode_normalized(&model.normalized(item.style.disp.grid(), item.x.df.grid()));
    let structure = if full { structure_loss_grad(model, &z_mix, item.x.df.grid(), weights)?.0 } else { 0.0 };

    // Age cycle a -> target -> a.
    let u1 = model.age_input(&z, item.target_age);
    let (o1, c1) = model.t_age.forward(&u1);
    let z_age = model.add_whitened(&z, &o1);
    let u2 = model.age_input(&z_age, item.x.age);
    let (o2, c2) = model.t_age.forward(&u2);
    let z_cyc = model.add_whitened(&z_age, &o2);
    let (cycle, gz_cyc) = rec_at(model, &z_cyc, xn.pair(), &w, fx)?;
    let age_err = model.age_of(&z_age) - item.target_age;
    let age_target = (age_err / AGE_SPAN).powi(2);
    if let Some((_, g_cyc, g_tgt)) = grads.as_mut() {
        let gout2: Vec<f64> = gz_cyc.iter().zip(sigma).map(|(g, s)| g * s).collect();
        let gu2 = model.t_age.backward(&u2, &c2, &gout2, g_cyc);
        // u2 holds z_age / sigma, so d/dz_age picks up gu2 / sigma.
        let gout1: Vec<f64> = (0..model.latent_dim()).map(|k| (gz_cyc[k] + gu2[k] / sigma[k]) * sigma[k]).collect();
        model.t_age.backward(&u1, &c1, &gout1, g_cyc);
        // d age / d z_age = head / sigma; times sigma for the module output.
        let scale = 2.0 * age_err / (AGE_SPAN * AGE_SPAN);
        let gout_t: Vec<f64> = model.age_head[..model.latent_dim()].iter().map(|h| scale * h).collect();
        model.t_age.backward(&u1, &c1, &gout_t, g_tgt);
    }

    Ok(ItemTerms { rec_self, rec_exp, structure, cycle, age_target, codes: [z, z_exp, z_age, z_mix] })
}

/// Mean expression-edit reconstruction loss over `pairs` of (source, target).
pub(crate) fn expression_edit_loss(model: &DetailModel, pairs: &[(&JointSample, &JointSample)], weights: &LossWeights, fx: &dyn FeatureExtractor) -> Result<f64> {
    let w = model.normalized_weights(weights);
    let mut total = 0.0;
    for (x, x_exp) in pairs {
        let z = model.encode_normalized(&Normalized::of(model, x).vector());
        let out = model.t_exp.apply(&model.expression_input(&z, &x_exp.expression));
        let xe = Normalized::of(model, x_exp);
        total += rec_at(model, &model.add_whitened(&z, &out), xe.pair(), &w, fx)?.0;
    }
    Ok(total / pairs.len().max(1) as f64)
}

fn combine(w: &LossWeights, rec_self: f64, rec_exp: f64, structure: f64, cycle: f64, age_target: f64, gan: Option<f64>) -> LossBreakdown {
    let rec = rec_self + rec_exp;
    let mut total = rec + structure + w.lambda_cyc * cycle;
    if let Some(g) = gan {
        total += w.lambda_gan * g;
    }
    LossBreakdown { rec, rec_self, rec_exp, structure, cycle, age_target, gan, total }
}

/// Mean losses over `items`. With a critic the adversarial objective is
/// evaluated on normalized rasters, with key-expression and age-group
/// classes as labels.
pub fn training_step_losses(
    model: &DetailModel,
    items: &[TrainingItem<'_>],
    weights: &LossWeights,
    fx: &dyn FeatureExtractor,
    critic: Option<&dyn MultiTaskCritic>,
) -> Result<LossBreakdown> {
    if items.is_empty() {
        return Err(Error::InvalidInput("empty training batch".into()));
    }
    weights.validate()?;
    let mut acc = [0.0; 6];
    for item in items {
        let t = item_terms(model, item, weights, fx, true, None)?;
        let gan = match critic {
            Some(c) => adversarial_terms(model, item, &t, c)?,
            None => 0.0,
        };
        for (a, v) in acc.iter_mut().zip([t.rec_self, t.rec_exp, t.structure, t.cycle, t.age_target, gan]) {
            *a += v;
        }
    }
    let n = items.len() as f64;
    let [rs, re, st, cy, at, gan] = acc.map(|v| v / n);
    Ok(combine(weights, rs, re, st, cy, at, critic.map(|_| gan)))
}

fn adversarial_terms(model: &DetailModel, item: &TrainingItem<'_>, t: &ItemTerms, critic: &dyn MultiTaskCritic) -> Result<f64> {
    let xn = Normalized::of(model, item.x);
    let fakes: Vec<(Grid, Grid)> = t.codes.iter().map(|z| model.split_normalized(&model.generate_normalized(z))).collect();
    let pair = |i: usize| RasterPair::new(&fakes[i].0, &fakes[i].1);
    let batch = AdversarialBatch {
        real: xn.pair(),
        rec: pair(0),
        exp: pair(1),
        age: pair(2),
        mix: pair(3),
        e: model.nearest_key(&item.x.expression),
        a: age_group(item.x.age),
        e_target: model.nearest_key(&item.x_exp.expression),
        a_target: age_group(item.target_age),
    };
    adversarial_objective(&batch, critic)
}

/// Mean losses over `items` with their parameter gradients.
pub fn stage_b_gradients(
    model: &DetailModel,
    items: &[TrainingItem<'_>],
    weights: &LossWeights,
    fx: &dyn FeatureExtractor,
) -> Result<StageBGradients> {
    if items.is_empty() {
        return Err(Error::InvalidInput("empty training batch".into()));
    }
    weights.validate()?;
    let mut g_exp = vec![0.0; model.t_exp.params().len()];
    let mut g_cyc = vec![0.0; model.t_age.params().len()];
    let mut g_tgt = vec![0.0; model.t_age.params().len()];
    let mut acc = [0.0; 5];
    for item in items {
        let t = item_terms(model, item, weights, fx, true, Some((&mut g_exp, &mut g_cyc, &mut g_tgt)))?;
        for (a, v) in acc.iter_mut().zip([t.rec_self, t.rec_exp, t.structure, t.cycle, t.age_target]) {
            *a += v;
        }
    }
    let n = items.len() as f64;
    for g in [&mut g_exp, &mut g_cyc, &mut g_tgt] {
        g.iter_mut().for_each(|v| *v /= n);
    }
    let [rs, re, st, cy, at] = acc.map(|v| v / n);
    Ok(StageBGradients { losses: combine(weights, rs, re, st, cy, at, None), rec_expression: g_exp, cycle_age: g_cyc, age_target_age: g_tgt })
}

/// Parameter gradients of the terms that depend on the modules.
pub(crate) struct ModuleGradients {
    pub expression: Vec<f64>,
    pub cycle: Vec<f64>,
    pub age_target: Vec<f64>,
}

pub(crate) fn module_gradients(
    model: &DetailModel,
    items: &[TrainingItem<'_>],
    weights: &LossWeights,
    fx: &dyn FeatureExtractor,
) -> Result<ModuleGradients> {
    let mut g_exp = vec![0.0; model.t_exp.params().len()];
    let mut g_cyc = vec![0.0; model.t_age.params().len()];
    let mut g_tgt = vec![0.0; model.t_age.params().len()];
    for item in items {
        item_terms(model, item, weights, fx, false, Some((&mut g_exp, &mut g_cyc, &mut g_tgt)))?;
    }
    let n = items.len().max(1) as f64;
    for g in [&mut g_exp, &mut g_cyc, &mut g_tgt] {
        g.iter_mut().for_each(|v| *v /= n);
    }
    Ok(ModuleGradients { expression: g_exp, cycle: g_cyc, age_target: g_tgt })
}

/// Normalized reconstruction, expression edit, age edit and structure mix of
/// every item.
pub(crate) fn fake_rasters(model: &DetailModel, items: &[TrainingItem<'_>]) -> Result<Vec<[(Grid, Grid); 4]>> {
    items
        .iter()
        .map(|item| {
            check_item(model, item)?;
            let z = model.encode_normalized(&model.normalized(item.x.disp.grid(), item.x.df.grid()));
            let z_exp = model.add_whitened(&z, &model.t_exp.apply(&model.expression_input(&z, &item.x_exp.expression)));
            let z_age = model.add_whitened(&z, &model.t_age.apply(&model.age_input(&z, item.target_age)));
            let z_mix = model.encode_normalized(&model.normalized(item.style.disp.grid(), item.x.df.grid()));
            Ok([z, z_exp, z_age, z_mix].map(|c| model.split_normalized(&model.generate_normalized(&c))))
        })
        .collect()
}

/// Gradients of the non-saturating adversarial loss of the expression edit
/// (labels `(e_target, a)`) and the age edit (labels `(e, a_target)`).
pub(crate) fn adversarial_module_gradients(
    model: &DetailModel,
    items: &[TrainingItem<'_>],
    critic: &LogisticCritic,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let sigma = model.latent_std();
    let mut g_exp = vec![0.0; model.t_exp.params().len()];
    let mut g_age = vec![0.0; model.t_age.params().len()];
    for item in items {
        check_item(model, item)?;
        let (e, a) = (model.nearest_key(&item.x.expression), age_group(item.x.age));
        let (e_t, a_t) = (model.nearest_key(&item.x_exp.expression), age_group(item.target_age));
        let z = model.encode_normalized(&model.normalized(item.x.disp.grid(), item.x.df.grid()));
        for (kind, target) in [(0, (e_t, a)), (1, (e, a_t))] {
            let module = if kind == 0 { &model.t_exp } else { &model.t_age };
            let u = if kind == 0 { model.expression_input(&z, &item.x_exp.expression) } else { model.age_input(&z, item.target_age) };
            let (out, cache) = module.forward(&u);
            let (pd, ps) = model.split_normalized(&model.generate_normalized(&model.add_whitened(&z, &out)));
            let (_, gd, gs) = critic.generator_loss_grad(RasterPair::new(&pd, &ps), target.0, target.1);
            let mut g = gd.into_vec();
            g.extend(gs.into_vec());
            let gout: Vec<f64> = model.project(&g).iter().zip(sigma).map(|(g, s)| g * s).collect();
            module.backward(&u, &cache, &gout, if kind == 0 { &mut g_exp } else { &mut g_age });
        }
    }
    let n = items.len().max(1) as f64;
    g_exp.iter_mut().chain(g_age.iter_mut()).for_each(|v| *v /= n);
    Ok((g_exp, g_age))
}
