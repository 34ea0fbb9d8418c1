use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{FeatureExtractor, LogisticCritic, LossWeights, RasterPair, ReferenceExtractor};
use crate::raster::{Grid, NormStats};
use crate::synth::{age_group, Corpus, CorpusSample, AGE_GROUPS};

use super::objectives::{self, ItemIndices, LossBreakdown, TrainingItem};
use super::pca::principal_components;
use super::transform::{dot, TransformModule};
use super::{sigmoid, DetailModel, ModelMetadata, ModelParts, TransformKind, AGE_CENTER, AGE_SPAN};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub latent_dim: usize,
    pub hidden: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Defaults to the standard weights for the corpus resolution.
    pub weights: Option<LossWeights>,
    /// Alternate critic and generator updates after the main stage.
    pub adversarial: bool,
    pub adversarial_steps: usize,
    pub critic_learning_rate: f64,
    pub checkpoint_every: usize,
    /// Tuples in the validation and final-evaluation batches.
    pub eval_items: usize,
    /// Ridge strength of the least-squares fits, relative to the sample count.
    pub ridge: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            latent_dim: 64,
            hidden: 128,
            steps: 2000,
            learning_rate: 1e-3,
            momentum: 0.9,
            batch_size: 8,
            seed: 0,
            weights: None,
            adversarial: false,
            adversarial_steps: 200,
            critic_learning_rate: 0.1,
            checkpoint_every: 100,
            eval_items: 64,
            ridge: 1e-3,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 || self.hidden == 0 || self.batch_size == 0 || self.checkpoint_every == 0 || self.eval_items == 0 {
            return Err(Error::Config("latent_dim, hidden, batch_size, checkpoint_every and eval_items must be positive".into()));
        }
        if !(self.learning_rate >= 0.0) || !(0.0..1.0).contains(&self.momentum) || !(self.ridge >= 0.0) {
            return Err(Error::Config("learning_rate and ridge must be non-negative and momentum in [0, 1)".into()));
        }
        if let Some(w) = &self.weights {
            w.validate()?;
        }
        Ok(())
    }

    pub fn weights_for(&self, resolution: usize) -> LossWeights {
        self.weights.unwrap_or_else(|| LossWeights::for_resolution(resolution))
    }
}

/// Validation objective at one training step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: usize,
    pub value: f64,
}

fn to_f32(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = *x as f32 as f64);
}

fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const STREAM_INIT: u64 = 1;
const STREAM_BATCH: u64 = 2;
const STREAM_VALIDATION: u64 = 3;
const STREAM_EVAL: u64 = 4;
const STREAM_ADVERSARIAL: u64 = 5;
const STREAM_LINE_SEARCH: u64 = 6;

/// Mean losses over the evaluation batch drawn from `samples` with `seed`.
/// Fitting records this for the training split.
pub fn evaluate_split_losses(model: &DetailModel, samples: &[&CorpusSample], weights: &LossWeights, count: usize, seed: u64) -> Result<LossBreakdown> {
    let idx = objectives::sample_training_items(samples, count, &mut seeded(seed, STREAM_EVAL));
    let items: Vec<TrainingItem<'_>> = idx.iter().map(|i| i.resolve(samples)).collect();
    objectives::training_step_losses(model, &items, weights, &ReferenceExtractor::default(), None)
}

/// Solves `min |F B - Y|^2 + lambda |B|^2`, leaving the last column of `F`
/// (the bias) unpenalized.
fn ridge_solve(f: &DMatrix<f64>, y: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    ridge(f, y, lambda, f.ncols() - 1)
}

/// Ridge solve penalizing the first `penalized` columns of `F`.
fn ridge(f: &DMatrix<f64>, y: &DMatrix<f64>, lambda: f64, penalized: usize) -> Result<DMatrix<f64>> {
    let mut a = f.transpose() * f;
    for i in 0..penalized {
        a[(i, i)] += lambda;
    }
    let b = f.transpose() * y;
    if let Some(ch) = a.clone().cholesky() {
        return Ok(ch.solve(&b));
    }
    a.lu().solve(&b).ok_or_else(|| Error::DegenerateCorpus("singular least-squares system".into()))
}

impl DetailModel {
    /// Fits a model to the training split of `corpus`.
    pub fn fit(corpus: &Corpus, config: &TrainConfig) -> Result<DetailModel> {
        let samples: Vec<&CorpusSample> = corpus.train().collect();
        let mut model = Self::fit_samples(&samples, corpus.config.n_e, corpus.config.n_key, config)?;
        model.metadata.corpus = Some(corpus.config.clone());
        Ok(model)
    }

    /// Fits a model to `samples`, all of which are used for training.
    pub fn fit_samples(samples: &[&CorpusSample], n_e: usize, n_key: usize, config: &TrainConfig) -> Result<DetailModel> {
        config.validate()?;
        let d_req = config.latent_dim;
        if samples.len() < 2 * d_req {
            return Err(Error::DegenerateCorpus(format!("{} training samples, need at least {}", samples.len(), 2 * d_req)));
        }
        let resolution = samples[0].sample.resolution();
        if samples.iter().any(|s| s.sample.resolution() != resolution || s.sample.expression.len() != n_e) {
            return Err(Error::InvalidInput("training samples differ in resolution or blendshape count".into()));
        }
        if n_key == 0 {
            return Err(Error::Config("n_key must be positive".into()));
        }
        let weights = config.weights_for(resolution);

        // Stage A: normalization and principal components.
        let stats = NormStats::from_samples(samples.iter().map(|s| &s.sample))?;
        let norm = NormStats::new(stats.disp_std as f32 as f64, stats.df_std as f32 as f64)?;
        let rows: Vec<Vec<f64>> = samples
            .iter()
            .map(|s| {
                let (sd, ss) = (1.0 / norm.disp_std, 1.0 / norm.df_std);
                s.sample.disp.values().iter().map(|v| v * sd).chain(s.sample.df.values().iter().map(|v| v * ss)).collect()
            })
            .collect();
        let mut comps = principal_components(&rows, d_req)?;
        drop(rows);
        let d = comps.variances.len();
        if d < d_req {
            log::warn!("training data has rank {d}; latent dimension reduced from {d_req}");
        }
        let explained_variance = comps.variances.iter().sum::<f64>() / comps.total_variance;
        let mut latent_std: Vec<f64> = comps.variances.iter().map(|v| v.sqrt()).collect();
        to_f32(&mut comps.mean);
        to_f32(&mut comps.basis);
        to_f32(&mut latent_std);
        if latent_std.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::DegenerateCorpus("latent component with zero spread".into()));
        }

        let mut rng = seeded(config.seed, STREAM_INIT);
        let t_exp = TransformModule::new(d + n_e, config.hidden, d, &mut rng);
        let t_age = TransformModule::new(d + 1, config.hidden, d, &mut rng);
        let mut model = DetailModel::from_parts(ModelParts {
            resolution,
            n_e,
            n_key,
            n_age: AGE_GROUPS,
            norm,
            mean: comps.mean,
            basis: comps.basis,
            latent_std,
            age_head: vec![0.0; d + 1],
            exp_heads: vec![0.0; n_key * (d + 1)],
            t_exp,
            t_age,
            metadata: ModelMetadata::default(),
        })?;

        let codes: Vec<Vec<f64>> = samples
            .iter()
            .map(|s| model.encode_normalized(&model.normalized(s.sample.disp.grid(), s.sample.df.grid())))
            .collect();
        let whitened: Vec<Vec<f64>> = codes.iter().map(|z| model.whiten(z)).collect();
        let ages: Vec<f64> = samples.iter().map(|s| s.sample.age).collect();
        let lambda = config.ridge * samples.len() as f64;

        fit_age_head(&mut model, &whitened, &ages, lambda)?;
        fit_expression_heads(&mut model, &whitened, samples);
        warm_start_expression(&mut model, &whitened, samples, lambda)?;
        warm_start_age(&mut model, &whitened, &ages);
        let fx = ReferenceExtractor::default();
        scale_expression_edit(&mut model, samples, &weights, &fx, config)?;

        // Stage B: momentum descent on both modules.
        let validation = objectives::sample_training_items(samples, config.eval_items, &mut seeded(config.seed, STREAM_VALIDATION));
        let mut batch_rng = seeded(config.seed, STREAM_BATCH);
        let mut vel_exp = vec![0.0; model.t_exp.params().len()];
        let mut vel_age = vec![0.0; model.t_age.params().len()];
        let mut expression_curve = Vec::new();
        let mut age_curve = Vec::new();
        for step in 0..=config.steps {
            if step % config.checkpoint_every == 0 || step == config.steps {
                let items: Vec<TrainingItem<'_>> = validation.iter().map(|i| i.resolve(samples)).collect();
                let l = objectives::training_step_losses(&model, &items, &weights, &fx, None)?;
                expression_curve.push(CurvePoint { step, value: l.rec });
                age_curve.push(CurvePoint { step, value: l.age_target + weights.lambda_cyc * l.cycle });
                log::debug!("step {step}: rec {:.5} cycle {:.5} age {:.5}", l.rec, l.cycle, l.age_target);
            }
            if step == config.steps {
                break;
            }
            let idx = objectives::sample_training_items(samples, config.batch_size, &mut batch_rng);
            let items: Vec<TrainingItem<'_>> = idx.iter().map(|i| i.resolve(samples)).collect();
            let g = objectives::module_gradients(&model, &items, &weights, &fx)?;
            let g_age: Vec<f64> = g.cycle.iter().zip(&g.age_target).map(|(c, t)| weights.lambda_cyc * c + t).collect();
            momentum_step(model.t_exp.params_mut(), &mut vel_exp, &g.expression, config)?;
            momentum_step(model.t_age.params_mut(), &mut vel_age, &g_age, config)?;
        }

        if config.adversarial {
            adversarial_stage(&mut model, samples, &weights, config)?;
        }

        for kind in [TransformKind::Expression, TransformKind::Age] {
            to_f32(model.transform_mut(kind).params_mut());
        }

        let eval = evaluate_split_losses(&model, samples, &weights, config.eval_items, config.seed)?;
        let mut df_bound = 0.0f64;
        for s in samples {
            let z = model.encode(&s.sample)?;
            let (_, df) = model.decode(&z)?;
            df_bound = df_bound.max(crate::losses::distance_field_loss(&df, &s.sample.df, weights.delta)?);
        }
        let age_rmse = (codes.iter().zip(&ages).map(|(z, a)| (model.age_of(z) - a).powi(2)).sum::<f64>() / ages.len() as f64).sqrt();
        model.metadata = ModelMetadata {
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            train_config: Some(config.clone()),
            corpus: None,
            train_samples: samples.len(),
            explained_variance,
            reconstruction_df_bound: df_bound,
            age_head_rmse: age_rmse,
            final_losses: Some(eval),
            expression_curve,
            age_curve,
        };
        Ok(model)
    }
}

fn momentum_step(params: &mut [f64], vel: &mut [f64], grad: &[f64], cfg: &TrainConfig) -> Result<()> {
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Training("non-finite gradient".into()));
    }
    for ((p, v), g) in params.iter_mut().zip(vel.iter_mut()).zip(grad) {
        *v = cfg.momentum * *v - cfg.learning_rate * g;
        *p += *v;
    }
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::Training("non-finite parameters".into()));
    }
    Ok(())
}

/// Ridge regression of age on whitened codes.
fn fit_age_head(model: &mut DetailModel, whitened: &[Vec<f64>], ages: &[f64], lambda: f64) -> Result<()> {
    let d = model.d;
    let f = DMatrix::from_fn(whitened.len(), d + 1, |i, j| if j < d { whitened[i][j] } else { 1.0 });
    let y = DMatrix::from_fn(ages.len(), 1, |i, _| ages[i]);
    let b = ridge_solve(&f, &y, lambda)?;
    model.age_head = (0..=d).map(|j| b[(j, 0)] as f32 as f64).collect();
    Ok(())
}

/// One-vs-rest logistic regression of the key expression on whitened codes.
fn fit_expression_heads(model: &mut DetailModel, whitened: &[Vec<f64>], samples: &[&CorpusSample]) {
    let d = model.d;
    for k in 0..model.n_key {
        let labels: Vec<f64> = samples.iter().map(|s| if s.key_expression == k { 1.0 } else { 0.0 }).collect();
        let w = fit_logistic(whitened, &labels);
        model.exp_heads[k * (d + 1)..(k + 1) * (d + 1)].copy_from_slice(&w);
    }
}

/// Logistic regression with targets in `[0, 1]` by Newton iterations with a
/// small ridge on the weights; returns `[weights, bias]` rounded to f32.
fn fit_logistic(x: &[Vec<f64>], targets: &[f64]) -> Vec<f64> {
    const ITERATIONS: usize = 25;
    const RIDGE: f64 = 1e-3;
    let d = x[0].len();
    let n = x.len() as f64;
    let mut w = DVector::zeros(d + 1);
    let row = |z: &Vec<f64>| DVector::from_iterator(d + 1, z.iter().copied().chain(std::iter::once(1.0)));
    for _ in 0..ITERATIONS {
        let mut g = DVector::zeros(d + 1);
        let mut h = DMatrix::zeros(d + 1, d + 1);
        for (z, y) in x.iter().zip(targets) {
            let f = row(z);
            let p = sigmoid(f.dot(&w));
            g.axpy(p - y, &f, 1.0);
            h.ger(p * (1.0 - p) / n, &f, &f, 1.0);
        }
        g /= n;
        for j in 0..d {
            g[j] += RIDGE * w[j];
            h[(j, j)] += RIDGE;
        }
        h[(d, d)] += 1e-9;
        let Some(step) = h.cholesky().map(|c| c.solve(&g)) else { break };
        w -= step;
        if g.norm() < 1e-10 {
            break;
        }
    }
    let mut w: Vec<f64> = w.iter().copied().collect();
    to_f32(&mut w);
    w
}

/// Least-squares fit of the whitened code change between same-subject
/// samples on `[code, target expression, 1]`, installed as the linear skip.
fn warm_start_expression(model: &mut DetailModel, whitened: &[Vec<f64>], samples: &[&CorpusSample], lambda: f64) -> Result<()> {
    let (d, n_e) = (model.d, model.n_e);
    let mut pairs = Vec::new();
    for i in 0..samples.len() {
        for j in 0..samples.len() {
            if i != j && samples[i].subject_id == samples[j].subject_id {
                pairs.push((i, j));
            }
        }
    }
    if pairs.is_empty() {
        log::warn!("no same-subject pairs; expression module left at zero");
        return Ok(());
    }
    // Source expression read out of the code, either affinely or through
    // per-blendshape logistic units, whichever fits the training set better.
    let zf = DMatrix::from_fn(samples.len(), d + 1, |r, c| if c < d { whitened[r][c] } else { 1.0 });
    let ef = DMatrix::from_fn(samples.len(), n_e, |r, c| samples[r].sample.expression[c]);
    let linear = ridge_solve(&zf, &ef, lambda)?;
    let linear_estimate: Vec<Vec<f64>> = (0..samples.len())
        .map(|r| (0..n_e).map(|c| (0..=d).map(|k| zf[(r, k)] * linear[(k, c)]).sum()).collect())
        .collect();
    let logistic: Vec<Vec<f64>> = (0..n_e)
        .map(|c| fit_logistic(whitened, &samples.iter().map(|s| s.sample.expression[c]).collect::<Vec<_>>()))
        .collect();
    let logistic_estimate: Vec<Vec<f64>> = whitened.iter().map(|z| logistic.iter().map(|w| sigmoid(dot(&w[..d], z) + w[d])).collect()).collect();
    let sq_err = |est: &[Vec<f64>]| -> f64 {
        est.iter().zip(samples).map(|(e, s)| e.iter().zip(&s.sample.expression).map(|(a, b)| (a - b).powi(2)).sum::<f64>()).sum()
    };
    log::debug!("expression read-out squared error: affine {:.4}, logistic {:.4}", sq_err(&linear_estimate) / samples.len() as f64, sq_err(&logistic_estimate) / samples.len() as f64);
    let use_logistic = model.t_exp.hidden_dim() >= n_e && sq_err(&logistic_estimate) < sq_err(&linear_estimate);
    let estimate = if use_logistic { &logistic_estimate } else { &linear_estimate };

    // Code change as a linear map of the expression change.
    let f = DMatrix::from_fn(pairs.len(), n_e, |r, c| {
        let (i, j) = pairs[r];
        samples[j].sample.expression[c] - estimate[i][c]
    });
    let y = DMatrix::from_fn(pairs.len(), d, |r, c| {
        let (i, j) = pairs[r];
        whitened[j][c] - whitened[i][c]
    });
    let m = ridge(&f, &y, lambda, n_e)?;
    let input = d + n_e;
    let mut skip = vec![0.0; d * input];
    let mut bias = vec![0.0; d];
    for k in 0..d {
        for c in 0..n_e {
            skip[k * input + d + c] = m[(c, k)];
        }
    }
    if use_logistic {
        // sigmoid(x) = (tanh(x / 2) + 1) / 2
        for (c, w) in logistic.iter().enumerate() {
            let mut w_in: Vec<f64> = w[..d].iter().map(|v| v / 2.0).collect();
            w_in.resize(input, 0.0);
            let w_out: Vec<f64> = (0..d).map(|k| -m[(c, k)] / 2.0).collect();
            model.t_exp.set_hidden_unit(c, &w_in, w[d] / 2.0, &w_out);
            bias.iter_mut().zip(&w_out).for_each(|(b, o)| *b += o);
        }
    } else {
        for k in 0..d {
            for c in 0..n_e {
                for i in 0..d {
                    skip[k * input + i] -= m[(c, k)] * linear[(i, c)];
                }
                bias[k] -= m[(c, k)] * linear[(d, c)];
            }
        }
    }
    model.t_exp.set_linear(&skip, &bias);
    Ok(())
}

/// Rescales the least-squares expression edit to minimize the edit
/// reconstruction loss on training pairs (golden-section search on `[0, 1.5]`).
fn scale_expression_edit(model: &mut DetailModel, samples: &[&CorpusSample], weights: &LossWeights, fx: &dyn FeatureExtractor, cfg: &TrainConfig) -> Result<()> {
    let idx = objectives::sample_training_items(samples, 4 * cfg.eval_items, &mut seeded(cfg.seed, STREAM_LINE_SEARCH));
    let pairs: Vec<_> = idx.iter().map(|i| (&samples[i.x].sample, &samples[i.x_exp].sample)).collect();
    let base = model.t_exp.clone();
    let mut loss_at = |s: f64| -> Result<f64> {
        model.t_exp = base.clone();
        model.t_exp.scale_output(s);
        objectives::expression_edit_loss(model, &pairs, weights, fx)
    };
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0, 1.5);
    let (mut a, mut b) = (hi - ratio * (hi - lo), lo + ratio * (hi - lo));
    let (mut fa, mut fb) = (loss_at(a)?, loss_at(b)?);
    while hi - lo > 1e-6 {
        if fa <= fb {
            hi = b;
            (b, fb) = (a, fa);
            a = hi - ratio * (hi - lo);
            fa = loss_at(a)?;
        } else {
            lo = a;
            (a, fa) = (b, fb);
            b = lo + ratio * (hi - lo);
            fb = loss_at(b)?;
        }
    }
    let best = (lo + hi) / 2.0;
    log::debug!("expression edit scale {best:.3}");
    model.t_exp = base;
    model.t_exp.scale_output(best);
    Ok(())
}

/// Moves codes along the population aging direction until the age head
/// reads the target age, installed as the linear skip.
fn warm_start_age(model: &mut DetailModel, whitened: &[Vec<f64>], ages: &[f64]) {
    let d = model.d;
    let n = ages.len() as f64;
    let mean_age = ages.iter().sum::<f64>() / n;
    let var_age: f64 = ages.iter().map(|a| (a - mean_age).powi(2)).sum();
    if var_age == 0.0 {
        log::warn!("all training ages equal; age module left at zero");
        return;
    }
    let mut mean_z = vec![0.0; d];
    for z in whitened {
        mean_z.iter_mut().zip(z).for_each(|(m, v)| *m += v / n);
    }
    let mut dir = vec![0.0; d];
    for (z, a) in whitened.iter().zip(ages) {
        for k in 0..d {
            dir[k] += (z[k] - mean_z[k]) * (a - mean_age) / var_age;
        }
    }
    let head = &model.age_head[..d];
    let gain = dot(head, &dir);
    if gain.abs() < 1e-9 {
        log::warn!("age head is insensitive to the aging direction; age module left at zero");
        return;
    }
    let v: Vec<f64> = dir.iter().map(|x| x / gain).collect();
    let c = model.age_head[d];
    let input = d + 1;
    let mut skip = vec![0.0; d * input];
    for k in 0..d {
        for i in 0..d {
            skip[k * input + i] = -v[k] * head[i];
        }
        skip[k * input + d] = v[k] * AGE_SPAN;
    }
    let bias: Vec<f64> = v.iter().map(|vk| vk * (AGE_CENTER - c)).collect();
    model.t_age.set_linear(&skip, &bias);
}

/// Alternates logistic-critic updates with module updates that add the
/// non-saturating adversarial loss of the expression and age edits.
fn adversarial_stage(model: &mut DetailModel, samples: &[&CorpusSample], weights: &LossWeights, cfg: &TrainConfig) -> Result<()> {
    let fx = ReferenceExtractor::default();
    let mut rng = seeded(cfg.seed, STREAM_ADVERSARIAL);
    let mut critic = LogisticCritic::new(model.n_key, model.n_age, &mut rng);
    let mut vel_exp = vec![0.0; model.t_exp.params().len()];
    let mut vel_age = vec![0.0; model.t_age.params().len()];
    for step in 0..cfg.adversarial_steps {
        let idx: Vec<ItemIndices> = objectives::sample_training_items(samples, cfg.batch_size, &mut rng);
        let items: Vec<TrainingItem<'_>> = idx.iter().map(|i| i.resolve(samples)).collect();

        let fakes = objectives::fake_rasters(model, &items)?;
        let reals: Vec<(Grid, Grid)> = items.iter().map(|it| model.split_normalized(&model.normalized(it.x.disp.grid(), it.x.df.grid()))).collect();
        let mut real_set = Vec::new();
        let mut fake_set = Vec::new();
        for ((it, f), r) in items.iter().zip(&fakes).zip(&reals) {
            let (e, a) = (model.nearest_key(&it.x.expression), age_group(it.x.age));
            let (e_t, a_t) = (model.nearest_key(&it.x_exp.expression), age_group(it.target_age));
            real_set.push((RasterPair::new(&r.0, &r.1), e, a));
            let labels = [(e, a), (e_t, a), (e, a_t), (e, a)];
            for (raster, (le, la)) in f.iter().zip(labels) {
                fake_set.push((RasterPair::new(&raster.0, &raster.1), le, la));
            }
        }
        let critic_loss = critic.train_step(&real_set, &fake_set, cfg.critic_learning_rate, 1e-4);

        let g = objectives::module_gradients(model, &items, weights, &fx)?;
        let (ga_exp, ga_age) = objectives::adversarial_module_gradients(model, &items, &critic)?;
        let g_exp: Vec<f64> = g.expression.iter().zip(&ga_exp).map(|(a, b)| a + weights.lambda_gan * b).collect();
        let g_age: Vec<f64> = g
            .cycle
            .iter()
            .zip(&g.age_target)
            .zip(&ga_age)
            .map(|((c, t), adv)| weights.lambda_cyc * c + t + weights.lambda_gan * adv)
            .collect();
        momentum_step(model.t_exp.params_mut(), &mut vel_exp, &g_exp, cfg)?;
        momentum_step(model.t_age.params_mut(), &mut vel_age, &g_age, cfg)?;
        if !critic_loss.is_finite() {
            return Err(Error::Training(format!("critic loss non-finite at adversarial step {step}")));
        }
    }
    Ok(())
}
