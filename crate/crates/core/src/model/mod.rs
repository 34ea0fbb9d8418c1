//! Joint latent detail model: a linear encoder/generator pair over normalized
//! (displacement, distance field) rasters, plus latent transformation modules
//! for expression and age and small attribute heads.

mod file;
mod objectives;
mod pca;
mod train;
mod transform;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{truncation_for, DisplacementMap, DistanceField, Grid, JointSample, NormStats, MAX_AGE, MIN_AGE};
use crate::synth::{key_expressions, nearest_key_expression, CorpusConfig, AGE_GROUPS};

pub use file::{FORMAT_VERSION, MAGIC};
pub use objectives::{
    sample_training_items, stage_b_gradients, structure_loss_grad, training_step_losses, ItemIndices, LossBreakdown,
    StageBGradients, TrainingItem,
};
pub use train::{evaluate_split_losses, CurvePoint, TrainConfig};
pub use transform::{ForwardCache, TransformModule};

use transform::dot;

/// Age is fed to the age module as `(a - AGE_CENTER) / AGE_SPAN`.
pub const AGE_CENTER: f64 = 0.5 * (MIN_AGE + MAX_AGE);
pub const AGE_SPAN: f64 = 0.5 * (MAX_AGE - MIN_AGE);

/// A point in the model's latent space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatentCode(Vec<f64>);

impl LatentCode {
    pub fn new(z: Vec<f64>) -> Result<Self> {
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("latent code has non-finite entries".into()));
        }
        Ok(LatentCode(z))
    }

    pub fn zeros(d: usize) -> Self {
        LatentCode(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Unclamped generator output in raster units.
#[derive(Clone, Debug, PartialEq)]
pub struct RawRasters {
    pub disp: Grid,
    pub df: Grid,
}

/// Which transformation module.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    Expression,
    Age,
}

/// Provenance and training record stored with a model.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub crate_version: String,
    pub train_config: Option<TrainConfig>,
    pub corpus: Option<CorpusConfig>,
    pub train_samples: usize,
    /// Fraction of training variance captured by the basis.
    pub explained_variance: f64,
    /// Largest distance-field reconstruction loss over the training samples.
    pub reconstruction_df_bound: f64,
    pub age_head_rmse: f64,
    /// Mean losses on the training split's evaluation batch after fitting.
    pub final_losses: Option<LossBreakdown>,
    pub expression_curve: Vec<CurvePoint>,
    pub age_curve: Vec<CurvePoint>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetailModel {
    resolution: usize,
    n_e: usize,
    n_key: usize,
    n_age: usize,
    d: usize,
    norm: NormStats,
    /// Normalized mean, displacement pixels then distance pixels.
    mean: Vec<f64>,
    /// `d` orthonormal columns of length `2 * resolution^2`, stored one after
    /// another.
    basis: Vec<f64>,
    /// Inverse Gram matrix of the stored basis; identity up to float32
    /// rounding.
    gram_inv: Vec<f64>,
    latent_std: Vec<f64>,
    /// Affine age estimate over whitened codes: `d` weights then a bias.
    age_head: Vec<f64>,
    /// One logistic head per key expression, laid out like `age_head`.
    exp_heads: Vec<f64>,
    t_exp: TransformModule,
    t_age: TransformModule,
    pub metadata: ModelMetadata,
}

/// Model parameters before the derived quantities are computed.
pub(crate) struct ModelParts {
    pub resolution: usize,
    pub n_e: usize,
    pub n_key: usize,
    pub n_age: usize,
    pub norm: NormStats,
    pub mean: Vec<f64>,
    pub basis: Vec<f64>,
    pub latent_std: Vec<f64>,
    pub age_head: Vec<f64>,
    pub exp_heads: Vec<f64>,
    pub t_exp: TransformModule,
    pub t_age: TransformModule,
    pub metadata: ModelMetadata,
}

impl DetailModel {
    pub(crate) fn from_parts(p: ModelParts) -> Result<Self> {
        let plen = 2 * p.resolution * p.resolution;
        let d = p.latent_std.len();
        let checks = [
            ("mean", plen, p.mean.len()),
            ("basis", plen * d, p.basis.len()),
            ("age head", d + 1, p.age_head.len()),
            ("expression heads", p.n_key * (d + 1), p.exp_heads.len()),
            ("expression module input", d + p.n_e, p.t_exp.input_dim()),
            ("expression module output", d, p.t_exp.output_dim()),
            ("age module input", d + 1, p.t_age.input_dim()),
            ("age module output", d, p.t_age.output_dim()),
        ];
        for (what, expected, found) in checks {
            if expected != found {
                return Err(Error::DimensionMismatch { what, expected, found });
            }
        }
        if d == 0 {
            return Err(Error::InvalidInput("model has an empty basis".into()));
        }
        let gram = DMatrix::from_fn(d, d, |i, j| dot(&p.basis[i * plen..(i + 1) * plen], &p.basis[j * plen..(j + 1) * plen]));
        let gram_inv = gram
            .try_inverse()
            .ok_or_else(|| Error::CorruptModel("basis is not linearly independent".into()))?;
        Ok(DetailModel {
            resolution: p.resolution,
            n_e: p.n_e,
            n_key: p.n_key,
            n_age: p.n_age,
            d,
            norm: p.norm,
            mean: p.mean,
            basis: p.basis,
            gram_inv: gram_inv.as_slice().to_vec(),
            latent_std: p.latent_std,
            age_head: p.age_head,
            exp_heads: p.exp_heads,
            t_exp: p.t_exp,
            t_age: p.t_age,
            metadata: p.metadata,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.d
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn n_e(&self) -> usize {
        self.n_e
    }

    pub fn n_key(&self) -> usize {
        self.n_key
    }

    pub fn n_age(&self) -> usize {
        self.n_age
    }

    pub fn norm_stats(&self) -> NormStats {
        self.norm
    }

    pub fn truncation(&self) -> f64 {
        truncation_for(self.resolution)
    }

    pub fn latent_std(&self) -> &[f64] {
        &self.latent_std
    }

    fn pixels(&self) -> usize {
        self.resolution * self.resolution
    }

    fn column(&self, k: usize) -> &[f64] {
        let n = 2 * self.pixels();
        &self.basis[k * n..(k + 1) * n]
    }

    /// Basis vector `k` as (displacement, distance) halves, normalized units.
    pub fn basis_vector(&self, k: usize) -> (&[f64], &[f64]) {
        self.column(k).split_at(self.pixels())
    }

    pub fn transform(&self, kind: TransformKind) -> &TransformModule {
        match kind {
            TransformKind::Expression => &self.t_exp,
            TransformKind::Age => &self.t_age,
        }
    }

    pub fn transform_mut(&mut self, kind: TransformKind) -> &mut TransformModule {
        match kind {
            TransformKind::Expression => &mut self.t_exp,
            TransformKind::Age => &mut self.t_age,
        }
    }

    fn check_resolution(&self, width: usize) -> Result<()> {
        if width != self.resolution {
            return Err(Error::shape(format!("{0}x{0}", self.resolution), format!("{0}x{0}", width)));
        }
        Ok(())
    }

    fn check_code(&self, z: &LatentCode) -> Result<()> {
        if z.dim() != self.d {
            return Err(Error::DimensionMismatch { what: "latent code", expected: self.d, found: z.dim() });
        }
        if z.0.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("latent code has non-finite entries".into()));
        }
        Ok(())
    }

    /// Normalized joint vector of a raster pair.
    pub(crate) fn normalized(&self, disp: &Grid, df: &Grid) -> Vec<f64> {
        let (sd, ss) = (1.0 / self.norm.disp_std, 1.0 / self.norm.df_std);
        disp.data().iter().map(|v| v * sd).chain(df.data().iter().map(|v| v * ss)).collect()
    }

    /// `C W^T (x - mu)` with `C` the inverse basis Gram matrix.
    pub(crate) fn encode_normalized(&self, x: &[f64]) -> Vec<f64> {
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        let proj = self.project(&centered);
        (0..self.d).map(|i| (0..self.d).map(|j| self.gram_inv[i + j * self.d] * proj[j]).sum()).collect()
    }

    /// `W^T g`.
    pub(crate) fn project(&self, g: &[f64]) -> Vec<f64> {
        (0..self.d).map(|k| dot(self.column(k), g)).collect()
    }

    /// `W^T g` using only the distance-field half.
    pub(crate) fn project_df(&self, g: &[f64]) -> Vec<f64> {
        (0..self.d).map(|k| dot(self.basis_vector(k).1, g)).collect()
    }

    /// `mu + W z` in normalized units.
    pub(crate) fn generate_normalized(&self, z: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (k, &zk) in z.iter().enumerate() {
            if zk != 0.0 {
                out.iter_mut().zip(self.column(k)).for_each(|(o, w)| *o += zk * w);
            }
        }
        out
    }

    /// Distance-field half of `mu + W z`, normalized units.
    pub(crate) fn generate_df_normalized(&self, z: &[f64]) -> Vec<f64> {
        let p = self.pixels();
        let mut out = self.mean[p..].to_vec();
        for (k, &zk) in z.iter().enumerate() {
            if zk != 0.0 {
                out.iter_mut().zip(self.basis_vector(k).1).for_each(|(o, w)| *o += zk * w);
            }
        }
        out
    }

    pub(crate) fn split_normalized(&self, v: &[f64]) -> (Grid, Grid) {
        let p = self.pixels();
        let r = self.resolution;
        (
            Grid::from_vec(r, r, v[..p].to_vec()).expect("length checked"),
            Grid::from_vec(r, r, v[p..].to_vec()).expect("length checked"),
        )
    }

    pub fn encode(&self, sample: &JointSample) -> Result<LatentCode> {
        self.encode_rasters(sample.disp.grid(), sample.df.grid())
    }

    /// Encodes a displacement map together with a distance field that may
    /// come from another source.
    pub fn encode_rasters(&self, disp: &Grid, df: &Grid) -> Result<LatentCode> {
        self.check_resolution(disp.width())?;
        if !disp.same_shape(df) || disp.width() != disp.height() {
            return Err(Error::shape(format!("{0}x{0}", self.resolution), format!("{}x{}", df.width(), df.height())));
        }
        LatentCode::new(self.encode_normalized(&self.normalized(disp, df)))
    }

    /// Generator output in raster units, without clamping.
    pub fn generate_raw(&self, z: &LatentCode) -> Result<RawRasters> {
        self.check_code(z)?;
        let v = self.generate_normalized(&z.0);
        let (d, s) = self.split_normalized(&v);
        Ok(RawRasters { disp: d.map(|x| x * self.norm.disp_std), df: s.map(|x| x * self.norm.df_std) })
    }

    /// Generator output with the distance field clamped to `[0, delta]`.
    pub fn decode(&self, z: &LatentCode) -> Result<(DisplacementMap, DistanceField)> {
        let raw = self.generate_raw(z)?;
        Ok((DisplacementMap::new(raw.disp)?, DistanceField::clamped(raw.df, self.truncation())))
    }

    /// [`DetailModel::decode`] packaged with annotations.
    pub fn decode_sample(&self, z: &LatentCode, expression: Vec<f64>, age: f64) -> Result<JointSample> {
        let (disp, df) = self.decode(z)?;
        JointSample::new(disp, df, expression, age)
    }

    pub(crate) fn whiten(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.latent_std).map(|(v, s)| v / s).collect()
    }

    pub(crate) fn expression_input(&self, z: &[f64], e: &[f64]) -> Vec<f64> {
        let mut u = self.whiten(z);
        u.extend_from_slice(e);
        u
    }

    pub(crate) fn age_input(&self, z: &[f64], age: f64) -> Vec<f64> {
        let mut u = self.whiten(z);
        u.push((age - AGE_CENTER) / AGE_SPAN);
        u
    }

    /// `z + sigma * out`, the module output being in whitened units.
    pub(crate) fn add_whitened(&self, z: &[f64], out: &[f64]) -> Vec<f64> {
        z.iter().zip(out).zip(&self.latent_std).map(|((a, o), s)| a + s * o).collect()
    }

    pub(crate) fn check_expression(&self, e: &[f64]) -> Result<()> {
        if e.len() != self.n_e {
            return Err(Error::DimensionMismatch { what: "blendshape weights", expected: self.n_e, found: e.len() });
        }
        if e.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::InvalidInput("blendshape weights must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn check_age(age: f64) -> Result<()> {
        if !(MIN_AGE..=MAX_AGE).contains(&age) {
            return Err(Error::OutOfRange { what: "age", value: age });
        }
        Ok(())
    }

    /// `z + T_exp(z, e)`.
    pub fn transform_expression(&self, z: &LatentCode, target: &[f64]) -> Result<LatentCode> {
        self.check_code(z)?;
        self.check_expression(target)?;
        let out = self.t_exp.apply(&self.expression_input(&z.0, target));
        LatentCode::new(self.add_whitened(&z.0, &out))
    }

    /// `z + T_age(z, a)`.
    pub fn transform_age(&self, z: &LatentCode, target_age: f64) -> Result<LatentCode> {
        self.check_code(z)?;
        Self::check_age(target_age)?;
        let out = self.t_age.apply(&self.age_input(&z.0, target_age));
        LatentCode::new(self.add_whitened(&z.0, &out))
    }

    pub(crate) fn age_of(&self, z: &[f64]) -> f64 {
        let zt = self.whiten(z);
        dot(&self.age_head[..self.d], &zt) + self.age_head[self.d]
    }

    /// Age in years predicted from a code.
    pub fn estimate_age(&self, z: &LatentCode) -> Result<f64> {
        self.check_code(z)?;
        Ok(self.age_of(&z.0))
    }

    /// Per-key-expression probabilities from the logistic heads.
    pub fn expression_probabilities(&self, z: &LatentCode) -> Result<Vec<f64>> {
        self.check_code(z)?;
        let zt = self.whiten(&z.0);
        Ok(self
            .exp_heads
            .chunks(self.d + 1)
            .map(|h| sigmoid(dot(&h[..self.d], &zt) + h[self.d]))
            .collect())
    }

    pub fn key_expressions(&self) -> Vec<Vec<f64>> {
        key_expressions(self.n_key, self.n_e)
    }

    pub fn nearest_key(&self, e: &[f64]) -> usize {
        nearest_key_expression(e, &self.key_expressions())
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Default number of age classes of the critic.
pub const DEFAULT_AGE_CLASSES: usize = AGE_GROUPS;

#[cfg(test)]
mod tests;
