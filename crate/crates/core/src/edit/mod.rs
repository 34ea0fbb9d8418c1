//! Editing sessions over a trained model: wrinkle-line strokes, expression
//! and age edits, undo, and blendshape animation.

use std::sync::Arc;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{structure_loss_grad, DetailModel, LatentCode};
use crate::raster::{DisplacementMap, DistanceField, Grid, JointSample};
use crate::structure::{apply_line_edit, distance_transform, extract_lines, LineEdit, LineMap};
use crate::losses::LossWeights;


/// Line-edit refinement settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EditConfig {
    pub refine_steps: usize,
    pub step_size: f64,
    /// Weight of `|z - z0|^2`, which keeps the edit close to the re-encoded sample.
    pub prior_weight: f64,
}

impl Default for EditConfig {
    fn default() -> Self {
        EditConfig { refine_steps: 50, step_size: 0.1, prior_weight: 0.1 }
    }
}

impl EditConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite() && self.prior_weight >= 0.0 && self.prior_weight.is_finite()) {
            return Err(Error::Config("edit step size must be positive and prior weight non-negative".into()));
        }
        Ok(())
    }
}

/// One recorded edit. Replaying the list from the original sample rebuilds
/// the session.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EditOp {
    Lines { strokes: LineEdit, refine_steps: usize },
    Expression { weights: Vec<f64> },
    Age { age: f64 },
}

#[derive(Clone, Debug, PartialEq)]
struct State {
    code: LatentCode,
    lines: LineMap,
    expression: Vec<f64>,
    age: f64,
}

/// Result of one edit: the decoded sample and its code.
#[derive(Clone, Debug, PartialEq)]
pub struct EditOutput {
    pub sample: JointSample,
    pub code: LatentCode,
}

/// Refinement trace of a line edit. Both values are zero when the edit left
/// the line map unchanged and no refinement ran.
#[derive(Clone, Debug, PartialEq)]
pub struct LineRefinement {
    pub initial_objective: f64,
    pub final_objective: f64,
}

#[derive(Clone, Debug)]
pub struct EditSession {
    model: Arc<DetailModel>,
    config: EditConfig,
    original: JointSample,
    original_lines: LineMap,
    history: Vec<EditOp>,
    states: Vec<State>,
}

impl EditSession {
    pub fn new(model: Arc<DetailModel>, original: JointSample) -> Result<Self> {
        Self::with_config(model, original, EditConfig::default())
    }

    pub fn with_config(model: Arc<DetailModel>, original: JointSample, config: EditConfig) -> Result<Self> {
        if original.resolution() != model.resolution() {
            return Err(Error::shape(format!("{0}x{0}", model.resolution()), format!("{0}x{0}", original.resolution())));
        }
        if original.expression.len() != model.n_e() {
            return Err(Error::DimensionMismatch { what: "blendshape weights", expected: model.n_e(), found: original.expression.len() });
        }
        config.validate()?;
        let original_lines = extract_lines(&original.disp);
        let code = model.encode(&original)?;
        let state = State { code, lines: original_lines.clone(), expression: original.expression.clone(), age: original.age };
        Ok(EditSession { model, config, original, original_lines, history: Vec::new(), states: vec![state] })
    }

    /// Session over a bare displacement map: lines are extracted and the
    /// annotations default to a neutral expression at `age`.
    pub fn from_displacement(model: Arc<DetailModel>, disp: DisplacementMap, age: f64) -> Result<Self> {
        let df = distance_transform(&extract_lines(&disp));
        let sample = JointSample::new(disp, df, vec![0.0; model.n_e()], age)?;
        Self::new(model, sample)
    }

    /// Replaces the refinement settings of a session with no edits yet.
    pub fn with_edit_config(mut self, config: EditConfig) -> Result<Self> {
        config.validate()?;
        if !self.history.is_empty() {
            return Err(Error::InvalidInput("cannot change the edit settings of a session with history".into()));
        }
        self.config = config;
        Ok(self)
    }

    pub fn model(&self) -> &Arc<DetailModel> {
        &self.model
    }

    pub fn config(&self) -> EditConfig {
        self.config
    }

    pub fn original(&self) -> &JointSample {
        &self.original
    }

    pub fn original_lines(&self) -> &LineMap {
        &self.original_lines
    }

    pub fn history(&self) -> &[EditOp] {
        &self.history
    }

    fn current(&self) -> &State {
        self.states.last().expect("initial state")
    }

    pub fn code(&self) -> &LatentCode {
        &self.current().code
    }

    /// Current wrinkle-line map the next line edit starts from.
    pub fn lines(&self) -> &LineMap {
        &self.current().lines
    }

    pub fn expression(&self) -> &[f64] {
        &self.current().expression
    }

    pub fn age(&self) -> f64 {
        self.current().age
    }

    /// Decoded current sample.
    pub fn current_sample(&self) -> Result<JointSample> {
        let s = self.current();
        self.model.decode_sample(&s.code, s.expression.clone(), s.age)
    }

    /// Applies `edit` to the current line map, re-encodes the original
    /// displacement with the edited distance field and refines the code.
    pub fn edit_lines(&mut self, edit: &LineEdit, refine_steps: usize) -> Result<EditOutput> {
        let (state, _) = self.lines_state(edit, refine_steps)?;
        self.push(EditOp::Lines { strokes: edit.clone(), refine_steps }, state)
    }

    /// Like [`EditSession::edit_lines`] but also reports the refinement
    /// objective before and after.
    pub fn edit_lines_traced(&mut self, edit: &LineEdit, refine_steps: usize) -> Result<(EditOutput, LineRefinement)> {
        let (state, trace) = self.lines_state(edit, refine_steps)?;
        Ok((self.push(EditOp::Lines { strokes: edit.clone(), refine_steps }, state)?, trace))
    }

    pub fn edit_expression(&mut self, weights: &[f64]) -> Result<EditOutput> {
        let state = self.expression_state(weights)?;
        self.push(EditOp::Expression { weights: weights.to_vec() }, state)
    }

    pub fn edit_age(&mut self, age: f64) -> Result<EditOutput> {
        let state = self.age_state(age)?;
        self.push(EditOp::Age { age }, state)
    }

    /// Applies a recorded edit.
    pub fn apply(&mut self, op: &EditOp) -> Result<EditOutput> {
        match op {
            EditOp::Lines { strokes, refine_steps } => self.edit_lines(strokes, *refine_steps),
            EditOp::Expression { weights } => self.edit_expression(weights),
            EditOp::Age { age } => self.edit_age(*age),
        }
    }

    /// Drops the last edit. Returns `false` when there is nothing to undo.
    pub fn undo(&mut self) -> bool {
        if self.history.pop().is_none() {
            return false;
        }
        self.states.pop();
        true
    }

    /// Rebuilds the session by replaying its history from the original.
    pub fn replay(&self) -> Result<EditSession> {
        let mut s = EditSession::with_config(self.model.clone(), self.original.clone(), self.config)?;
        for op in &self.history {
            s.apply(op)?;
        }
        Ok(s)
    }

    fn push(&mut self, op: EditOp, state: State) -> Result<EditOutput> {
        let sample = self.model.decode_sample(&state.code, state.expression.clone(), state.age)?;
        let code = state.code.clone();
        self.history.push(op);
        self.states.push(state);
        Ok(EditOutput { sample, code })
    }

    fn expression_state(&self, weights: &[f64]) -> Result<State> {
        let cur = self.current();
        let code = self.model.transform_expression(&cur.code, weights)?;
        Ok(State { code, lines: cur.lines.clone(), expression: weights.to_vec(), age: cur.age })
    }

    fn age_state(&self, age: f64) -> Result<State> {
        let cur = self.current();
        let code = self.model.transform_age(&cur.code, age)?;
        Ok(State { code, lines: cur.lines.clone(), expression: cur.expression.clone(), age })
    }

    fn lines_state(&self, edit: &LineEdit, refine_steps: usize) -> Result<(State, LineRefinement)> {
        let cur = self.current();
        let lines = apply_line_edit(&cur.lines, edit)?;
        if lines == cur.lines {
            // Nothing to re-encode; the code stays as it is.
            let trace = LineRefinement { initial_objective: 0.0, final_objective: 0.0 };
            return Ok((State { lines, ..cur.clone() }, trace));
        }
        let target = distance_transform(&lines);
        let (code, trace) = refine_lines(&self.model, self.original.disp.grid(), &target, refine_steps, &self.config)?;
        Ok((State { code, lines, expression: cur.expression.clone(), age: cur.age }, trace))
    }

    /// Frames of a blendshape animation. Each frame transforms the session's
    /// original code with linearly interpolated weights.
    pub fn animate(&self, keyframes: &[Keyframe], fps: f64) -> Result<Vec<DisplacementMap>> {
        let base = &self.states[0].code;
        animation_weights(keyframes, fps, self.model.n_e())?
            .iter()
            .map(|w| Ok(self.model.decode(&self.model.transform_expression(base, w)?)?.0))
            .collect()
    }

    pub fn export(&self) -> SessionDocument {
        SessionDocument {
            format: SESSION_FORMAT.into(),
            resolution: self.original.resolution(),
            original: SampleDocument::of(&self.original),
            config: self.config,
            history: self.history.clone(),
        }
    }

    /// Rebuilds a session from an exported document by replaying its history.
    pub fn import(model: Arc<DetailModel>, doc: &SessionDocument) -> Result<Self> {
        if doc.format != SESSION_FORMAT {
            return Err(Error::InvalidInput(format!("unknown session format {:?}", doc.format)));
        }
        let original = doc.original.to_sample(doc.resolution)?;
        let mut s = EditSession::with_config(model, original, doc.config)?;
        for op in &doc.history {
            s.apply(op)?;
        }
        Ok(s)
    }
}

/// `lambda_df * l_df(G(z).df, target) + prior * |z - z0|^2` and its gradient.
fn line_objective(model: &DetailModel, z: &[f64], z0: &[f64], target: &Grid, weights: &LossWeights, prior: f64) -> Result<(f64, Vec<f64>)> {
    let (v, mut g) = structure_loss_grad(model, z, target, weights)?;
    let mut reg = 0.0;
    for ((gi, zi), z0i) in g.iter_mut().zip(z).zip(z0) {
        reg += (zi - z0i).powi(2);
        *gi += 2.0 * prior * (zi - z0i);
    }
    Ok((v + prior * reg, g))
}

/// Gradient descent from `encode(disp, target)`. A step that would raise the
/// objective is halved until it does not, so the objective never increases.
pub fn refine_lines(model: &DetailModel, disp: &Grid, target: &DistanceField, steps: usize, cfg: &EditConfig) -> Result<(LatentCode, LineRefinement)> {
    let z0 = model.encode_rasters(disp, target.grid())?.into_vec();
    let weights = LossWeights::for_resolution(model.resolution());
    let mut z = z0.clone();
    let (mut f, mut g) = line_objective(model, &z, &z0, target.grid(), &weights, cfg.prior_weight)?;
    let initial = f;
    for _ in 0..steps {
        let mut step = cfg.step_size;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = z.iter().zip(&g).map(|(zi, gi)| zi - step * gi).collect();
            let (ft, gt) = line_objective(model, &trial, &z0, target.grid(), &weights, cfg.prior_weight)?;
            if ft <= f {
                (z, f, g) = (trial, ft, gt);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok((LatentCode::new(z)?, LineRefinement { initial_objective: initial, final_objective: f }))
}

/// Animation key: blendshape weights at a time in seconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Keyframe {
    pub time: f64,
    pub weights: Vec<f64>,
}

/// Per-frame blendshape weights: `round((t_last - t_first) * fps) + 1`
/// frames, linearly interpolated between keys.
pub fn animation_weights(keyframes: &[Keyframe], fps: f64, n_e: usize) -> Result<Vec<Vec<f64>>> {
    let (first, last) = match (keyframes.first(), keyframes.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::InvalidInput("animation needs at least one keyframe".into())),
    };
    if !(fps > 0.0 && fps.is_finite()) {
        return Err(Error::InvalidInput(format!("fps must be positive, got {fps}")));
    }
    for k in keyframes {
        if k.weights.len() != n_e {
            return Err(Error::DimensionMismatch { what: "blendshape weights", expected: n_e, found: k.weights.len() });
        }
        if !k.time.is_finite() || k.weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::InvalidInput("keyframe times must be finite and weights in [0, 1]".into()));
        }
    }
    if keyframes.windows(2).any(|w| w[1].time <= w[0].time) {
        return Err(Error::InvalidInput("keyframe times must be strictly increasing".into()));
    }
    let frames = ((last.time - first.time) * fps).round() as usize + 1;
    let mut out = Vec::with_capacity(frames);
    let mut seg = 0;
    for i in 0..frames {
        let t = (first.time + i as f64 / fps).min(last.time);
        while seg + 2 < keyframes.len() && t > keyframes[seg + 1].time {
            seg += 1;
        }
        let w = if keyframes.len() == 1 {
            first.weights.clone()
        } else {
            let (a, b) = (&keyframes[seg], &keyframes[seg + 1]);
            let s = ((t - a.time) / (b.time - a.time)).clamp(0.0, 1.0);
            a.weights.iter().zip(&b.weights).map(|(x, y)| x + s * (y - x)).collect()
        };
        out.push(w);
    }
    Ok(out)
}

pub const SESSION_FORMAT: &str = "semm-session/1";

/// Exported session: the original sample and its edit history.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionDocument {
    pub format: String,
    pub resolution: usize,
    pub original: SampleDocument,
    pub config: EditConfig,
    pub history: Vec<EditOp>,
}

/// A joint sample with rasters stored exactly as base64 little-endian f64.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleDocument {
    pub disp_f64: String,
    pub df_f64: String,
    pub truncation: f64,
    pub expression: Vec<f64>,
    pub age: f64,
}

fn pack(values: &[f64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    B64.encode(bytes)
}

fn unpack(text: &str, len: usize) -> Result<Vec<f64>> {
    let bytes = B64.decode(text).map_err(|e| Error::InvalidInput(format!("raster payload: {e}")))?;
    if bytes.len() != len * 8 {
        return Err(Error::InvalidInput(format!("raster payload holds {} bytes, expected {}", bytes.len(), len * 8)));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
}

impl SampleDocument {
    pub fn of(s: &JointSample) -> Self {
        SampleDocument {
            disp_f64: pack(s.disp.values()),
            df_f64: pack(s.df.values()),
            truncation: s.df.truncation(),
            expression: s.expression.clone(),
            age: s.age,
        }
    }

    pub fn to_sample(&self, resolution: usize) -> Result<JointSample> {
        let n = resolution * resolution;
        let disp = DisplacementMap::new(Grid::from_vec(resolution, resolution, unpack(&self.disp_f64, n)?)?)?;
        let df = DistanceField::with_truncation(Grid::from_vec(resolution, resolution, unpack(&self.df_f64, n)?)?, self.truncation)?;
        JointSample::new(disp, df, self.expression.clone(), self.age)
    }
}
