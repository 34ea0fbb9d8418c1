//! Held-out statistics of a trained model on a synthetic corpus.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::edit::{EditConfig, EditSession, Keyframe};
use crate::error::{Error, Result};
use crate::losses::perceptual_detail_distance;
use crate::mesh::{apply_displacement, bake_displacement, subdivide_midpoint, uv_sphere, Vec3};
use crate::model::{DetailModel, LatentCode};
use crate::raster::{DisplacementMap, MAX_AGE, MIN_AGE};
use crate::structure::{chamfer, extract_lines, rasterize_polyline, LineEdit, Stroke};
use crate::synth::{Corpus, CorpusSample, Split};

/// Orders the pixels of a thin component into a walk: starts at an end
/// (fewest 8-neighbours) and steps to the nearest unvisited pixel.
fn trace_component(comp: &[(usize, usize)]) -> Vec<[f64; 2]> {
    let near = |a: (usize, usize), b: (usize, usize)| a.0.abs_diff(b.0).max(a.1.abs_diff(b.1));
    let degree = |p: (usize, usize)| comp.iter().filter(|&&q| q != p && near(p, q) == 1).count();
    let mut left: Vec<(usize, usize)> = comp.to_vec();
    let start = (0..left.len()).min_by_key(|&i| degree(left[i])).unwrap_or(0);
    let mut cur = left.swap_remove(start);
    let mut out = vec![[cur.0 as f64, cur.1 as f64]];
    while !left.is_empty() {
        let d2 = |q: (usize, usize)| (q.0 as f64 - cur.0 as f64).powi(2) + (q.1 as f64 - cur.1 as f64).powi(2);
        let i = (0..left.len()).min_by(|&a, &b| d2(left[a]).total_cmp(&d2(left[b]))).expect("non-empty");
        cur = left.swap_remove(i);
        out.push([cur.0 as f64, cur.1 as f64]);
    }
    out
}

fn non_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] >= w[0])
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

fn fraction(hits: usize, total: usize) -> f64 {
    if total == 0 {
        f64::NAN
    } else {
        hits as f64 / total as f64
    }
}

fn recon(model: &DetailModel, z: &LatentCode) -> Result<DisplacementMap> {
    Ok(model.decode(z)?.0)
}

fn test_subjects(corpus: &Corpus) -> BTreeMap<u32, Vec<&CorpusSample>> {
    let mut by: BTreeMap<u32, Vec<&CorpusSample>> = BTreeMap::new();
    for s in corpus.split(Split::Test) {
        by.entry(s.subject_id).or_default().push(s);
    }
    by
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpressionReport {
    pub subjects: usize,
    pub pairs: usize,
    /// Pairs where the edit is closer to the target sample than the plain
    /// reconstruction.
    pub wins: usize,
    pub win_fraction: f64,
    pub median_cross_distance: f64,
    /// Mean distance between a self-targeted edit and the reconstruction,
    /// over the median cross-expression distance.
    pub self_edit_ratio: f64,
    /// Mean distance after editing away and back, over the median
    /// cross-expression distance.
    pub round_trip_ratio: f64,
}

/// Same-subject expression pairs of the test split.
pub fn expression_report(model: &DetailModel, corpus: &Corpus) -> Result<ExpressionReport> {
    let subjects = test_subjects(corpus);
    let (mut wins, mut pairs) = (0, 0);
    let mut cross = Vec::new();
    let mut self_moves = Vec::new();
    let mut round_trips = Vec::new();
    for samples in subjects.values() {
        let codes: Vec<LatentCode> = samples.iter().map(|s| model.encode(&s.sample)).collect::<Result<_>>()?;
        let rs: Vec<DisplacementMap> = codes.iter().map(|z| recon(model, z)).collect::<Result<_>>()?;
        for (i, a) in samples.iter().enumerate() {
            for (j, b) in samples.iter().enumerate() {
                if i == j {
                    continue;
                }
                let edited = recon(model, &model.transform_expression(&codes[i], &b.sample.expression)?)?;
                let d_edit = perceptual_detail_distance(&edited, &b.sample.disp)?;
                let d_rec = perceptual_detail_distance(&rs[i], &b.sample.disp)?;
                pairs += 1;
                wins += usize::from(d_edit < d_rec);
                cross.push(perceptual_detail_distance(&a.sample.disp, &b.sample.disp)?);
            }
            let own = recon(model, &model.transform_expression(&codes[i], &a.sample.expression)?)?;
            self_moves.push(perceptual_detail_distance(&own, &rs[i])?);
            let other = &samples[(i + 1) % samples.len()].sample.expression;
            let away = model.transform_expression(&codes[i], other)?;
            let back = recon(model, &model.transform_expression(&away, &a.sample.expression)?)?;
            round_trips.push(perceptual_detail_distance(&back, &rs[i])?);
        }
    }
    let med = median(cross);
    Ok(ExpressionReport {
        subjects: subjects.len(),
        pairs,
        wins,
        win_fraction: fraction(wins, pairs),
        median_cross_distance: med,
        self_edit_ratio: mean(&self_moves) / med,
        round_trip_ratio: mean(&round_trips) / med,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgeReport {
    pub subjects: usize,
    /// Mean round-trip distance over mean aging distance.
    pub cycle_ratio: f64,
    /// Fraction of edits the age head reads within 5 years of the target.
    pub tracking_fraction: f64,
    /// Same-age edit distance over the median aging distance.
    pub same_age_ratio: f64,
    pub withheld_subjects: usize,
    /// Fraction of subjects whose aged edit is closer to their withheld
    /// older sample than the reconstruction is.
    pub withheld_win_fraction: f64,
    /// Fraction of subjects whose extracted line length does not decrease
    /// over target ages 20, 30, ..., 70.
    pub monotone_fraction: f64,
    /// The same statistic on the withheld ground-truth samples.
    pub reference_monotone_fraction: f64,
}

/// One source sample per test subject (its first), with targets drawn from
/// `U(16, 70)` by `seed`.
pub fn age_report(model: &DetailModel, corpus: &Corpus, seed: u64) -> Result<AgeReport> {
    let subjects = test_subjects(corpus);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut cyc, mut aged, mut same) = (Vec::new(), Vec::new(), Vec::new());
    let (mut tracked, mut monotone, mut ref_monotone, mut ref_total) = (0, 0, 0, 0);
    let (mut w_wins, mut w_total) = (0, 0);
    for (&sid, samples) in &subjects {
        let src = samples[0];
        let z = model.encode(&src.sample)?;
        let rec = recon(model, &z)?;
        let target = rng.random_range(MIN_AGE..MAX_AGE);
        let za = model.transform_age(&z, target)?;
        let zc = model.transform_age(&za, src.sample.age)?;
        cyc.push(perceptual_detail_distance(&rec, &recon(model, &zc)?)?);
        aged.push(perceptual_detail_distance(&rec, &recon(model, &za)?)?);
        tracked += usize::from((model.estimate_age(&za)? - target).abs() < 5.0);
        same.push(perceptual_detail_distance(&rec, &recon(model, &model.transform_age(&z, src.sample.age)?)?)?);

        let lengths: Vec<f64> = (2..=7)
            .map(|k| Ok(extract_lines(&recon(model, &model.transform_age(&z, 10.0 * k as f64)?)?).total_length()))
            .collect::<Result<_>>()?;
        monotone += usize::from(non_decreasing(&lengths));
        let truth: Vec<f64> = corpus.split(Split::Withheld).filter(|w| w.subject_id == sid).map(|w| extract_lines(&w.sample.disp).total_length()).collect();
        if !truth.is_empty() {
            ref_total += 1;
            ref_monotone += usize::from(non_decreasing(&truth));
        }

        // Withheld sample of the same expression at least 10 years older.
        let older = corpus
            .split(Split::Withheld)
            .filter(|w| w.subject_id == sid && w.sample.age >= src.sample.age + 10.0)
            .min_by(|a, b| a.sample.age.total_cmp(&b.sample.age));
        if let Some(w) = older {
            if w.sample.expression == src.sample.expression {
                let edited = recon(model, &model.transform_age(&z, w.sample.age)?)?;
                w_total += 1;
                w_wins += usize::from(perceptual_detail_distance(&edited, &w.sample.disp)? < perceptual_detail_distance(&rec, &w.sample.disp)?);
            }
        }
    }
    let n = subjects.len();
    Ok(AgeReport {
        subjects: n,
        cycle_ratio: mean(&cyc) / mean(&aged),
        tracking_fraction: fraction(tracked, n),
        same_age_ratio: mean(&same) / median(aged),
        withheld_subjects: w_total,
        withheld_win_fraction: fraction(w_wins, w_total),
        monotone_fraction: fraction(monotone, n),
        reference_monotone_fraction: fraction(ref_monotone, ref_total),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineEditReport {
    pub draws: usize,
    /// Drawn strokes whose pixels lie within mean distance 2 of the lines
    /// extracted from the edited displacement.
    pub draw_hits: usize,
    pub draw_fraction: f64,
    pub mean_draw_chamfer: f64,
    pub erases: usize,
    /// Mean over erase edits of `1 - mean|edited| / mean|original|` inside
    /// the erased band.
    pub mean_erase_reduction: f64,
    pub min_erase_reduction: f64,
    /// Refinements that raised their objective (should be zero).
    pub objective_increases: usize,
}

/// Straight stroke in a region at least `clearance` pixels from every line,
/// or `None` after a bounded search.
fn blank_stroke(sample: &CorpusSample, rng: &mut ChaCha8Rng, len: f64, clearance: f64) -> Option<Vec<[f64; 2]>> {
    let res = sample.sample.resolution();
    let df = sample.sample.df.grid();
    let margin = 3.0;
    for _ in 0..500 {
        let a = [rng.random_range(margin..res as f64 - margin), rng.random_range(margin..res as f64 - margin)];
        let t: f64 = rng.random_range(0.0..std::f64::consts::PI);
        let b = [a[0] + len * t.cos(), a[1] + len * t.sin()];
        if !(margin..res as f64 - margin).contains(&b[0]) || !(margin..res as f64 - margin).contains(&b[1]) {
            continue;
        }
        let stroke = rasterize_polyline(res, res, &[a, b]);
        if stroke.pixels().iter().all(|&(x, y)| df[(x, y)] >= clearance) {
            return Some(vec![a, b]);
        }
    }
    None
}

/// `edits` scripted draw edits and `edits` erase edits on test samples.
pub fn line_edit_report(model: Arc<DetailModel>, corpus: &Corpus, edits: usize, seed: u64) -> Result<LineEditReport> {
    let samples: Vec<&CorpusSample> = corpus.split(Split::Test).collect();
    if samples.is_empty() {
        return Err(Error::DegenerateCorpus("no test samples".into()));
    }
    let res = model.resolution();
    let len = res as f64 / 4.0;
    let clearance = model.truncation();
    let cfg = EditConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut draws, mut hits, mut chamfers, mut increases) = (0, 0, Vec::new(), 0);
    let mut k = 0;
    while draws < edits && k < 20 * edits {
        let s = samples[(k * 7919) % samples.len()];
        k += 1;
        let Some(points) = blank_stroke(s, &mut rng, len, clearance) else { continue };
        let mut session = EditSession::with_config(model.clone(), s.sample.clone(), cfg)?;
        let (out, trace) = session.edit_lines_traced(&LineEdit::new(vec![Stroke::draw(points.clone())]), cfg.refine_steps)?;
        increases += usize::from(trace.final_objective > trace.initial_objective + 1e-9);
        let c = chamfer(&rasterize_polyline(res, res, &points), &extract_lines(&out.sample.disp));
        draws += 1;
        hits += usize::from(c <= 2.0);
        chamfers.push(c);
    }

    let mut reductions = Vec::new();
    let mut k = 0;
    while reductions.len() < edits && k < 20 * edits {
        let s = samples[(k * 104_729 + 3) % samples.len()];
        k += 1;
        // Erase the longest line component of the sample with a band around it.
        let lines = extract_lines(&s.sample.disp);
        let Some(comp) = lines.components().into_iter().max_by_key(|c| c.len()) else { continue };
        if comp.len() < 4 {
            continue;
        }
        let pts = trace_component(&comp);
        let radius = 3.0;
        let stroke = Stroke::erase(pts.clone(), radius);
        let mut session = EditSession::with_config(model.clone(), s.sample.clone(), cfg)?;
        let (out, trace) = session.edit_lines_traced(&LineEdit::new(vec![stroke]), cfg.refine_steps)?;
        increases += usize::from(trace.final_objective > trace.initial_objective + 1e-9);
        let band: Vec<(usize, usize)> = (0..res)
            .flat_map(|y| (0..res).map(move |x| (x, y)))
            .filter(|&(x, y)| comp.iter().any(|&(cx, cy)| (cx as f64 - x as f64).powi(2) + (cy as f64 - y as f64).powi(2) <= radius * radius))
            .collect();
        let mag = |d: &DisplacementMap| band.iter().map(|&(x, y)| d.grid()[(x, y)].abs()).sum::<f64>() / band.len() as f64;
        let before = mag(&s.sample.disp);
        if before > 0.0 {
            reductions.push(1.0 - mag(&out.sample.disp) / before);
        }
    }
    Ok(LineEditReport {
        draws,
        draw_hits: hits,
        draw_fraction: fraction(hits, draws),
        mean_draw_chamfer: mean(&chamfers),
        erases: reductions.len(),
        mean_erase_reduction: mean(&reductions),
        min_erase_reduction: reductions.iter().copied().fold(f64::INFINITY, f64::min),
        objective_increases: increases,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnimationReport {
    pub sequences: usize,
    /// Largest per-pixel frame-to-frame change over
    /// `keyframe change / frame count`, maximised over sequences.
    pub worst_step_ratio: f64,
}

/// Neutral-to-key animations over one second at `fps` for test subjects.
pub fn animation_report(model: Arc<DetailModel>, corpus: &Corpus, sequences: usize, fps: f64) -> Result<AnimationReport> {
    let keys = model.key_expressions();
    let mut worst = 0.0f64;
    let mut n = 0;
    for (i, s) in corpus.split(Split::Test).take(sequences).enumerate() {
        let session = EditSession::new(model.clone(), s.sample.clone())?;
        let key = &keys[i % keys.len()];
        let kf = [Keyframe { time: 0.0, weights: vec![0.0; model.n_e()] }, Keyframe { time: 1.0, weights: key.clone() }];
        let frames = session.animate(&kf, fps)?;
        let (first, last) = (&frames[0], &frames[frames.len() - 1]);
        let total = first.values().iter().zip(last.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if total == 0.0 {
            continue;
        }
        let step = frames
            .windows(2)
            .map(|w| w[0].values().iter().zip(w[1].values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        worst = worst.max(step / (total / frames.len() as f64));
        n += 1;
    }
    Ok(AnimationReport { sequences: n, worst_step_ratio: worst })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshRoundTripReport {
    pub amplitude: f64,
    /// Vertices compared; seam and pole neighbourhoods are skipped.
    pub vertices: usize,
    pub max_error: f64,
    pub mean_error: f64,
    /// `max_error / amplitude`.
    pub ratio: f64,
}

/// Height of two wrinkle ridges over the sphere chart, one straight and one
/// wavy, both continuous across the `u` seam.
fn ridge_height(u: f64, v: f64, amplitude: f64, width: f64) -> f64 {
    let wave = 0.62 + 0.06 * (8.0 * std::f64::consts::PI * u).sin();
    let bump = |c: f64| (-((v - c) / width).powi(2)).exp();
    amplitude * bump(0.35).max(bump(wave))
}

/// Bakes a ridged unit sphere against the plain sphere, applies the map to
/// the plain sphere after `subdiv` subdivisions and compares every vertex
/// with the same subdivision of the ridged scan. Vertices within
/// `seam_margin` (in UV units) of the `u` seam or the pole rows are skipped.
pub fn mesh_round_trip(n_lat: usize, amplitude: f64, resolution: usize, subdiv: usize, seam_margin: f64) -> Result<MeshRoundTripReport> {
    let smooth = uv_sphere(n_lat, 2 * n_lat, 1.0);
    let width = 2.5 / n_lat as f64;
    let scan: Vec<Vec3> = smooth
        .vertices()
        .iter()
        .zip(smooth.normals())
        .zip(smooth.uvs())
        .map(|((p, n), uv)| p + ridge_height(uv.x, uv.y, amplitude, width) * n)
        .collect();
    let scan = smooth.with_vertices(scan)?;
    let disp = bake_displacement(&scan, &smooth, resolution)?;
    let rebuilt = apply_displacement(&smooth, &disp, subdiv)?;
    let mut reference = scan;
    for _ in 0..subdiv {
        reference = subdivide_midpoint(&reference)?;
    }
    let inside = |x: f64| x > seam_margin && x < 1.0 - seam_margin;
    let errors: Vec<f64> = rebuilt
        .vertices()
        .iter()
        .zip(reference.vertices())
        .zip(rebuilt.uvs())
        .filter(|(_, uv)| inside(uv.x) && inside(uv.y))
        .map(|((a, b), _)| (a - b).norm())
        .collect();
    let max_error = errors.iter().cloned().fold(0.0, f64::max);
    Ok(MeshRoundTripReport { amplitude, vertices: errors.len(), max_error, mean_error: mean(&errors), ratio: max_error / amplitude })
}

/// All held-out statistics in one record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub expression: ExpressionReport,
    pub age: AgeReport,
    pub lines: LineEditReport,
    pub animation: AnimationReport,
}

pub fn evaluate(model: Arc<DetailModel>, corpus: &Corpus, seed: u64) -> Result<EvaluationReport> {
    Ok(EvaluationReport {
        expression: expression_report(&model, corpus)?,
        age: age_report(&model, corpus, seed)?,
        lines: line_edit_report(model.clone(), corpus, 30, seed)?,
        animation: animation_report(model, corpus, 10, 24.0)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ridged_sphere_survives_bake_and_apply() {
        let r = mesh_round_trip(48, 0.01, 256, 2, 0.03).unwrap();
        assert!(r.vertices > 10_000);
        assert!(r.ratio < 0.1, "{r:?}");
        assert!(r.mean_error < 0.01 * r.amplitude, "{r:?}");
    }

    #[test]
    fn round_trip_error_scales_with_amplitude() {
        let a = mesh_round_trip(24, 0.01, 128, 1, 0.03).unwrap();
        let b = mesh_round_trip(24, 0.001, 128, 1, 0.03).unwrap();
        assert!((a.ratio - b.ratio).abs() < 1e-6 * a.ratio.max(1e-12), "{a:?} {b:?}");
        assert_eq!(mesh_round_trip(24, 0.0, 128, 1, 0.03).unwrap().max_error, 0.0);
    }

    #[test]
    fn traced_component_visits_every_pixel_in_walk_order() {
        let comp: Vec<(usize, usize)> = vec![(5, 5), (3, 5), (4, 5), (6, 6), (2, 4)];
        let walk = trace_component(&comp);
        assert_eq!(walk.len(), comp.len());
        assert!(walk[0] == [2.0, 4.0] || walk[0] == [6.0, 6.0]);
        for w in walk.windows(2) {
            assert!((w[0][0] - w[1][0]).abs() <= 1.0 && (w[0][1] - w[1][1]).abs() <= 1.0);
        }
    }

    #[test]
    fn statistics_helpers() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert!(median(vec![]).is_nan());
        assert!(fraction(1, 0).is_nan());
        assert!(non_decreasing(&[1.0, 1.0, 2.0]));
        assert!(!non_decreasing(&[2.0, 1.0]));
    }
}
