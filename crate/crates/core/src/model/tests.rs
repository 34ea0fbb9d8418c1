use std::sync::OnceLock;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::*;
use crate::gradcheck::check_gradient;
use crate::losses::{distance_field_loss, LossWeights, ReferenceExtractor};
use crate::synth::{Corpus, CorpusSample, Split};

fn corpus() -> &'static Corpus {
    static C: OnceLock<Corpus> = OnceLock::new();
    C.get_or_init(|| Corpus::generate(&CorpusConfig::new(24, 8, 64, 5)).unwrap())
}

fn small_config() -> TrainConfig {
    TrainConfig { latent_dim: 16, hidden: 16, steps: 60, checkpoint_every: 20, eval_items: 8, ..TrainConfig::default() }
}

fn model() -> &'static DetailModel {
    static M: OnceLock<DetailModel> = OnceLock::new();
    M.get_or_init(|| DetailModel::fit(corpus(), &small_config()).unwrap())
}

fn random_code(d: usize, scale: f64, rng: &mut ChaCha8Rng) -> LatentCode {
    LatentCode::new((0..d).map(|_| scale * (rng.random::<f64>() * 2.0 - 1.0)).collect()).unwrap()
}

#[test]
fn basis_is_orthonormal() {
    let m = model();
    let n = 2 * 64 * 64;
    for i in 0..m.latent_dim() {
        for j in 0..m.latent_dim() {
            let v = dot(&m.basis[i * n..(i + 1) * n], &m.basis[j * n..(j + 1) * n]);
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((v - want).abs() < 1e-6, "({i},{j}) = {v}");
        }
    }
}

#[test]
fn basis_sign_convention() {
    let m = model();
    for k in 0..m.latent_dim() {
        let col = m.column(k);
        let peak = col.iter().copied().fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        assert!(peak > 0.0);
    }
}

#[test]
fn encode_inverts_generate() {
    let m = model();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let scale = 3.0 * m.latent_std()[0];
        let z = random_code(m.latent_dim(), scale, &mut rng);
        let raw = m.generate_raw(&z).unwrap();
        let back = m.encode_rasters(&raw.disp, &raw.df).unwrap();
        for (a, b) in z.as_slice().iter().zip(back.as_slice()) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
    }
}

#[test]
fn mean_encodes_to_zero() {
    let m = model();
    let raw = m.generate_raw(&LatentCode::zeros(m.latent_dim())).unwrap();
    let z = m.encode_rasters(&raw.disp, &raw.df).unwrap();
    assert!(z.as_slice().iter().all(|v| v.abs() < 1e-9), "{z:?}");
}

#[test]
fn encoding_is_affine() {
    let m = model();
    let c = corpus();
    let (a, b) = (&c.samples[0].sample, &c.samples[9].sample);
    let alpha = 0.3;
    let disp = a.disp.grid().zip_map(b.disp.grid(), |x, y| alpha * x + (1.0 - alpha) * y);
    let df = a.df.grid().zip_map(b.df.grid(), |x, y| alpha * x + (1.0 - alpha) * y);
    let z = m.encode_rasters(&disp, &df).unwrap();
    let (za, zb) = (m.encode(a).unwrap(), m.encode(b).unwrap());
    for k in 0..m.latent_dim() {
        let want = alpha * za.as_slice()[k] + (1.0 - alpha) * zb.as_slice()[k];
        assert!((z.as_slice()[k] - want).abs() < 1e-6);
    }
}

#[test]
fn decode_clamps_distance_field() {
    let m = model();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let normal = rand_distr::Normal::new(0.0, 3f64.sqrt()).unwrap();
    for _ in 0..100 {
        let z = LatentCode::new((0..m.latent_dim()).map(|_| rng.sample(normal)).collect()).unwrap();
        let (_, df) = m.decode(&z).unwrap();
        assert!(df.values().iter().all(|&v| (0.0..=m.truncation()).contains(&v)));
    }
}

#[test]
fn training_reconstruction_within_recorded_bound() {
    let m = model();
    let w = LossWeights::for_resolution(64);
    for s in corpus().train() {
        let (_, df) = m.decode(&m.encode(&s.sample).unwrap()).unwrap();
        assert!(distance_field_loss(&df, &s.sample.df, w.delta).unwrap() <= m.metadata.reconstruction_df_bound);
    }
}

#[test]
fn wrong_inputs_are_rejected() {
    let m = model();
    let z = LatentCode::zeros(m.latent_dim());
    assert!(matches!(m.transform_age(&z, 90.0), Err(Error::OutOfRange { .. })));
    assert!(matches!(m.transform_expression(&z, &[0.5; 3]), Err(Error::DimensionMismatch { .. })));
    assert!(matches!(m.decode(&LatentCode::zeros(3)), Err(Error::DimensionMismatch { .. })));
    let big = Grid::zeros(128, 128);
    assert!(matches!(m.encode_rasters(&big, &big), Err(Error::Shape { .. })));
    let c = CorpusConfig::new(2, 2, 64, 1);
    let tiny = Corpus::generate(&c).unwrap();
    assert!(matches!(DetailModel::fit(&tiny, &small_config()), Err(Error::DegenerateCorpus(_))));
}

#[test]
fn transforms_are_pure_and_finite() {
    let m = model();
    let z = m.encode(&corpus().samples[3].sample).unwrap();
    let e = vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    let a = m.transform_expression(&z, &e).unwrap();
    assert_eq!(a, m.transform_expression(&z, &e).unwrap());
    assert_eq!(a.dim(), m.latent_dim());
    let b = m.transform_age(&z, 55.0).unwrap();
    assert!(b.as_slice().iter().all(|v| v.is_finite()));
}

#[test]
fn age_edit_reaches_target_on_the_head() {
    let m = model();
    for s in corpus().train().take(10) {
        let z = m.encode(&s.sample).unwrap();
        for target in [20.0, 45.0, 70.0] {
            let aged = m.transform_age(&z, target).unwrap();
            assert!((m.estimate_age(&aged).unwrap() - target).abs() < 5.0);
        }
    }
}

fn items_of<'a>(samples: &[&'a CorpusSample], idx: &[ItemIndices]) -> Vec<TrainingItem<'a>> {
    idx.iter().map(|i| i.resolve(samples)).collect()
}

#[test]
fn loss_breakdown_definitions() {
    let m = model();
    let fx = ReferenceExtractor::default();
    let s = &corpus().samples[0].sample;
    let item = TrainingItem { x: s, x_exp: s, style: s, target_age: 40.0 };
    let mut fresh = m.clone();
    for kind in [TransformKind::Expression, TransformKind::Age] {
        fresh.transform_mut(kind).params_mut().iter_mut().for_each(|p| *p = 0.0);
    }
    let w = LossWeights::for_resolution(64);
    let l = training_step_losses(&fresh, &[item], &w, &fx, None).unwrap();
    assert_eq!(l.rec_self, l.rec_exp);
    let z = fresh.encode(s).unwrap();
    let raw = fresh.generate_raw(&z).unwrap();
    let nd = fresh.norm_stats().df_std;
    let (loss, _) = crate::losses::df_loss_grad(&raw.df.map(|v| v / nd), &s.df.grid().map(|v| v / nd), w.delta / nd).unwrap();
    let want = w.lambda_df * loss;
    assert!((l.structure - want).abs() < 1e-9, "{} vs {want}", l.structure);

    let idx = sample_training_items(&corpus().train().collect::<Vec<_>>(), 4, &mut ChaCha8Rng::seed_from_u64(3));
    let train: Vec<&CorpusSample> = corpus().train().collect();
    let items = items_of(&train, &idx);
    let l = training_step_losses(m, &items, &w, &fx, None).unwrap();
    assert!((l.total - (l.rec_self + l.rec_exp + l.structure + w.lambda_cyc * l.cycle)).abs() < 1e-9);
    let no_cyc = LossWeights { lambda_cyc: 0.0, ..w };
    let l0 = training_step_losses(m, &items, &no_cyc, &fx, None).unwrap();
    assert_eq!(l0.total, l.rec + l.structure);
}

#[test]
fn mix_partners_share_expression_and_age_group() {
    let train: Vec<&CorpusSample> = corpus().train().collect();
    let idx = sample_training_items(&train, 200, &mut ChaCha8Rng::seed_from_u64(4));
    let mut matched = 0;
    for i in &idx {
        let (x, s) = (train[i.x], train[i.style]);
        assert_eq!(x.key_expression, s.key_expression);
        assert_eq!(x.subject_id, train[i.x_exp].subject_id);
        if i.style != i.x {
            assert_ne!(x.subject_id, s.subject_id);
        }
        if crate::synth::age_group(x.sample.age) == crate::synth::age_group(s.sample.age) {
            matched += 1;
        }
        assert!((16.0..70.0).contains(&i.target_age));
    }
    assert!(matched > 100, "{matched}");
}

fn perturbed_model() -> DetailModel {
    let mut m = model().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for kind in [TransformKind::Expression, TransformKind::Age] {
        for p in m.transform_mut(kind).params_mut() {
            *p += 0.05 * (rng.random::<f64>() - 0.5);
        }
    }
    m
}

fn probe_coords(n: usize, count: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.random_range(0..n)).collect()
}

fn check_module_gradient(kind: TransformKind, pick: impl Fn(&StageBGradients) -> &Vec<f64>, value: impl Fn(&LossBreakdown) -> f64) {
    let m = perturbed_model();
    let fx = ReferenceExtractor::default();
    let w = LossWeights::for_resolution(64);
    let train: Vec<&CorpusSample> = corpus().train().collect();
    let idx = sample_training_items(&train, 3, &mut ChaCha8Rng::seed_from_u64(5));
    let items = items_of(&train, &idx);
    let g = stage_b_gradients(&m, &items, &w, &fx).unwrap();
    let params = m.transform(kind).params().to_vec();
    let f = |p: &[f64]| {
        let mut mm = m.clone();
        mm.transform_mut(kind).params_mut().copy_from_slice(p);
        value(&training_step_losses(&mm, &items, &w, &fx, None).unwrap())
    };
    let coords = probe_coords(params.len(), 80, 6);
    let r = check_gradient(f, &params, pick(&g), &coords, 1e-6, 1e-3);
    assert!(r.passes(1e-3, 50), "{r:?}");
}

#[test]
fn expression_reconstruction_gradient() {
    check_module_gradient(TransformKind::Expression, |g| &g.rec_expression, |l| l.rec);
}

#[test]
fn cycle_gradient() {
    check_module_gradient(TransformKind::Age, |g| &g.cycle_age, |l| l.cycle);
}

#[test]
fn age_target_gradient() {
    check_module_gradient(TransformKind::Age, |g| &g.age_target_age, |l| l.age_target);
}

#[test]
fn structure_gradient_in_code() {
    let m = model();
    let w = LossWeights::for_resolution(64);
    let c = corpus();
    let z0 = m.encode_rasters(c.samples[0].sample.disp.grid(), c.samples[30].sample.df.grid()).unwrap();
    let target = c.samples[0].sample.df.grid();
    let (_, g) = structure_loss_grad(m, z0.as_slice(), target, &w).unwrap();
    let f = |z: &[f64]| structure_loss_grad(m, z, target, &w).unwrap().0;
    let coords: Vec<usize> = (0..m.latent_dim()).collect();
    let r = check_gradient(f, z0.as_slice(), &g, &coords, 1e-5, 1e-3);
    assert!(r.passes(1e-4, m.latent_dim() / 2), "{r:?}");
}

#[test]
fn fresh_modules_are_zero_maps() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let t = TransformModule::new(5, 7, 3, &mut rng);
    assert_eq!(t.apply(&[0.3, -1.0, 2.0, 0.0, 1.0]), vec![0.0; 3]);
}

#[test]
fn transform_backward_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut t = TransformModule::new(4, 6, 3, &mut rng);
    t.params_mut().iter_mut().for_each(|p| *p += 0.3 * (rng.random::<f64>() - 0.5));
    let u = [0.2, -0.7, 1.1, 0.4];
    let gout = [0.5, -1.0, 0.25];
    let (_, cache) = t.forward(&u);
    let mut gp = vec![0.0; t.params().len()];
    let gu = t.backward(&u, &cache, &gout, &mut gp);
    let loss = |m: &TransformModule, u: &[f64]| m.apply(u).iter().zip(&gout).map(|(a, b)| a * b).sum::<f64>();
    let coords: Vec<usize> = (0..gp.len()).collect();
    let r = check_gradient(
        |p| loss(&TransformModule::from_params(4, 6, 3, p.to_vec()).unwrap(), &u),
        t.params(),
        &gp,
        &coords,
        1e-6,
        f64::INFINITY,
    );
    assert!(r.passes(1e-6, coords.len()), "{r:?}");
    let r = check_gradient(|x| loss(&t, x), &u, &gu, &[0, 1, 2, 3], 1e-6, f64::INFINITY);
    assert!(r.passes(1e-6, 4), "{r:?}");
}

#[test]
fn save_load_round_trip_is_bit_exact() {
    let m = model();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.semm");
    m.save(&path).unwrap();
    let back = DetailModel::load(&path).unwrap();
    assert_eq!(&back, m);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let z = random_code(m.latent_dim(), 5.0, &mut rng);
    assert_eq!(back.decode(&z).unwrap(), m.decode(&z).unwrap());
}

#[test]
fn corrupt_files_are_rejected() {
    let bytes = model().to_bytes().unwrap();
    for cut in [0, 10, bytes.len() / 2, bytes.len() - 1] {
        assert!(matches!(DetailModel::from_bytes(&bytes[..cut]), Err(Error::CorruptModel(_))), "cut {cut}");
    }
    let mut flipped = bytes.clone();
    flipped[bytes.len() / 3] ^= 1;
    assert!(matches!(DetailModel::from_bytes(&flipped), Err(Error::CorruptModel(_))));

    let mut v2 = bytes[..bytes.len() - 32].to_vec();
    v2[4..8].copy_from_slice(&2u32.to_le_bytes());
    use sha2::Digest;
    let digest = sha2::Sha256::digest(&v2);
    v2.extend_from_slice(&digest);
    assert!(matches!(DetailModel::from_bytes(&v2), Err(Error::VersionMismatch { expected: 1, found: 2 })));
}

#[test]
fn dimension_mismatch_on_load() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.semm");
    model().save(&path).unwrap();
    assert!(matches!(
        DetailModel::load_expecting(&path, 576),
        Err(Error::DimensionMismatch { expected: 576, found: 16, .. })
    ));
    assert!(DetailModel::load_expecting(&path, 16).is_ok());
}

#[test]
fn fitting_is_deterministic() {
    let cfg = TrainConfig { steps: 10, ..small_config() };
    let a = DetailModel::fit(corpus(), &cfg).unwrap();
    let b = DetailModel::fit(corpus(), &cfg).unwrap();
    assert_eq!(a.to_bytes().unwrap(), b.to_bytes().unwrap());
}

#[test]
fn recorded_losses_match_reevaluation() {
    let m = model();
    let train: Vec<&CorpusSample> = corpus().train().collect();
    let cfg = m.metadata.train_config.clone().unwrap();
    let l = evaluate_split_losses(m, &train, &cfg.weights_for(64), cfg.eval_items, cfg.seed).unwrap();
    let rec = m.metadata.final_losses.clone().unwrap();
    assert!((l.total - rec.total).abs() < 1e-6);
}

#[test]
fn adversarial_stage_runs_and_stays_finite() {
    let cfg = TrainConfig { steps: 5, adversarial: true, adversarial_steps: 5, ..small_config() };
    let m = DetailModel::fit(corpus(), &cfg).unwrap();
    let z = m.encode(&corpus().samples[0].sample).unwrap();
    assert!(m.transform_age(&z, 60.0).unwrap().as_slice().iter().all(|v| v.is_finite()));
}

// Samples whose codes are exactly `subject part + M e`.
fn linear_corpus(n_subjects: usize) -> Vec<CorpusSample> {
    let res = 64;
    let delta = crate::raster::truncation_for(res);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let field = |rng: &mut ChaCha8Rng, x0: usize, x1: usize| {
        let (a, b, c) = (rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>());
        Grid::from_fn(res, res, move |x, y| if (x0..x1).contains(&x) { (a * x as f64 * 0.2 + b * y as f64 * 0.15 + c).sin() } else { 0.0 })
    };
    let subject_dirs: Vec<(Grid, Grid)> = (0..3).map(|_| (field(&mut rng, 0, 32), field(&mut rng, 0, 32))).collect();
    let expr_dirs: Vec<(Grid, Grid)> = (0..2).map(|_| (field(&mut rng, 32, 64), field(&mut rng, 32, 64))).collect();
    let mut out = Vec::new();
    for s in 0..n_subjects {
        let coef: Vec<f64> = (0..3).map(|_| rng.random::<f64>() - 0.5).collect();
        for (j, e) in [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.6, 0.3], [0.2, 0.9]].iter().enumerate() {
            let mut disp = Grid::zeros(res, res);
            let mut df = Grid::filled(res, res, delta / 2.0);
            for (c, (dd, ds)) in coef.iter().zip(&subject_dirs) {
                disp = disp.zip_map(dd, |a, b| a + c * 1e-3 * b);
                df = df.zip_map(ds, |a, b| a + c * b);
            }
            for (c, (dd, ds)) in e.iter().zip(&expr_dirs) {
                disp = disp.zip_map(dd, |a, b| a + c * 1e-3 * b);
                df = df.zip_map(ds, |a, b| a + c * b);
            }
            let sample = JointSample::new(
                DisplacementMap::new(disp).unwrap(),
                DistanceField::new(df).unwrap(),
                e.to_vec(),
                30.0 + s as f64 % 20.0,
            )
            .unwrap();
            out.push(CorpusSample {
                id: format!("{s}_{j}"),
                subject_id: s as u32,
                split: Split::Train,
                key_expression: j.min(1),
                sample,
                lines: crate::structure::LineMap::empty(res, res),
            });
        }
    }
    out
}

#[test]
fn rank_deficient_corpus_is_reconstructed_exactly() {
    let samples = linear_corpus(8);
    let refs: Vec<&CorpusSample> = samples.iter().collect();
    let cfg = TrainConfig { latent_dim: 12, steps: 0, ..small_config() };
    let m = DetailModel::fit_samples(&refs, 2, 2, &cfg).unwrap();
    assert_eq!(m.latent_dim(), 5);
    for s in &samples {
        let (disp, df) = m.decode(&m.encode(&s.sample).unwrap()).unwrap();
        let err_d = disp.values().iter().zip(s.sample.disp.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let err_s = df.values().iter().zip(s.sample.df.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err_d < 1e-6 && err_s < 1e-6, "{err_d} {err_s}");
    }
}

/// RMS of `transform_expression` against the true code over all
/// same-subject pairs, and RMS of the true code change.
fn linear_edit_errors(m: &DetailModel, samples: &[CorpusSample]) -> (f64, f64) {
    let (mut sq, mut sq_change, mut n) = (0.0, 0.0, 0.0);
    for a in samples {
        let za = m.encode(&a.sample).unwrap();
        for b in samples.iter().filter(|b| b.subject_id == a.subject_id) {
            let zb = m.encode(&b.sample).unwrap();
            let pred = m.transform_expression(&za, &b.sample.expression).unwrap();
            for ((p, t), s) in pred.as_slice().iter().zip(zb.as_slice()).zip(za.as_slice()) {
                sq += (p - t).powi(2);
                sq_change += (t - s).powi(2);
                n += 1.0;
            }
        }
    }
    ((sq / n).sqrt(), (sq_change / n).sqrt())
}

#[test]
fn linear_expression_change_is_learned() {
    let samples = linear_corpus(8);
    let refs: Vec<&CorpusSample> = samples.iter().collect();
    let cfg = TrainConfig { latent_dim: 12, steps: 0, ridge: 0.0, ..small_config() };
    let m = DetailModel::fit_samples(&refs, 2, 2, &cfg).unwrap();
    let (rms, change) = linear_edit_errors(&m, &samples);
    assert!(rms < 1e-3, "rms {rms} (change {change})");

    // Descent on the non-smooth reconstruction loss wanders near the exact
    // solution but stays close to it.
    let cfg = TrainConfig { steps: 60, ..cfg };
    let m = DetailModel::fit_samples(&refs, 2, 2, &cfg).unwrap();
    let (rms, change) = linear_edit_errors(&m, &samples);
    assert!(rms < 0.05 * change, "rms {rms} (change {change})");
}

#[test]
fn duplicating_the_corpus_keeps_mean_and_span() {
    let train: Vec<&CorpusSample> = corpus().train().collect();
    let doubled: Vec<&CorpusSample> = train.iter().chain(train.iter()).copied().collect();
    let cfg = TrainConfig { steps: 0, ..small_config() };
    let a = DetailModel::fit_samples(&train, 8, 8, &cfg).unwrap();
    let b = DetailModel::fit_samples(&doubled, 8, 8, &cfg).unwrap();
    assert_eq!(a.norm_stats(), b.norm_stats());
    assert!(a.mean.iter().zip(&b.mean).all(|(x, y)| (x - y).abs() < 1e-6));
    // Every basis vector of one lies in the span of the other.
    for k in 0..a.latent_dim() {
        let v = a.column(k);
        let coef = b.project(v);
        let norm2: f64 = coef.iter().map(|c| c * c).sum();
        assert!((norm2 - 1.0).abs() < 1e-5, "component {k}: {norm2}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn encode_generate_round_trip(seed in 0u64..1000, scale in 0.1f64..50.0) {
        let m = model();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = random_code(m.latent_dim(), scale, &mut rng);
        let raw = m.generate_raw(&z).unwrap();
        let back = m.encode_rasters(&raw.disp, &raw.df).unwrap();
        for (a, b) in z.as_slice().iter().zip(back.as_slice()) {
            prop_assert!((a - b).abs() < 1e-5);
        }
    }
}

#[test]
fn file_layout_matches_documentation() {
    let m = model();
    let bytes = m.to_bytes().unwrap();
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    assert_eq!(&bytes[..4], b"SEMM");
    assert_eq!(u32_at(4), 1);
    let dims: Vec<usize> = (0..7).map(|i| u32_at(8 + 4 * i)).collect();
    assert_eq!(dims, [m.d, 64, m.n_e, m.n_age, m.n_key, m.t_exp.hidden_dim(), m.t_age.hidden_dim()]);
    let meta_len = u32_at(36);
    let meta: ModelMetadata = serde_json::from_slice(&bytes[40..40 + meta_len]).unwrap();
    assert_eq!(meta, m.metadata);

    let p = 2 * 64 * 64;
    let module = |i: usize, h: usize| h * i + h + m.d * h + m.d + m.d * i;
    let lens = [
        2,
        p,
        m.d * p,
        m.d,
        m.d + 1,
        m.n_key * (m.d + 1),
        module(m.d + m.n_e, m.t_exp.hidden_dim()),
        module(m.d + 1, m.t_age.hidden_dim()),
    ];
    let mut pos = 40 + meta_len;
    let mut first = Vec::new();
    for len in lens {
        assert_eq!(u64::from_le_bytes(bytes[pos..pos + 8].try_into().unwrap()) as usize, len);
        first.push(f32::from_le_bytes(bytes[pos + 8..pos + 12].try_into().unwrap()));
        pos += 8 + 4 * len;
    }
    assert_eq!(first[0], m.norm.disp_std as f32);
    assert_eq!(first[1], m.mean[0] as f32);
    assert_eq!(pos + 32, bytes.len());
    assert_eq!(Sha256::digest(&bytes[..pos]).as_slice(), &bytes[pos..]);
}
