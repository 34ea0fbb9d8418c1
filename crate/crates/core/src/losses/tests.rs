use super::*;
use crate::gradcheck::check_gradient;
use crate::structure::{distance_transform, rasterize_polyline};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A straight crease from `a` to `b` (width sigma 1.5 px) and its exact
/// distance field.
fn wrinkle(res: usize, a: [f64; 2], b: [f64; 2]) -> (Grid, Grid) {
    let disp = Grid::from_fn(res, res, |x, y| {
        let d2 = crate::structure::point_segment_dist2([x as f64, y as f64], a, b);
        -(-d2 / (2.0 * 1.5 * 1.5)).exp()
    });
    let df = distance_transform(&rasterize_polyline(res, res, &[a, b])).into_grid();
    (disp, df)
}

fn absent(res: usize) -> (Grid, Grid) {
    (Grid::zeros(res, res), Grid::filled(res, res, truncation_for(res)))
}

fn random_grid(res: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Grid {
    Grid::from_fn(res, res, |_, _| rng.random_range(lo..hi))
}

fn disp_map(g: Grid) -> DisplacementMap {
    DisplacementMap::new(g).unwrap()
}

#[test]
fn df_loss_examples() {
    let a = Grid::from_fn(64, 64, |x, y| ((x + y) % 5) as f64 * 0.7);
    assert_eq!(df_loss_grad(&a, &a, 3.2).unwrap().0, 0.0);
    let pred = DistanceField::with_truncation(Grid::zeros(256, 256), 12.8).unwrap();
    let target = DistanceField::empty(256, 256);
    assert_eq!(target.truncation(), 12.8);
    assert!((distance_field_loss(&pred, &target, 12.8).unwrap() - 12.8).abs() < 1e-9);
    assert!(matches!(df_loss_grad(&Grid::zeros(64, 64), &Grid::zeros(32, 32), 3.2), Err(Error::Shape { .. })));
}

#[test]
fn df_loss_ignores_values_beyond_truncation() {
    let p = Grid::filled(64, 64, 7.0);
    let t = Grid::filled(64, 64, 3.2);
    let (v, g) = df_loss_grad(&p, &t, 3.2).unwrap();
    assert_eq!(v, 0.0);
    assert!(g.data().iter().all(|&x| x == 0.0));
}

#[test]
fn df_loss_orders_shift_before_deletion() {
    // For a shift t the continuous loss beats deletion only while
    // t < (2 - sqrt 2) * delta, about 1.87 px at 64 and 7.5 px at 256.
    let res = 64;
    let (_, truth) = wrinkle(res, [10.0, 32.0], [54.0, 32.0]);
    let (_, gone) = absent(res);
    let (_, one) = wrinkle(res, [10.0, 33.0], [54.0, 33.0]);
    let (_, two) = wrinkle(res, [10.0, 34.0], [54.0, 34.0]);
    let d = truncation_for(res);
    let deleted = df_loss_grad(&gone, &truth, d).unwrap().0;
    assert!(df_loss_grad(&one, &truth, d).unwrap().0 < deleted);
    assert!(df_loss_grad(&two, &truth, d).unwrap().0 >= deleted);

    let res = 256;
    let (_, truth) = wrinkle(res, [40.0, 128.0], [216.0, 128.0]);
    let deleted = df_loss_grad(&absent(res).1, &truth, 12.8).unwrap().0;
    for t in 1..=3 {
        let (_, shifted) = wrinkle(res, [40.0, 128.0 + t as f64], [216.0, 128.0 + t as f64]);
        assert!(df_loss_grad(&shifted, &truth, 12.8).unwrap().0 < deleted);
    }
}

#[test]
fn df_loss_non_decreasing_in_shift() {
    let res = 64;
    let (_, truth) = wrinkle(res, [8.0, 20.0], [56.0, 20.0]);
    let mut prev = -1.0;
    for t in 0..=6 {
        let (_, s) = wrinkle(res, [8.0, 20.0 + t as f64], [56.0, 20.0 + t as f64]);
        let v = df_loss_grad(&s, &truth, 3.2).unwrap().0;
        assert!(v >= prev, "shift {t}: {v} < {prev}");
        prev = v;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn df_loss_triangle_inequality(seed in 0u64..100_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let [a, b, c] = [0; 3].map(|_| random_grid(64, 0.0, 4.0, &mut rng));
        let l = |p: &Grid, q: &Grid| df_loss_grad(p, q, 3.2).unwrap().0;
        prop_assert!(l(&a, &c) <= l(&a, &b) + l(&b, &c) + 1e-12);
        prop_assert!(l(&a, &b) >= 0.0);
    }

    #[test]
    fn df_loss_zero_iff_equal_after_truncation(seed in 0u64..100_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_grid(64, 0.0, 6.0, &mut rng);
        let b = a.map(|v| if v >= 3.2 { 3.2 + v } else { v });
        prop_assert_eq!(df_loss_grad(&a, &b, 3.2).unwrap().0, 0.0);
        let mut c = a.clone();
        c.data_mut()[7] = if a.data()[7] < 3.0 { a.data()[7] + 0.1 } else { 1.0 };
        prop_assert!(df_loss_grad(&a, &c, 3.2).unwrap().0 > 0.0);
    }
}

#[test]
fn fm_loss_of_constant_offset() {
    // Reference extractor, pred = target + c on both channels: the x and y
    // difference channels cancel and both blurred-intensity channels differ
    // by c, so each of the 4 layers gives (1/6) * 2c and the loss is 4c/3.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (d, s) = (random_grid(64, -1.0, 1.0, &mut rng), random_grid(64, 0.0, 3.2, &mut rng));
    let c = 0.37;
    let (dc, sc) = (d.map(|v| v + c), s.map(|v| v + c));
    let fx = ReferenceExtractor::default();
    let v = feature_matching_loss(RasterPair::new(&dc, &sc), RasterPair::new(&d, &s), &fx).unwrap();
    assert!((v - 4.0 * c / 3.0).abs() < 1e-12, "{v}");
    assert_eq!(feature_matching_loss(RasterPair::new(&d, &s), RasterPair::new(&d, &s), &fx).unwrap(), 0.0);
}

#[test]
fn fm_loss_orders_shift_before_deletion() {
    let fx = ReferenceExtractor::default();
    let res = 64;
    let (td, ts) = wrinkle(res, [10.0, 30.0], [54.0, 36.0]);
    let (gd, gs) = absent(res);
    let truth = RasterPair::new(&td, &ts);
    let deleted = feature_matching_loss(RasterPair::new(&gd, &gs), truth, &fx).unwrap();
    for t in 1..=3 {
        let (sd, ss) = wrinkle(res, [10.0, 30.0 + t as f64], [54.0, 36.0 + t as f64]);
        let shifted = feature_matching_loss(RasterPair::new(&sd, &ss), truth, &fx).unwrap();
        assert!(shifted < deleted, "shift {t}: {shifted} >= {deleted}");
    }
}

#[test]
fn reconstruction_loss_composition() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let [pd, ps, td, ts] = [0; 4].map(|_| random_grid(64, 0.0, 3.2, &mut rng));
    let (p, t) = (RasterPair::new(&pd, &ps), RasterPair::new(&td, &ts));
    let fx = ReferenceExtractor::default();
    let mut w = LossWeights::for_resolution(64);
    assert_eq!(reconstruction_loss(t, t, &fx, &w).unwrap(), 0.0);
    w.lambda_df = 0.0;
    let at0 = reconstruction_loss(p, t, &fx, &w).unwrap();
    assert_eq!(at0, feature_matching_loss(p, t, &fx).unwrap());
    w.lambda_df = 5.0;
    let at5 = reconstruction_loss(p, t, &fx, &w).unwrap();
    let df = df_loss_grad(&ps, &ts, w.delta).unwrap().0;
    assert!((at5 - at0 - 5.0 * df).abs() < 1e-12);
}

#[test]
fn loss_weights_defaults_and_validation() {
    let w = LossWeights::default();
    assert_eq!((w.lambda_df, w.lambda_gan, w.lambda_cyc, w.delta), (2.5, 0.05, 1.0, 12.8));
    assert!(LossWeights { lambda_df: -1.0, ..w }.validate().is_err());
}

fn fixed(n_exp: usize, outputs: Vec<f64>) -> FixedCritic {
    FixedCritic { n_exp, outputs }
}

#[test]
fn gan_loss_examples() {
    let g = Grid::zeros(64, 64);
    let x = RasterPair::new(&g, &g);
    let half = fixed(2, vec![0.5; 4]);
    assert!((gan_loss_fake(x, 0, 0, &half).unwrap() - (-1.386294)).abs() < 1e-6);
    assert!((gan_loss_real(x, 1, 1, &half).unwrap() - (-1.386294)).abs() < 1e-6);
    let c = fixed(1, vec![0.9, 0.8]);
    assert!((gan_loss_fake(x, 0, 0, &c).unwrap() - (-3.912023)).abs() < 1e-6);
    let c = fixed(1, vec![0.2, 0.4]);
    assert!((gan_loss_real(x, 0, 0, &c).unwrap() - (-2.525729)).abs() < 1e-6);
    let zero = fixed(1, vec![0.0, 0.0]);
    let v = gan_loss_fake(x, 0, 0, &zero).unwrap();
    assert!((v - 2.0 * (1.0 - 1e-7f64).ln()).abs() < 1e-15 && v < 0.0 && v > -3e-7);
    let one = fixed(1, vec![1.0, 1.0]);
    assert!(gan_loss_real(x, 0, 0, &one).unwrap().abs() < 3e-7);
    assert!(gan_loss_fake(x, 0, 0, &one).unwrap().is_finite());
    assert!(matches!(gan_loss_fake(x, 1, 0, &one), Err(Error::LabelOutOfRange { index: 1, limit: 1 })));
    assert!(matches!(gan_loss_real(x, 0, 1, &one), Err(Error::LabelOutOfRange { .. })));
}

fn batch<'a>(x: RasterPair<'a>, e: usize, a: usize, et: usize, at: usize) -> AdversarialBatch<'a> {
    AdversarialBatch { real: x, rec: x, exp: x, age: x, mix: x, e, a, e_target: et, a_target: at }
}

#[test]
fn adversarial_objective_examples() {
    let g = Grid::zeros(64, 64);
    let x = RasterPair::new(&g, &g);
    let half = fixed(3, vec![0.5; 5]);
    let v = adversarial_objective(&batch(x, 0, 0, 2, 1), &half).unwrap();
    assert!((v - (-6.931472)).abs() < 1e-6);
    assert!(adversarial_objective(&batch(x, 0, 0, 3, 1), &half).is_err());
}

/// Critic that answers 1 on one raster and 0 on any other.
struct Recogniser<'a> {
    real: &'a Grid,
    n_exp: usize,
    n_age: usize,
}

impl MultiTaskCritic for Recogniser<'_> {
    fn n_exp(&self) -> usize {
        self.n_exp
    }
    fn n_age(&self) -> usize {
        self.n_age
    }
    fn probabilities(&self, x: RasterPair<'_>) -> Vec<f64> {
        let p = if std::ptr::eq(x.disp, self.real) { 1.0 } else { 0.0 };
        vec![p; self.n_exp + self.n_age]
    }
}

#[test]
fn perfect_critic_gives_near_zero_objective() {
    let (r, f) = (Grid::zeros(64, 64), Grid::zeros(64, 64));
    let critic = Recogniser { real: &r, n_exp: 2, n_age: 2 };
    let fake = RasterPair::new(&f, &f);
    let b = AdversarialBatch { real: RasterPair::new(&r, &r), rec: fake, exp: fake, age: fake, mix: fake, e: 0, a: 1, e_target: 1, a_target: 0 };
    let v = adversarial_objective(&b, &critic).unwrap();
    assert!(v <= 0.0 && v > -1e-5, "{v}");
}

#[test]
fn adversarial_objective_label_pairing() {
    // Heads with distinct outputs: swapping the age sample's labels to
    // (e_target, a) must change the value.
    let g = Grid::zeros(64, 64);
    let x = RasterPair::new(&g, &g);
    let c = fixed(3, vec![0.1, 0.3, 0.6, 0.2, 0.7, 0.45]);
    let b = batch(x, 0, 0, 2, 1);
    let reference = adversarial_objective(&b, &c).unwrap();
    let manual = gan_loss_real(x, 0, 0, &c).unwrap()
        + gan_loss_fake(x, 0, 0, &c).unwrap()
        + gan_loss_fake(x, 2, 0, &c).unwrap()
        + gan_loss_fake(x, 0, 1, &c).unwrap()
        + gan_loss_fake(x, 0, 0, &c).unwrap();
    assert!((reference - manual).abs() < 1e-12);
    let permuted = reference - gan_loss_fake(x, 0, 1, &c).unwrap() + gan_loss_fake(x, 2, 0, &c).unwrap();
    assert!((permuted - reference).abs() > 1e-3);
}

#[test]
fn perceptual_metric_basics() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = disp_map(random_grid(64, -1.0, 1.0, &mut rng));
    let b = disp_map(random_grid(64, -1.0, 1.0, &mut rng));
    assert_eq!(perceptual_detail_distance(&a, &a).unwrap(), 0.0);
    let (ab, ba) = (perceptual_detail_distance(&a, &b).unwrap(), perceptual_detail_distance(&b, &a).unwrap());
    assert_eq!(ab.to_bits(), ba.to_bits());
    assert!(ab > 0.0);
    let small = DisplacementMap::zeros(128).unwrap();
    assert!(perceptual_detail_distance(&a, &small).is_err());
}

#[test]
fn perceptual_metric_prefers_misaligned_to_absent() {
    for res in [64, 256] {
        let s = res as f64 / 64.0;
        let (truth, _) = wrinkle(res, [10.0 * s, 30.0 * s], [54.0 * s, 36.0 * s]);
        let truth = disp_map(truth);
        let gone = DisplacementMap::zeros(res).unwrap();
        let deleted = perceptual_detail_distance(&gone, &truth).unwrap();
        let deleted_l1 = mean_abs_difference(&gone, &truth).unwrap();
        for t in 1..=3 {
            let (sh, _) = wrinkle(res, [10.0 * s, 30.0 * s + t as f64], [54.0 * s, 36.0 * s + t as f64]);
            let sh = disp_map(sh);
            let shifted = perceptual_detail_distance(&sh, &truth).unwrap();
            assert!(shifted < deleted, "res {res} shift {t}: {shifted} >= {deleted}");
            // Per-pixel L1 flips once the shift reaches the wrinkle width.
            if t >= 3 {
                assert!(mean_abs_difference(&sh, &truth).unwrap() > deleted_l1);
            }
        }
    }
}

fn random_pixels(n: usize, len: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..len)).collect()
}

#[test]
fn df_loss_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let p = random_grid(64, 0.0, 4.0, &mut rng);
    let t = random_grid(64, 0.0, 4.0, &mut rng);
    let (_, g) = df_loss_grad(&p, &t, 3.2).unwrap();
    let f = |x: &[f64]| df_loss_grad(&Grid::from_vec(64, 64, x.to_vec()).unwrap(), &t, 3.2).unwrap().0;
    let coords = random_pixels(100, p.len(), &mut rng);
    let r = check_gradient(f, p.data(), g.data(), &coords, 1e-4, 1e-3);
    assert!(r.passes(1e-4, 90), "{r:?}");
}

#[test]
fn fm_loss_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let [pd, ps, td, ts] = [0; 4].map(|_| random_grid(64, 0.0, 3.2, &mut rng));
    let fx = ReferenceExtractor::default();
    let (_, gd, gs) = fm_loss_grad(RasterPair::new(&pd, &ps), RasterPair::new(&td, &ts), &fx).unwrap();
    let coords = random_pixels(100, pd.len(), &mut rng);
    let fd = |x: &[f64]| {
        let g = Grid::from_vec(64, 64, x.to_vec()).unwrap();
        feature_matching_loss(RasterPair::new(&g, &ps), RasterPair::new(&td, &ts), &fx).unwrap()
    };
    let r = check_gradient(fd, pd.data(), gd.data(), &coords, 1e-4, 1e-3);
    assert!(r.passes(1e-4, 80), "disp {r:?}");
    let fs = |x: &[f64]| {
        let g = Grid::from_vec(64, 64, x.to_vec()).unwrap();
        feature_matching_loss(RasterPair::new(&pd, &g), RasterPair::new(&td, &ts), &fx).unwrap()
    };
    let r = check_gradient(fs, ps.data(), gs.data(), &coords, 1e-4, 1e-3);
    assert!(r.passes(1e-4, 80), "df {r:?}");
}

#[test]
fn reconstruction_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let [pd, ps, td, ts] = [0; 4].map(|_| random_grid(64, 0.0, 4.0, &mut rng));
    let fx = ReferenceExtractor::default();
    let w = LossWeights::for_resolution(64);
    let (_, _, gs) = reconstruction_loss_grad(RasterPair::new(&pd, &ps), RasterPair::new(&td, &ts), &fx, &w).unwrap();
    let coords = random_pixels(100, pd.len(), &mut rng);
    let fs = |x: &[f64]| {
        let g = Grid::from_vec(64, 64, x.to_vec()).unwrap();
        reconstruction_loss(RasterPair::new(&pd, &g), RasterPair::new(&td, &ts), &fx, &w).unwrap()
    };
    let r = check_gradient(fs, ps.data(), gs.data(), &coords, 1e-4, 1e-3);
    assert!(r.passes(1e-4, 80), "{r:?}");
}

#[test]
fn perceptual_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let p = random_grid(64, -1.0, 1.0, &mut rng);
    let t = random_grid(64, -1.0, 1.0, &mut rng);
    let (_, g) = perceptual_grad(&p, &t).unwrap();
    let f = |x: &[f64]| perceptual_grad(&Grid::from_vec(64, 64, x.to_vec()).unwrap(), &t).unwrap().0;
    let coords = random_pixels(100, p.len(), &mut rng);
    let r = check_gradient(f, p.data(), g.data(), &coords, 1e-4, 1e-3);
    assert!(r.passes(1e-4, 80), "{r:?}");
}

#[test]
fn logistic_critic_outputs_and_training() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut critic = LogisticCritic::new(3, 2, &mut rng);
    let real: Vec<(Grid, Grid)> = (0..4).map(|_| (random_grid(64, -1.0, 1.0, &mut rng), random_grid(64, 0.0, 1.0, &mut rng))).collect();
    let fake: Vec<(Grid, Grid)> = (0..4).map(|_| (random_grid(64, -0.1, 0.1, &mut rng), random_grid(64, 2.0, 3.0, &mut rng))).collect();
    let r: Vec<_> = real.iter().map(|(d, s)| (RasterPair::new(d, s), 1, 0)).collect();
    let f: Vec<_> = fake.iter().map(|(d, s)| (RasterPair::new(d, s), 1, 0)).collect();
    let p = critic.probabilities(r[0].0);
    assert_eq!(p.len(), 5);
    assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));
    let first = critic.train_step(&r, &f, 0.5, 1e-4);
    let mut last = first;
    for _ in 0..50 {
        last = critic.train_step(&r, &f, 0.5, 1e-4);
    }
    assert!(last < first);
    assert!(gan_loss_real(r[0].0, 1, 0, &critic).unwrap() > gan_loss_real(f[0].0, 1, 0, &critic).unwrap());
}

#[test]
fn logistic_critic_input_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let critic = LogisticCritic::new(2, 2, &mut rng);
    let d = random_grid(64, -1.0, 1.0, &mut rng);
    let s = random_grid(64, 0.0, 3.0, &mut rng);
    let (v, gd, _) = critic.generator_loss_grad(RasterPair::new(&d, &s), 1, 1);
    assert!((v - gan_loss_generator(RasterPair::new(&d, &s), 1, 1, &critic).unwrap()).abs() < 1e-12);
    let f = |x: &[f64]| {
        let g = Grid::from_vec(64, 64, x.to_vec()).unwrap();
        critic.generator_loss_grad(RasterPair::new(&g, &s), 1, 1).0
    };
    let coords = random_pixels(60, d.len(), &mut rng);
    let r = check_gradient(f, d.data(), gd.data(), &coords, 1e-4, 1e-2);
    assert!(r.passes(1e-3, 50), "{r:?}");
}
