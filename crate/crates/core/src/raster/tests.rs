use super::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn map_from(res: usize, f: impl FnMut(usize, usize) -> f64) -> DisplacementMap {
    DisplacementMap::new(Grid::from_fn(res, res, f)).unwrap()
}

fn random_map(res: usize, seed: u64) -> DisplacementMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    map_from(res, |_, _| rng.random_range(-1.0..1.0))
}

/// Direct (non-separable) 2-D convolution with the same sampled kernel and
/// padding; independent of the separable implementation.
fn direct_blur_oracle(g: &Grid, sigma: f64) -> Grid {
    let k = filter::gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let (w, h) = (g.width(), g.height());
    Grid::from_fn(w, h, |x, y| {
        let mut acc = 0.0;
        for (j, ky) in k.iter().enumerate() {
            for (i, kx) in k.iter().enumerate() {
                let sx = filter::reflect(x as isize + i as isize - r, w);
                let sy = filter::reflect(y as isize + j as isize - r, h);
                acc += kx * ky * g[(sx, sy)];
            }
        }
        acc
    })
}

#[test]
fn rejects_unsupported_resolution() {
    assert!(DisplacementMap::new(Grid::zeros(100, 100)).is_err());
    assert!(DisplacementMap::new(Grid::zeros(64, 32)).is_err());
    assert!(DisplacementMap::new(Grid::zeros(128, 128)).is_ok());
}

#[test]
fn high_pass_of_constant_is_zero() {
    let m = map_from(64, |_, _| 0.7);
    let hp = high_pass(&m, 2.0).unwrap();
    assert!(hp.values().iter().all(|v| v.abs() < 1e-6));
}

#[test]
fn high_pass_rejects_non_finite_and_bad_sigma() {
    let mut g = Grid::zeros(64, 64);
    g[(3, 3)] = f64::NAN;
    assert!(high_pass_grid(&g, 2.0).is_err());
    let m = DisplacementMap::zeros(64).unwrap();
    assert!(high_pass(&m, 0.0).is_err());
    assert!(high_pass(&m, -1.0).is_err());
}

#[test]
fn high_pass_impulse_matches_sampled_kernel() {
    let sigma = 8.0;
    let m = map_from(64, |x, y| if (x, y) == (32, 32) { 1.0 } else { 0.0 });
    let hp = high_pass(&m, sigma).unwrap();
    // Normalized sampled Gaussian evaluated directly.
    let r = (4.0 * sigma).ceil() as i64;
    let norm: f64 = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).sum();
    let center = 1.0 - 1.0 / (norm * norm);
    assert!((hp.grid()[(32, 32)] - center).abs() < 1e-6, "{}", hp.grid()[(32, 32)]);
    // The continuous kernel gives the same answer to within sampling error.
    let continuous = 1.0 - 1.0 / (2.0 * std::f64::consts::PI * sigma * sigma);
    assert!((hp.grid()[(32, 32)] - continuous).abs() < 1e-5);
    for p in [(30, 32), (32, 28), (40, 40), (20, 32)] {
        assert!(hp.grid()[p] < 0.0, "side lobe at {p:?} not negative");
    }
}

#[test]
fn high_pass_low_frequency_sinusoid_residual() {
    let res = 64;
    let sigma = res as f64 / 8.0;
    let m = map_from(res, |x, _| (2.0 * std::f64::consts::PI * (x as f64 + 0.5) / res as f64).sin());
    let hp = high_pass(&m, sigma).unwrap();
    let mut oracle = m.grid().zip_map(&direct_blur_oracle(m.grid(), sigma), |a, b| a - b);
    let om = oracle.mean();
    oracle.data_mut().iter_mut().for_each(|v| *v -= om);
    for (a, b) in hp.values().iter().zip(oracle.data()) {
        assert!((a - b).abs() < 1e-9);
    }
    // Frozen from the direct-convolution oracle: a Gaussian with sigma = W/8
    // passes exp(-2 pi^2 / 64) of this frequency, so about 29% remains.
    let ratio = hp.grid().rms() / m.grid().rms();
    assert!((ratio - 0.291_010_5).abs() < 1e-6, "ratio {ratio}");
}

#[test]
fn high_pass_matches_direct_convolution() {
    let m = random_map(64, 5);
    let hp = high_pass(&m, 2.0).unwrap();
    let mut oracle = m.grid().zip_map(&direct_blur_oracle(m.grid(), 2.0), |a, b| a - b);
    let om = oracle.mean();
    oracle.data_mut().iter_mut().for_each(|v| *v -= om);
    for (a, b) in hp.values().iter().zip(oracle.data()) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn high_pass_idempotent_above_cutoff() {
    // Cosine modes that are symmetric under the reflect padding, all well
    // above the cutoff frequency.
    let m = map_from(64, |x, y| {
        let mode = |k: f64, t: usize| (std::f64::consts::PI * k * (2.0 * t as f64 + 1.0) / 128.0).cos();
        mode(63.0, x) * mode(63.0, y) + 0.5 * mode(42.0, x) + 0.25 * mode(32.0, y)
    });
    for sigma in [4.0, 6.0, 8.0] {
        let once = high_pass(&m, sigma).unwrap();
        let twice = high_pass(&once, sigma).unwrap();
        let err = once.grid().zip_map(twice.grid(), |a, b| a - b).max_abs();
        assert!(err < 1e-3 * m.grid().max_abs(), "sigma {sigma}: {err}");
    }
}

#[test]
fn high_pass_not_idempotent_in_transition_band() {
    // Counterexample: a pattern whose frequency sits where the Gaussian
    // response is near 1/2 loses about a quarter of its amplitude on a second
    // pass, so idempotence only holds for content above the cutoff.
    let m = map_from(64, |x, _| (2.0 * std::f64::consts::PI * x as f64 / 16.0).sin());
    let once = high_pass(&m, 4.0).unwrap();
    let twice = high_pass(&once, 4.0).unwrap();
    let err = once.grid().zip_map(twice.grid(), |a, b| a - b).max_abs();
    assert!(err > 0.1 * m.grid().max_abs());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn high_pass_output_is_zero_mean(seed in 0u64..10_000, scale in 1e-3f64..1e3, sigma in 1.0f64..12.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = map_from(64, |_, _| scale * rng.random_range(-1.0..1.0) + scale);
        let hp = high_pass(&m, sigma).unwrap();
        prop_assert!(hp.grid().mean().abs() <= 1e-3);
    }

    #[test]
    fn high_pass_is_linear(seed in 0u64..10_000, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let x = random_map(64, seed);
        let y = random_map(64, seed + 1);
        let combo = DisplacementMap::new(x.grid().zip_map(y.grid(), |p, q| a * p + b * q)).unwrap();
        let lhs = high_pass(&combo, 2.0).unwrap();
        let hx = high_pass(&x, 2.0).unwrap();
        let hy = high_pass(&y, 2.0).unwrap();
        for ((l, p), q) in lhs.values().iter().zip(hx.values()).zip(hy.values()) {
            prop_assert!((l - (a * p + b * q)).abs() < 1e-9);
        }
    }

    #[test]
    fn normalization_round_trips_and_keeps_extrema(seed in 0u64..10_000, ds in 1e-4f64..10.0, fs in 1e-2f64..10.0) {
        let disp = random_map(64, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let df = DistanceField::new(Grid::from_fn(64, 64, |_, _| rng.random_range(0.0..3.2))).unwrap();
        let s = JointSample::new(disp, df, vec![0.5; 8], 30.0).unwrap();
        let stats = NormStats::new(ds, fs).unwrap();
        let n = normalize_joint(&s, stats).unwrap();
        prop_assert_eq!(n.disp.grid().argmax(), s.disp.grid().argmax());
        prop_assert_eq!(n.disp.grid().argmin(), s.disp.grid().argmin());
        prop_assert_eq!(n.df.grid().argmax(), s.df.grid().argmax());
        prop_assert_eq!(n.df.grid().argmin(), s.df.grid().argmin());
        let back = denormalize_joint(&n, stats).unwrap();
        for (a, b) in back.disp.values().iter().zip(s.disp.values()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        for (a, b) in back.df.values().iter().zip(s.df.values()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn normalization_examples() {
    let disp = map_from(64, |x, _| if x == 0 { 0.04 } else { 0.0 });
    let s = JointSample::new(disp, DistanceField::empty(64, 64), vec![0.0; 8], 20.0).unwrap();
    let n = normalize_joint(&s, NormStats::new(0.02, 1.0).unwrap()).unwrap();
    assert_eq!(n.disp.grid()[(0, 0)], 2.0);
    assert_eq!(n.disp.grid()[(1, 0)], 0.0);
    assert!(matches!(NormStats::new(0.0, 1.0), Err(Error::DegenerateCorpus(_))));
    assert!(normalize_joint(&s, NormStats { disp_std: 0.0, df_std: 1.0 }).is_err());
}

#[test]
fn joint_sample_validation() {
    let disp = DisplacementMap::zeros(64).unwrap();
    assert!(JointSample::new(disp.clone(), DistanceField::empty(128, 128), vec![], 20.0).is_err());
    assert!(JointSample::new(disp.clone(), DistanceField::empty(64, 64), vec![1.2], 20.0).is_err());
    assert!(JointSample::new(disp, DistanceField::empty(64, 64), vec![0.2], 80.0).is_err());
}

#[test]
fn preview_of_flat_map_is_white_and_deterministic() {
    let m = DisplacementMap::zeros(64).unwrap();
    let a = shaded_preview(&m, [0.0, 0.0, 1.0]);
    assert!(a.pixels().all(|p| p.0[0] == 255));
    let r = random_map(64, 9);
    assert_eq!(shaded_preview(&r, [0.3, 0.2, 0.932]), shaded_preview(&r, [0.3, 0.2, 0.932]));
}

#[test]
fn preview_ridge_flanks_differ() {
    // Vertical ridge at x = 32 (height varies along x only).
    let m = map_from(64, |x, _| 0.002 * (-((x as f64 - 32.0).powi(2)) / 8.0).exp());
    let light = [0.6, 0.0, 0.8];
    let img = shaded_preview(&m, light);
    // Finite-difference normals oracle on the right flank (x = 34) and left
    // flank (x = 30).
    let h = |x: f64| 0.002 * 64.0 * (-((x - 32.0).powi(2)) / 8.0).exp();
    let shade = |x: f64| {
        let dx = (h(x + 1.0) - h(x - 1.0)) / 2.0;
        ((-dx * light[0] + light[2]) / (dx * dx + 1.0).sqrt()).max(0.0) * 255.0
    };
    let right = img.get_pixel(34, 10).0[0] as f64;
    let left = img.get_pixel(30, 10).0[0] as f64;
    assert!((right - shade(34.0)).abs() <= 0.5 + 1e-9);
    assert!((left - shade(30.0)).abs() <= 0.5 + 1e-9);
    assert!(right > left);
}

#[test]
fn distance_field_rejects_out_of_range() {
    assert!(DistanceField::new(Grid::filled(64, 64, 3.3)).is_err());
    assert!(DistanceField::new(Grid::filled(64, 64, -0.1)).is_err());
    assert_eq!(DistanceField::empty(100, 100).truncation(), 5.0);
}
