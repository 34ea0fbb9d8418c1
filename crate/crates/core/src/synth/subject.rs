use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

/// Face regions wrinkles are placed in. UV `u` runs left to right, `v` top
/// to bottom.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Forehead,
    Glabella,
    CrowsFeet,
    UnderEye,
    Nasolabial,
    Marionette,
    LipLines,
    Bunny,
}

impl Region {
    pub const ALL: [Region; 8] = [
        Region::Forehead,
        Region::Glabella,
        Region::CrowsFeet,
        Region::UnderEye,
        Region::Nasolabial,
        Region::Marionette,
        Region::LipLines,
        Region::Bunny,
    ];

    /// Blendshape that mainly drives dynamic wrinkles of this region.
    fn primary_blendshape(self, n_e: usize) -> usize {
        let k = match self {
            Region::Forehead => 0,
            Region::Glabella => 1,
            Region::Nasolabial => 2,
            Region::CrowsFeet => 3,
            Region::UnderEye => 7,
            Region::Marionette => 4,
            Region::LipLines => 5,
            Region::Bunny => 6,
        };
        k % n_e
    }

    /// Probability that a wrinkle here is static.
    fn static_fraction(self) -> f64 {
        match self {
            Region::Forehead | Region::Glabella => 0.5,
            Region::CrowsFeet => 0.3,
            Region::UnderEye => 0.7,
            Region::Nasolabial => 0.7,
            Region::Marionette | Region::LipLines => 0.8,
            Region::Bunny => 0.0,
        }
    }

    /// Typical onset age of static wrinkles.
    fn static_onset(self) -> f64 {
        match self {
            Region::Nasolabial => 22.0,
            Region::Forehead => 28.0,
            Region::CrowsFeet => 32.0,
            Region::Glabella => 38.0,
            Region::Bunny => 40.0,
            Region::UnderEye => 42.0,
            Region::Marionette => 52.0,
            Region::LipLines => 58.0,
        }
    }
}

/// One procedural wrinkle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WrinkleTemplate {
    pub region: Region,
    /// Centre line in UV coordinates.
    pub polyline: Vec<[f64; 2]>,
    /// Gaussian cross-section width in pixels.
    pub width_sigma: f64,
    pub base_amplitude: f64,
    /// Per-blendshape activation in `[0, 1]`.
    pub activation: Vec<f64>,
    pub dyn_gain: f64,
    pub age_onset: f64,
    pub age_slope: f64,
}

impl WrinkleTemplate {
    pub fn is_static(&self) -> bool {
        self.activation.iter().all(|&a| a == 0.0)
    }

    pub fn is_active(&self, age: f64) -> bool {
        age >= self.age_onset
    }

    /// `(base + (activation . e) * dyn_gain) * (1 + slope * max(0, a - onset))`,
    /// or 0 before onset.
    pub fn amplitude(&self, expression: &[f64], age: f64) -> f64 {
        if !self.is_active(age) {
            return 0.0;
        }
        let drive: f64 = self.activation.iter().zip(expression).map(|(a, e)| a * e).sum();
        (self.base_amplitude + drive * self.dyn_gain) * (1.0 + self.age_slope * (age - self.age_onset).max(0.0))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSubject {
    pub subject_id: u32,
    pub seed: u64,
    pub wrinkles: Vec<WrinkleTemplate>,
}

/// Scale of wrinkle amplitudes in mesh units.
pub const AMPLITUDE_UNIT: f64 = 1e-3;

/// Builds a subject deterministically from `seed`.
pub fn generate_subject(subject_id: u32, seed: u64, n_e: usize) -> SyntheticSubject {
    assert!(n_e >= 1, "need at least one blendshape");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut wrinkles = Vec::new();
    for region in Region::ALL {
        let shift = [rng.random_range(-0.015..0.015), rng.random_range(-0.015..0.015)];
        let lines = region_polylines(region, &mut rng);
        let n = lines.len();
        let mut any_dynamic = false;
        for (i, polyline) in lines.into_iter().enumerate() {
            let polyline = polyline.into_iter().map(|[u, v]| [u + shift[0], v + shift[1]]).collect();
            // Every region gets at least one expression wrinkle.
            let w = make_template(region, polyline, n_e, i + 1 == n && !any_dynamic, &mut rng);
            any_dynamic |= !w.is_static();
            wrinkles.push(w);
        }
    }
    SyntheticSubject { subject_id, seed, wrinkles }
}

fn make_template(region: Region, polyline: Vec<[f64; 2]>, n_e: usize, force_dynamic: bool, rng: &mut ChaCha8Rng) -> WrinkleTemplate {
    let (lo, hi) = match region {
        Region::Nasolabial => (2.0, 3.0),
        Region::Forehead | Region::Marionette => (1.2, 2.5),
        Region::LipLines | Region::Bunny => (1.0, 1.5),
        _ => (1.0, 2.0),
    };
    let width_sigma = rng.random_range(lo..hi);
    let is_static = rng.random::<f64>() < region.static_fraction() && !force_dynamic;
    let mut activation = vec![0.0; n_e];
    let (base_amplitude, dyn_gain, age_onset) = if is_static {
        let onset = (region.static_onset() + rng.random_range(-5.0..5.0)).clamp(16.0, 70.0);
        (rng.random_range(0.5..1.5) * AMPLITUDE_UNIT, 0.0, onset)
    } else {
        activation[region.primary_blendshape(n_e)] = rng.random_range(0.6..1.0);
        if n_e > 1 && rng.random::<f64>() < 0.3 {
            let k = (region.primary_blendshape(n_e) + rng.random_range(1..n_e)) % n_e;
            activation[k] = rng.random_range(0.1..0.4);
        }
        // Expression lines leave a faint crease at rest.
        let gain = rng.random_range(0.5..1.5) * AMPLITUDE_UNIT;
        (gain * rng.random_range(0.15..0.35), gain, rng.random_range(16.0..30.0))
    };
    WrinkleTemplate {
        region,
        polyline,
        width_sigma,
        base_amplitude,
        activation,
        dyn_gain,
        age_onset,
        age_slope: rng.random_range(0.02..0.05),
    }
}

/// Samples a quadratic Bezier curve at `n` points.
fn bezier(p0: [f64; 2], c: [f64; 2], p1: [f64; 2], n: usize) -> Vec<[f64; 2]> {
    (0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            let s = 1.0 - t;
            [s * s * p0[0] + 2.0 * s * t * c[0] + t * t * p1[0], s * s * p0[1] + 2.0 * s * t * c[1] + t * t * p1[1]]
        })
        .collect()
}

fn mirror(line: &[[f64; 2]]) -> Vec<[f64; 2]> {
    line.iter().map(|&[u, v]| [1.0 - u, v]).collect()
}

fn region_polylines(region: Region, rng: &mut ChaCha8Rng) -> Vec<Vec<[f64; 2]>> {
    let mut j = |amount: f64| rng.random_range(-amount..amount);
    let mut out = Vec::new();
    match region {
        Region::Forehead => {
            let n = 3 + (j(1.0).abs() * 5.0) as usize % 5;
            for k in 0..n {
                let v = 0.15 + 0.2 * k as f64 / (n - 1) as f64 + j(0.01);
                let (u0, u1) = (0.25 + j(0.05), 0.75 + j(0.05));
                out.push(bezier([u0, v], [0.5 + j(0.03), v - 0.03 + j(0.01)], [u1, v + j(0.01)], 9));
            }
        }
        Region::Glabella => {
            let n = 1 + (j(1.0).abs() * 3.0) as usize % 3;
            for k in 0..n {
                let u = 0.5 + [0.0, -0.03, 0.03][k] + j(0.005);
                out.push(bezier([u, 0.36 + j(0.01)], [u + j(0.01), 0.41], [u + j(0.01), 0.46 + j(0.01)], 5));
            }
        }
        Region::CrowsFeet => {
            let n = 2 + (j(1.0).abs() * 3.0) as usize % 3;
            for k in 0..n {
                let angle = (-35.0 + 70.0 * k as f64 / (n - 1) as f64 + j(6.0)).to_radians();
                let len = 0.06 + j(0.02).abs() * 2.0;
                let c = [0.17 + j(0.01), 0.47 + j(0.01)];
                let dir = [-angle.cos(), angle.sin()];
                let a = [c[0] + 0.02 * dir[0], c[1] + 0.02 * dir[1]];
                let b = [c[0] + (0.02 + len) * dir[0], c[1] + (0.02 + len) * dir[1]];
                let line = bezier(a, [(a[0] + b[0]) / 2.0 + j(0.005), (a[1] + b[1]) / 2.0 + j(0.005)], b, 5);
                out.push(line.clone());
                out.push(mirror(&line).into_iter().map(|[u, v]| [u + j(0.01), v + j(0.01)]).collect());
            }
        }
        Region::UnderEye => {
            let n = 1 + (j(1.0).abs() * 2.0) as usize % 2;
            for k in 0..n {
                let v = 0.56 + 0.025 * k as f64 + j(0.005);
                let line = bezier([0.26 + j(0.02), v], [0.32, v + 0.02 + j(0.005)], [0.38 + j(0.02), v], 7);
                out.push(mirror(&line));
                out.push(line);
            }
        }
        Region::Nasolabial => {
            let line = bezier([0.42 + j(0.01), 0.58 + j(0.01)], [0.33 + j(0.02), 0.66 + j(0.02)], [0.32 + j(0.02), 0.82 + j(0.02)], 9);
            out.push(mirror(&line));
            out.push(line);
        }
        Region::Marionette => {
            for side in 0..2 {
                if side == 0 || j(1.0) > 0.0 {
                    let line = bezier([0.38 + j(0.01), 0.85 + j(0.01)], [0.37, 0.9], [0.36 + j(0.01), 0.96 + j(0.005)], 5);
                    out.push(if side == 0 { line } else { mirror(&line) });
                }
            }
        }
        Region::LipLines => {
            let n = 1 + (j(1.0).abs() * 4.0) as usize % 4;
            for _ in 0..n {
                let u = 0.5 + j(0.05);
                out.push(vec![[u, 0.76 + j(0.005)], [u + j(0.005), 0.8 + j(0.005)]]);
            }
        }
        Region::Bunny => {
            for side in 0..2 {
                if side == 0 || j(1.0) > 0.0 {
                    let line = vec![[0.46 + j(0.005), 0.43 + j(0.005)], [0.43 + j(0.005), 0.5 + j(0.005)]];
                    out.push(if side == 0 { line } else { mirror(&line) });
                }
            }
        }
    }
    out
}
