use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::raster::{JointSample, MAX_AGE, MIN_AGE};
use crate::structure::LineMap;

use super::{generate_subject, render_details, Rendered, SyntheticSubject};

/// Ages at which withheld same-subject samples are rendered for test subjects.
pub const WITHHELD_AGES: [f64; 6] = [20.0, 30.0, 40.0, 50.0, 60.0, 70.0];

const MANIFEST: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
    /// Same-subject samples at other ages, kept out of training.
    Withheld,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    pub n_subjects: usize,
    pub expressions_per_subject: usize,
    pub resolution: usize,
    pub seed: u64,
    #[serde(default = "default_n_e")]
    pub n_e: usize,
    #[serde(default = "default_n_e")]
    pub n_key: usize,
}

fn default_n_e() -> usize {
    8
}

impl CorpusConfig {
    pub fn new(n_subjects: usize, expressions_per_subject: usize, resolution: usize, seed: u64) -> Self {
        CorpusConfig { n_subjects, expressions_per_subject, resolution, seed, n_e: 8, n_key: 8 }
    }

    pub fn test_subject_count(&self) -> usize {
        if self.n_subjects < 2 {
            0
        } else {
            ((self.n_subjects as f64 * 0.1).round() as usize).max(1)
        }
    }

    /// Seed of subject `id`, derived from the corpus seed.
    pub fn subject_seed(&self, id: u32) -> u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(1 + id as u64);
        rng.random()
    }

    pub fn subject(&self, id: u32) -> SyntheticSubject {
        generate_subject(id, self.subject_seed(id), self.n_e)
    }

    fn validate(&self) -> Result<()> {
        if self.n_e == 0 || self.n_key == 0 || self.expressions_per_subject == 0 {
            return Err(Error::Config("n_e, n_key and expressions_per_subject must be positive".into()));
        }
        Ok(())
    }
}

/// Designated key expressions: key `k` activates blendshape `k mod n_e`
/// fully, and keys past `n_e` add the next blendshape as well.
pub fn key_expressions(n_key: usize, n_e: usize) -> Vec<Vec<f64>> {
    (0..n_key)
        .map(|k| {
            let mut e = vec![0.0; n_e];
            e[k % n_e] = 1.0;
            if k >= n_e {
                e[(k + 1) % n_e] = 1.0;
            }
            e
        })
        .collect()
}

/// Index of the closest key expression in Euclidean distance.
pub fn nearest_key_expression(e: &[f64], keys: &[Vec<f64>]) -> usize {
    let d = |k: &Vec<f64>| k.iter().zip(e).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    (0..keys.len()).min_by(|&a, &b| d(&keys[a]).total_cmp(&d(&keys[b]))).unwrap_or(0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusSample {
    pub id: String,
    pub subject_id: u32,
    pub split: Split,
    pub key_expression: usize,
    pub sample: JointSample,
    pub lines: LineMap,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct SampleMeta {
    expression: Vec<f64>,
    age: f64,
    subject_id: u32,
    split: Split,
    key_expression: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ManifestEntry {
    id: String,
    subject_id: u32,
    split: Split,
    /// Path stem relative to the corpus root.
    path: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Manifest {
    config: CorpusConfig,
    samples: Vec<ManifestEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub config: CorpusConfig,
    pub samples: Vec<CorpusSample>,
}

impl Corpus {
    /// Renders every sample. Rasters are passed through the PNG codec so the
    /// in-memory corpus equals what [`Corpus::load`] reads back.
    pub fn generate(config: &CorpusConfig) -> Result<Corpus> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut ids: Vec<u32> = (0..config.n_subjects as u32).collect();
        ids.shuffle(&mut rng);
        let test: Vec<u32> = ids[..config.test_subject_count()].to_vec();
        let keys = key_expressions(config.n_key, config.n_e);
        let mut samples = Vec::new();
        for sid in 0..config.n_subjects as u32 {
            let subject = config.subject(sid);
            let split = if test.contains(&sid) { Split::Test } else { Split::Train };
            let mut srng = ChaCha8Rng::seed_from_u64(subject.seed);
            srng.set_stream(u64::MAX);
            let age = srng.random_range(MIN_AGE..MAX_AGE);
            let mut first_expression = None;
            for j in 0..config.expressions_per_subject {
                let e = if j < config.n_key {
                    keys[(j + sid as usize) % config.n_key].clone()
                } else {
                    random_expression(config.n_e, &mut srng)
                };
                first_expression.get_or_insert_with(|| e.clone());
                let r = render_details(&subject, &e, age, config.resolution)?;
                samples.push(quantized(format!("s{sid:04}_e{j:02}"), sid, split, &keys, r)?);
            }
            if split == Split::Test {
                let e = first_expression.expect("at least one expression");
                for (k, &a) in WITHHELD_AGES.iter().enumerate() {
                    let r = render_details(&subject, &e, a, config.resolution)?;
                    samples.push(quantized(format!("s{sid:04}_age{k}"), sid, Split::Withheld, &keys, r)?);
                }
            }
        }
        Ok(Corpus { config: config.clone(), samples })
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &CorpusSample> {
        self.samples.iter().filter(move |s| s.split == split)
    }

    pub fn train(&self) -> impl Iterator<Item = &CorpusSample> {
        self.split(Split::Train)
    }

    pub fn test(&self) -> impl Iterator<Item = &CorpusSample> {
        self.split(Split::Test)
    }

    pub fn get(&self, id: &str) -> Option<&CorpusSample> {
        self.samples.iter().find(|s| s.id == id)
    }

    pub fn subject_ids(&self, split: Split) -> Vec<u32> {
        let mut ids: Vec<u32> = self.split(split).map(|s| s.subject_id).collect();
        ids.dedup();
        ids
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut entries = Vec::with_capacity(self.samples.len());
        for s in &self.samples {
            let sub = format!("subject_{:04}", s.subject_id);
            std::fs::create_dir_all(dir.join(&sub))?;
            let stem = format!("{sub}/{}", s.id);
            let base = dir.join(&stem);
            io::save_displacement(with_suffix(&base, ".disp.png"), &s.sample.disp)?;
            io::save_distance_field(with_suffix(&base, ".df.png"), &s.sample.df)?;
            io::save_lines(with_suffix(&base, ".lines.png"), &s.lines)?;
            let meta = SampleMeta {
                expression: s.sample.expression.clone(),
                age: s.sample.age,
                subject_id: s.subject_id,
                split: s.split,
                key_expression: s.key_expression,
            };
            std::fs::write(with_suffix(&base, ".json"), serde_json::to_string_pretty(&meta)?)?;
            entries.push(ManifestEntry { id: s.id.clone(), subject_id: s.subject_id, split: s.split, path: stem });
        }
        let manifest = Manifest { config: self.config.clone(), samples: entries };
        std::fs::write(dir.join(MANIFEST), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Corpus> {
        let dir = dir.as_ref();
        let mpath = dir.join(MANIFEST);
        let manifest: Manifest = serde_json::from_str(&std::fs::read_to_string(&mpath)?)
            .map_err(|e| Error::format(&mpath, e.to_string()))?;
        let mut samples = Vec::with_capacity(manifest.samples.len());
        for entry in manifest.samples {
            let base = dir.join(&entry.path);
            let jpath = with_suffix(&base, ".json");
            let meta: SampleMeta = serde_json::from_str(&std::fs::read_to_string(&jpath)?)
                .map_err(|e| Error::format(&jpath, e.to_string()))?;
            let disp = io::load_displacement(with_suffix(&base, ".disp.png"))?;
            let df = io::load_distance_field(with_suffix(&base, ".df.png"))?;
            let lines = io::load_lines(with_suffix(&base, ".lines.png"))?;
            samples.push(CorpusSample {
                id: entry.id,
                subject_id: meta.subject_id,
                split: meta.split,
                key_expression: meta.key_expression,
                sample: JointSample::new(disp, df, meta.expression, meta.age)?,
                lines,
            });
        }
        Ok(Corpus { config: manifest.config, samples })
    }
}

/// Writes a corpus to `dir` and returns it.
pub fn build_corpus(config: &CorpusConfig, dir: impl AsRef<Path>) -> Result<Corpus> {
    let corpus = Corpus::generate(config)?;
    corpus.write(dir)?;
    Ok(corpus)
}

fn with_suffix(base: &Path, suffix: &str) -> PathBuf {
    let mut s = base.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Sparse random blendshape weights: each blendshape is on with probability
/// 0.3, at a uniform weight.
fn random_expression(n_e: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n_e).map(|_| if rng.random::<f64>() < 0.3 { rng.random_range(0.2..1.0) } else { 0.0 }).collect()
}

fn quantized(id: String, subject_id: u32, split: Split, keys: &[Vec<f64>], r: Rendered) -> Result<CorpusSample> {
    let scale = io::displacement_scale(&r.sample.disp);
    let disp = io::decode_displacement_png(&io::encode_displacement_png(&r.sample.disp, scale)?, scale)?;
    let delta = r.sample.df.truncation();
    let df = io::decode_distance_png(&io::encode_distance_png(&r.sample.df)?, delta)?;
    let key_expression = nearest_key_expression(&r.sample.expression, keys);
    Ok(CorpusSample {
        id,
        subject_id,
        split,
        key_expression,
        sample: JointSample::new(disp, df, r.sample.expression, r.sample.age)?,
        lines: r.lines,
    })
}
