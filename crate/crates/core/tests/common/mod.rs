#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use semm::model::{DetailModel, TrainConfig};
use semm::synth::{build_corpus, Corpus, CorpusConfig};
use tempfile::TempDir;

pub struct Fixture {
    pub dir: TempDir,
    pub corpus: Corpus,
    pub model: Arc<DetailModel>,
}

impl Fixture {
    pub fn corpus_dir(&self) -> PathBuf {
        self.dir.path().join("corpus")
    }

    pub fn model_path(&self) -> PathBuf {
        self.dir.path().join("model.semm")
    }

    /// Displacement PNG of a corpus sample.
    pub fn disp_png(&self, id: &str) -> PathBuf {
        let s = self.corpus.get(id).expect("sample id");
        self.corpus_dir().join(format!("subject_{:04}", s.subject_id)).join(format!("{id}.disp.png"))
    }
}

pub fn small_train_config() -> TrainConfig {
    TrainConfig { latent_dim: 16, hidden: 16, steps: 20, checkpoint_every: 10, eval_items: 8, ..TrainConfig::default() }
}

/// Corpus and model on disk, shared by the tests of one binary.
pub fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = TempDir::new().unwrap();
        let corpus = build_corpus(&CorpusConfig::new(16, 4, 64, 3), dir.path().join("corpus")).unwrap();
        let model = DetailModel::fit(&corpus, &small_train_config()).unwrap();
        model.save(dir.path().join("model.semm")).unwrap();
        let loaded = DetailModel::load(dir.path().join("model.semm")).unwrap();
        Fixture { dir, corpus, model: Arc::new(loaded) }
    })
}

pub fn read(path: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(path).unwrap()
}
