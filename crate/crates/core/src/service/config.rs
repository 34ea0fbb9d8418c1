use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::edit::EditConfig;
use crate::error::{Error, Result};
use crate::losses::{LossWeights, ReferenceExtractor};
use crate::model::DetailModel;
use crate::raster::SUPPORTED_RESOLUTIONS;

/// Environment variable that replaces `model` from the config file.
pub const MODEL_ENV: &str = "SEMM_MODEL";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FeatureExtractorChoice {
    /// Multi-scale intensity and gradient magnitudes.
    Reference { scales: usize },
}

impl Default for FeatureExtractorChoice {
    fn default() -> Self {
        FeatureExtractorChoice::Reference { scales: ReferenceExtractor::default().scales }
    }
}

impl FeatureExtractorChoice {
    pub fn build(&self) -> ReferenceExtractor {
        match *self {
            FeatureExtractorChoice::Reference { scales } => ReferenceExtractor { scales },
        }
    }
}

/// Settings shared by `semm serve` and the other subcommands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    pub model: PathBuf,
    /// Corpus directory; enables sessions created from sample ids.
    #[serde(default)]
    pub corpus: Option<PathBuf>,
    #[serde(default = "default_listen")]
    pub listen: SocketAddr,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default = "default_n_e")]
    pub n_e: usize,
    #[serde(default)]
    pub seed: u64,
    /// Defaults to the standard weights for `resolution`.
    #[serde(default)]
    pub weights: Option<LossWeights>,
    #[serde(default)]
    pub feature_extractor: FeatureExtractorChoice,
    /// Line-edit refinement of new sessions.
    #[serde(default)]
    pub edit: EditConfig,
}

fn default_listen() -> SocketAddr {
    SocketAddr::from(([127, 0, 0, 1], 8080))
}

fn default_resolution() -> usize {
    256
}

fn default_n_e() -> usize {
    8
}

impl ServiceConfig {
    pub fn new(model: impl Into<PathBuf>, resolution: usize, n_e: usize) -> Self {
        ServiceConfig {
            model: model.into(),
            corpus: None,
            listen: default_listen(),
            resolution,
            n_e,
            seed: 0,
            weights: None,
            feature_extractor: FeatureExtractorChoice::default(),
            edit: EditConfig::default(),
        }
    }

    /// Parses TOML; unknown keys are errors.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ServiceConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a TOML file and applies the `SEMM_MODEL` override.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.apply_env(std::env::var_os(MODEL_ENV).map(PathBuf::from));
        Ok(cfg)
    }

    pub fn apply_env(&mut self, model_override: Option<PathBuf>) {
        if let Some(p) = model_override {
            self.model = p;
        }
    }

    pub fn weights(&self) -> LossWeights {
        self.weights.unwrap_or_else(|| LossWeights::for_resolution(self.resolution))
    }

    pub fn validate(&self) -> Result<()> {
        if !SUPPORTED_RESOLUTIONS.contains(&self.resolution) {
            return Err(Error::Config(format!("resolution {} not in {SUPPORTED_RESOLUTIONS:?}", self.resolution)));
        }
        if self.n_e == 0 {
            return Err(Error::Config("n_e must be positive".into()));
        }
        if let Some(w) = &self.weights {
            w.validate()?;
        }
        self.edit.validate()?;
        let FeatureExtractorChoice::Reference { scales } = self.feature_extractor;
        if scales == 0 {
            return Err(Error::Config("feature extractor needs at least one scale".into()));
        }
        Ok(())
    }

    /// Loads the model and checks it against `resolution` and `n_e`.
    pub fn load_model(&self) -> Result<DetailModel> {
        self.validate()?;
        let m = DetailModel::load(&self.model)?;
        if m.resolution() != self.resolution {
            return Err(Error::Config(format!("model resolution {} but config says {}", m.resolution(), self.resolution)));
        }
        if m.n_e() != self.n_e {
            return Err(Error::Config(format!("model has {} blendshapes but config says {}", m.n_e(), self.n_e)));
        }
        Ok(m)
    }
}
