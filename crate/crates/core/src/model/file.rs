//! Binary model container. Layout is documented in `docs/model-format.md`.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::raster::NormStats;

use super::{DetailModel, ModelMetadata, ModelParts, TransformModule};

pub const MAGIC: &[u8; 4] = b"SEMM";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 * 9;
const CHECKSUM_LEN: usize = 32;

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::InvalidInput(format!("{v} does not fit the model header")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_block(out: &mut Vec<u8>, values: &[f64]) {
    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for &v in values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

impl DetailModel {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        for v in [self.d, self.resolution, self.n_e, self.n_age, self.n_key, self.t_exp.hidden_dim(), self.t_age.hidden_dim()] {
            put_u32(&mut out, v)?;
        }
        let meta = serde_json::to_vec(&self.metadata)?;
        put_u32(&mut out, meta.len())?;
        out.extend_from_slice(&meta);
        put_block(&mut out, &[self.norm.disp_std, self.norm.df_std]);
        put_block(&mut out, &self.mean);
        put_block(&mut out, &self.basis);
        put_block(&mut out, &self.latent_std);
        put_block(&mut out, &self.age_head);
        put_block(&mut out, &self.exp_heads);
        put_block(&mut out, self.t_exp.params());
        put_block(&mut out, self.t_age.params());
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN + CHECKSUM_LEN {
            return Err(Error::CorruptModel(format!("file is only {} bytes", bytes.len())));
        }
        let (body, digest) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
        if &bytes[..4] != MAGIC {
            return Err(Error::CorruptModel("bad magic".into()));
        }
        if Sha256::digest(body).as_slice() != digest {
            return Err(Error::CorruptModel("checksum mismatch".into()));
        }
        let mut r = Reader { buf: body, pos: 4 };
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::VersionMismatch { expected: FORMAT_VERSION, found: version });
        }
        let mut dims = [0usize; 7];
        for v in &mut dims {
            *v = r.u32()? as usize;
        }
        let [d, resolution, n_e, n_age, n_key, h_exp, h_age] = dims;
        let meta_len = r.u32()? as usize;
        let metadata: ModelMetadata = serde_json::from_slice(r.take(meta_len)?)
            .map_err(|e| Error::CorruptModel(format!("metadata: {e}")))?;
        let norm = r.block()?;
        if norm.len() != 2 {
            return Err(Error::CorruptModel("normalization block".into()));
        }
        let mean = r.block()?;
        let basis = r.block()?;
        let latent_std = r.block()?;
        let age_head = r.block()?;
        let exp_heads = r.block()?;
        let t_exp = r.block()?;
        let t_age = r.block()?;
        if r.pos != body.len() {
            return Err(Error::CorruptModel("trailing bytes".into()));
        }
        if latent_std.len() != d {
            return Err(Error::CorruptModel(format!("header says d = {d}, found {} scales", latent_std.len())));
        }
        let module = |input, hidden, params| {
            TransformModule::from_params(input, hidden, d, params).ok_or_else(|| Error::CorruptModel("transform module size".into()))
        };
        DetailModel::from_parts(ModelParts {
            resolution,
            n_e,
            n_key,
            n_age,
            norm: NormStats::new(norm[0], norm[1]).map_err(|e| Error::CorruptModel(e.to_string()))?,
            mean,
            basis,
            latent_std,
            age_head,
            exp_heads,
            t_exp: module(d + n_e, h_exp, t_exp)?,
            t_age: module(d + 1, h_age, t_age)?,
            metadata,
        })
        .map_err(|e| match e {
            Error::DimensionMismatch { .. } => Error::CorruptModel(e.to_string()),
            other => other,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// Loads a model and checks its latent dimension.
    pub fn load_expecting(path: impl AsRef<Path>, latent_dim: usize) -> Result<Self> {
        let m = Self::load(path)?;
        if m.d != latent_dim {
            return Err(Error::DimensionMismatch { what: "latent dimension", expected: latent_dim, found: m.d });
        }
        Ok(m)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| Error::CorruptModel("unexpected end of file".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn block(&mut self) -> Result<Vec<f64>> {
        let n = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        let n = usize::try_from(n).map_err(|_| Error::CorruptModel("block too large".into()))?;
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| Error::CorruptModel("block too large".into()))?)?;
        Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64).collect())
    }
}
