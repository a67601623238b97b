//! Binary checkpoint container, all integers and floats little-endian:
//!
//! ```text
//! magic      8 bytes  "UAGACKPT"
//! version    u32
//! config     u32 length + UTF-8 key=value text
//! rng        32-byte seed, u64 stream, u128 word position
//! tensors    u32 count, then per tensor:
//!            u32 name length + UTF-8 name, u32 rows, u32 cols,
//!            rows*cols f64 values in row-major order
//! ```

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::TrainConfig;
use crate::diff::Matrix;
use crate::error::{Error, Result};
use crate::model::ModelBundle;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"UAGACKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        RngState {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos(),
        }
    }

    pub fn restore(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos);
        rng
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub rng: RngState,
    pub tensors: Vec<(String, Matrix)>,
}

fn u32_len(n: usize, what: &str) -> Result<[u8; 4]> {
    u32::try_from(n)
        .map(u32::to_le_bytes)
        .map_err(|_| Error::Checkpoint(format!("{what} too large")))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint("truncated file".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.array()?) as usize)
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()?;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::Checkpoint("invalid UTF-8".into()))
    }
}

impl Checkpoint {
    pub fn new(config: &TrainConfig, rng: &ChaCha8Rng, model: &ModelBundle) -> Self {
        Checkpoint {
            config: config.clone(),
            rng: RngState::capture(rng),
            tensors: model
                .named_params()
                .into_iter()
                .map(|(n, m)| (n, m.clone()))
                .collect(),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        let config = self.config.to_text();
        out.extend_from_slice(&u32_len(config.len(), "config")?);
        out.extend_from_slice(config.as_bytes());
        out.extend_from_slice(&self.rng.seed);
        out.extend_from_slice(&self.rng.stream.to_le_bytes());
        out.extend_from_slice(&self.rng.word_pos.to_le_bytes());
        out.extend_from_slice(&u32_len(self.tensors.len(), "tensor count")?);
        for (name, m) in &self.tensors {
            out.extend_from_slice(&u32_len(name.len(), "name")?);
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&u32_len(m.nrows(), "rows")?);
            out.extend_from_slice(&u32_len(m.ncols(), "cols")?);
            for v in m.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()? as u32;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let config = TrainConfig::parse(&r.string()?)?;
        let rng = RngState {
            seed: r.array()?,
            stream: u64::from_le_bytes(r.array()?),
            word_pos: u128::from_le_bytes(r.array()?),
        };
        let count = r.u32()?;
        let mut tensors = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let name = r.string()?;
            let (rows, cols) = (r.u32()?, r.u32()?);
            let len = rows
                .checked_mul(cols)
                .ok_or_else(|| Error::Checkpoint("tensor too large".into()))?;
            let raw = r.take(len.checked_mul(8).ok_or_else(|| Error::Checkpoint("tensor too large".into()))?)?;
            let values = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect();
            let m = Matrix::from_shape_vec((rows, cols), values).expect("length checked");
            tensors.push((name, m));
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        Ok(Checkpoint { config, rng, tensors })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Rebuilds the model described by the stored config and fills every
    /// parameter from the stored tensors, checking names and shapes.
    pub fn restore_model(&self) -> Result<ModelBundle> {
        let input_dim = self
            .tensors
            .first()
            .map(|(_, m)| m.nrows())
            .ok_or_else(|| Error::Checkpoint("no tensors".into()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut model = ModelBundle::init(&self.config.model_config(input_dim), &mut rng);
        let names: Vec<String> = model.named_params().into_iter().map(|(n, _)| n).collect();
        if names.len() != self.tensors.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                names.len(),
                self.tensors.len()
            )));
        }
        for ((slot, name), (stored_name, stored)) in
            model.params_mut().into_iter().zip(&names).zip(&self.tensors)
        {
            if name != stored_name || slot.dim() != stored.dim() {
                return Err(Error::Checkpoint(format!(
                    "tensor {stored_name} {:?} does not fit {name} {:?}",
                    stored.dim(),
                    slot.dim()
                )));
            }
            slot.assign(stored);
        }
        Ok(model)
    }
}
