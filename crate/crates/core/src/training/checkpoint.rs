//! Binary checkpoint container.
//!
//! Layout (little-endian): magic `QGEN`, `u32` version, `u32` header length,
//! JSON header, `u32` tensor count, then per tensor a `u32`-prefixed UTF-8
//! name, `u32` rank, `u64` extents and `f64` data.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Vocab;
use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelParams, INDICATOR_DIM};
use crate::numerics::{AdaDeltaConfig, AdaDeltaState, Parameterized, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"QGEN";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to resume training or to generate.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub vocab: Vocab,
    pub optimizer: Option<AdaDeltaState>,
    pub step: u64,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    vocab_tsv: String,
    step: u64,
    seed: u64,
    adadelta: Option<AdaDeltaConfig>,
}

const PARAM: &str = "param/";
const INDICATOR: &str = "indicator/";
const EG2: &str = "adadelta.eg2/";
const EDX2: &str = "adadelta.edx2/";

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_tensor(out: &mut Vec<u8>, name: &str, t: &Tensor) {
    put_u32(out, name.len() as u32);
    out.extend_from_slice(name.as_bytes());
    put_u32(out, t.shape().len() as u32);
    for &d in t.shape() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Serializes a checkpoint to bytes.
pub fn encode_checkpoint(ck: &Checkpoint) -> Result<Vec<u8>> {
    let header = Header {
        config: ck.params.config.clone(),
        vocab_tsv: ck.vocab.to_tsv(),
        step: ck.step,
        seed: ck.seed,
        adadelta: ck.optimizer.as_ref().map(|o| o.config()),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Config(e.to_string()))?;

    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    put_u32(&mut out, CHECKPOINT_VERSION);
    put_u32(&mut out, json.len() as u32);
    out.extend_from_slice(&json);
    let count_at = out.len();
    put_u32(&mut out, 0);

    let mut count = 0u32;
    ck.params.visit(&mut |name, t| {
        put_tensor(&mut out, &format!("{PARAM}{name}"), t);
        count += 1;
    });
    for (i, t) in ck.params.indicators.iter().enumerate() {
        put_tensor(&mut out, &format!("{INDICATOR}{i}"), t);
        count += 1;
    }
    if let Some(opt) = &ck.optimizer {
        for (name, eg, edx) in opt.slots() {
            put_tensor(&mut out, &format!("{EG2}{name}"), eg);
            put_tensor(&mut out, &format!("{EDX2}{name}"), edx);
            count += 2;
        }
    }
    out[count_at..count_at + 4].copy_from_slice(&count.to_le_bytes());
    Ok(out)
}

/// Writes the checkpoint through a temporary file and a rename.
pub fn save_checkpoint(path: impl AsRef<Path>, ck: &Checkpoint) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_checkpoint(ck)?;
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, &bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn fail(&self, message: impl Into<String>) -> Error {
        Error::CorruptCheckpoint {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(self.fail(format!("truncated while reading {what}")));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn tensor(&mut self) -> Result<(String, Tensor)> {
        let start = self.pos;
        let len = self.u32("tensor name length")? as usize;
        let name = std::str::from_utf8(self.take(len, "tensor name")?)
            .map_err(|_| self.fail("tensor name is not UTF-8"))?
            .to_string();
        let rank = self.u32("tensor rank")? as usize;
        if rank == 0 || rank > 3 {
            return Err(self.fail(format!("tensor {name} has rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(self.u64("tensor extent")? as usize);
        }
        let n = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .filter(|&n| n > 0 && n <= (self.buf.len() - self.pos) / 8)
            .ok_or_else(|| self.fail(format!("tensor {name} has impossible shape {shape:?}")))?;
        let raw = self.take(n * 8, "tensor data")?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let t = Tensor::new(&shape, data).map_err(|e| Error::CorruptCheckpoint {
            offset: start,
            message: format!("tensor {name}: {e}"),
        })?;
        Ok((name, t))
    }
}

/// Parses checkpoint bytes; nothing is returned unless the whole file is valid.
pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4, "magic")? != CHECKPOINT_MAGIC {
        r.pos = 0;
        return Err(r.fail("bad magic bytes"));
    }
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let hlen = r.u32("header length")? as usize;
    let header_at = r.pos;
    let header: Header = serde_json::from_slice(r.take(hlen, "header")?).map_err(|e| Error::CorruptCheckpoint {
        offset: header_at,
        message: format!("header: {e}"),
    })?;
    let count = r.u32("tensor count")? as usize;
    let mut tensors: HashMap<String, (usize, Tensor)> = HashMap::new();
    for _ in 0..count {
        let at = r.pos;
        let (name, t) = r.tensor()?;
        if tensors.insert(name.clone(), (at, t)).is_some() {
            return Err(Error::CorruptCheckpoint {
                offset: at,
                message: format!("duplicate tensor {name}"),
            });
        }
    }
    if r.pos != bytes.len() {
        return Err(r.fail("trailing bytes after last tensor"));
    }
    let end = r.pos;
    let missing = |name: &str| Error::CorruptCheckpoint {
        offset: end,
        message: format!("missing tensor {name}"),
    };

    header.config.validate()?;
    let vocab = Vocab::from_tsv(&header.vocab_tsv)?;
    if vocab.len() != header.config.vocab_size {
        return Err(Error::CorruptCheckpoint {
            offset: header_at,
            message: format!(
                "vocabulary has {} ids but the model expects {}",
                vocab.len(),
                header.config.vocab_size
            ),
        });
    }

    let mut take = |name: String, shape: &[usize]| -> Result<Tensor> {
        let (at, t) = tensors.remove(&name).ok_or_else(|| missing(&name))?;
        if t.shape() != shape {
            return Err(Error::CorruptCheckpoint {
                offset: at,
                message: format!("tensor {name} has shape {:?}, expected {shape:?}", t.shape()),
            });
        }
        Ok(t)
    };

    let indicators = [
        take(format!("{INDICATOR}0"), &[INDICATOR_DIM])?,
        take(format!("{INDICATOR}1"), &[INDICATOR_DIM])?,
    ];
    let mut params = ModelParams::zeros_with_indicators(header.config.clone(), indicators);
    let mut failure = None;
    params.visit_mut(&mut |name, slot| {
        if failure.is_none() {
            match take(format!("{PARAM}{name}"), slot.shape()) {
                Ok(t) => *slot = t,
                Err(e) => failure = Some(e),
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }

    let optimizer = match header.adadelta {
        None => None,
        Some(cfg) => {
            let mut opt = AdaDeltaState::new(cfg, &params)?;
            let mut names = Vec::new();
            params.visit(&mut |name, t| names.push((name.to_string(), t.shape().to_vec())));
            for (name, shape) in names {
                let eg = take(format!("{EG2}{name}"), &shape)?;
                let edx = take(format!("{EDX2}{name}"), &shape)?;
                opt.restore_slot(&name, eg, edx)?;
            }
            Some(opt)
        }
    };
    if let Some((name, (at, _))) = tensors.into_iter().min_by_key(|(_, (at, _))| *at) {
        return Err(Error::CorruptCheckpoint {
            offset: at,
            message: format!("unexpected tensor {name}"),
        });
    }
    Ok(Checkpoint {
        params,
        vocab,
        optimizer,
        step: header.step,
        seed: header.seed,
    })
}
