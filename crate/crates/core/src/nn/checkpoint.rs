//! Parameter checkpoints.
//!
//! Little-endian layout:
//!
//! ```text
//! magic    b"SCMK"
//! version  u32
//! config   u32 byte length, then ModelConfig as JSON
//! tensors  u32 count, then per tensor:
//!            u16 name length, UTF-8 name,
//!            u32 rank, u32 dims[rank],
//!            f32 values[product(dims)]
//! ```
//!
//! Tensors appear in parameter storage order. Values are always stored as
//! `f32`; an `f64` model is rounded on save.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::model::Sngnn2d;
use super::{ModelConfig, ModelError};
use crate::scalar::Scalar;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SCMK";
pub const CHECKPOINT_VERSION: u32 = 1;

fn err(m: impl Into<String>) -> ModelError {
    ModelError::Checkpoint(m.into())
}

pub fn encode_checkpoint<T: Scalar>(model: &Sngnn2d<T>) -> Vec<u8> {
    let cfg = serde_json::to_vec(model.config()).expect("config serializes");
    let tensors = model.layout().tensors(model.config());
    let mut out = Vec::with_capacity(64 + cfg.len() + 4 * model.parameter_count());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
    out.extend_from_slice(&cfg);
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, dims, range) in tensors {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
        for d in dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &model.params()[range] {
            out.extend_from_slice(&v.to_f32_lossy().to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], ModelError> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| err(format!("truncated in {what}")))?;
        let s = &self.buf[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn decode_checkpoint<T: Scalar>(buf: &[u8]) -> Result<Sngnn2d<T>, ModelError> {
    let mut c = Cursor { buf, at: 0 };
    if c.take(4, "magic")? != CHECKPOINT_MAGIC {
        return Err(err("not a checkpoint file"));
    }
    let version = c.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(err(format!("unsupported checkpoint version {version}")));
    }
    let n = c.u32("config")? as usize;
    let cfg: ModelConfig = serde_json::from_slice(c.take(n, "config")?).map_err(|e| err(format!("config: {e}")))?;
    cfg.validate()?;
    let expected = super::layout::ParamLayout::new(&cfg).tensors(&cfg);
    let count = c.u32("tensor count")? as usize;
    if count != expected.len() {
        return Err(err(format!("expected {} tensors, found {count}", expected.len())));
    }
    let mut params = Vec::new();
    for (name, dims, range) in expected {
        let len = u16::from_le_bytes(c.take(2, "tensor name")?.try_into().unwrap()) as usize;
        let got = std::str::from_utf8(c.take(len, "tensor name")?).map_err(|_| err("tensor name is not UTF-8"))?;
        if got != name {
            return Err(err(format!("expected tensor {name}, found {got}")));
        }
        let rank = c.u32(&name)? as usize;
        let got_dims = (0..rank).map(|_| c.u32(&name).map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        if got_dims != dims {
            return Err(err(format!("{name}: shape {got_dims:?}, expected {dims:?}")));
        }
        let data = c.take(4 * range.len(), &name)?;
        params.extend(data.chunks_exact(4).map(|b| T::of(f32::from_le_bytes(b.try_into().unwrap()) as f64)));
    }
    if c.at != buf.len() {
        return Err(err("trailing bytes after last tensor"));
    }
    Sngnn2d::from_params(cfg, params)
}

/// Writes to a sibling temporary file, then renames into place.
pub fn save_checkpoint<T: Scalar>(model: &Sngnn2d<T>, path: &Path) -> Result<(), ModelError> {
    let io = |e: std::io::Error| ModelError::Io { path: path.display().to_string(), source: e };
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(&encode_checkpoint(model)).map_err(io)?;
    f.sync_all().map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<Sngnn2d<T>, ModelError> {
    let buf = fs::read(path).map_err(|e| ModelError::Io { path: path.display().to_string(), source: e })?;
    decode_checkpoint(&buf)
}
