//! Versioned checkpoint container.
//!
//! ```text
//! "EMB1" | version u16 LE = 2 | config length u64 LE | config JSON (UTF-8)
//! tensor count u32 LE
//! per tensor: name length u16 LE | name | cols u32 LE | rows u64 LE | rows·cols f64 LE
//! ```
//!
//! Tensors appear in [`LinkerParams::tensors`] order; `log_temperature` is a
//! 1×1 tensor.

use std::fs;
use std::path::Path;

use super::model::{LinkerConfig, LinkerParams};
use crate::embedding_io::MAGIC;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u16 = 2;

fn tensor_shape(params: &LinkerParams, name: &str, len: usize) -> (usize, usize) {
    let dense = |b: &super::Branch| -> Option<(usize, usize)> {
        let rest = name.split_once('.')?.1;
        if rest == "projection.weight" {
            let w = &b.projection.weight;
            return Some((w.rows(), w.cols()));
        }
        let idx: usize = rest.strip_prefix("transform.")?.split('.').next()?.parse().ok()?;
        rest.ends_with(".weight").then(|| {
            let w = &b.transform[idx].weight;
            (w.rows(), w.cols())
        })
    };
    let shape = if name.starts_with("speaker.") {
        dense(&params.speaker)
    } else if name.starts_with("text.") {
        dense(&params.text)
    } else if name == "aam_weights" {
        params.aam_weights.as_ref().map(|w| (w.rows(), w.cols()))
    } else {
        None
    };
    shape.unwrap_or((1, len))
}

pub fn encode_checkpoint(params: &LinkerParams, config: &LinkerConfig) -> Result<Vec<u8>> {
    let json = serde_json::to_vec(config)?;
    let mut out = Vec::with_capacity(32 + json.len() + params.len() * 8);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    let tensors = params.tensors();
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, data) in &tensors {
        let (rows, cols) = tensor_shape(params, name, data.len());
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(cols as u32).to_le_bytes());
        out.extend_from_slice(&(rows as u64).to_le_bytes());
        for x in data.iter() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn save_checkpoint(params: &LinkerParams, config: &LinkerConfig, path: &Path) -> Result<()> {
    let bytes = encode_checkpoint(params, config)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<(LinkerParams, LinkerConfig)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
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
            .ok_or_else(|| Error::Corrupt("unexpected end of file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(LinkerParams, LinkerConfig)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4).ok() != Some(&MAGIC[..]) {
        return Err(Error::BadMagic);
    }
    let version = r.u16()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let json_len = usize::try_from(r.u64()?).map_err(|_| Error::Corrupt("config length".into()))?;
    let config: LinkerConfig = serde_json::from_slice(r.take(json_len)?)
        .map_err(|e| Error::Corrupt(format!("config block: {e}")))?;
    config
        .validate()
        .map_err(|e| Error::Corrupt(format!("config block: {e}")))?;

    let mut params = LinkerParams::zeros(&config);
    let expected: Vec<(String, usize, (usize, usize))> = params
        .tensors()
        .iter()
        .map(|(n, t)| (n.clone(), t.len(), tensor_shape(&params, n, t.len())))
        .collect();
    let count = r.u32()? as usize;
    if count != expected.len() {
        return Err(Error::Corrupt(format!(
            "expected {} tensors, found {count}",
            expected.len()
        )));
    }
    let mut flat = Vec::with_capacity(params.len());
    for (name, len, (rows, cols)) in &expected {
        let name_len = r.u16()? as usize;
        let found = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::Corrupt("tensor name is not UTF-8".into()))?;
        if found != name {
            return Err(Error::Corrupt(format!("expected tensor {name}, found {found}")));
        }
        let c = r.u32()? as usize;
        let rr = r.u64()? as usize;
        if (rr, c) != (*rows, *cols) {
            return Err(Error::Corrupt(format!(
                "tensor {name} has shape {rr}x{c}, expected {rows}x{cols}"
            )));
        }
        for chunk in r.take(len * 8)?.chunks_exact(8) {
            let x = f64::from_le_bytes(chunk.try_into().unwrap());
            if !x.is_finite() {
                return Err(Error::Corrupt(format!("non-finite value in {name}")));
            }
            flat.push(x);
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::Corrupt("trailing bytes".into()));
    }
    params.assign_flat(&flat);
    Ok((params, config))
}
