//! EMB1: little-endian `f32` row-major embedding matrices.
//!
//! ```text
//! offset  size  field
//!      0     4  magic "EMB1" (45 4D 42 31)
//!      4     2  version, u16 LE (1)
//!      6     4  dim, u32 LE
//!     10     8  count, u64 LE
//!     18     -  count·dim f32 LE, row-major
//! ```

use std::collections::HashSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const MAGIC: [u8; 4] = *b"EMB1";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 18;

/// A `count × dim` block of finite `f32` vectors with unique row ids.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    dim: usize,
    data: Vec<f32>,
    ids: Vec<String>,
}

impl EmbeddingSet {
    pub fn new(dim: usize, data: Vec<f32>, ids: Vec<String>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::EmptySet);
        }
        if data.len() != dim * ids.len() {
            return Err(Error::DimMismatch {
                context: "embedding payload",
                expected: dim * ids.len(),
                found: data.len(),
            });
        }
        if let Some(p) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                row: p / dim,
                col: p % dim,
            });
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        Ok(Self { dim, data, ids })
    }

    /// Rows get positional ids `"0"`, `"1"`, ...
    pub fn positional(dim: usize, data: Vec<f32>) -> Result<Self> {
        let count = if dim == 0 { 0 } else { data.len() / dim };
        Self::new(dim, data, (0..count).map(|i| i.to_string()).collect())
    }

    /// Narrows a matrix to `f32` storage.
    pub fn from_matrix(m: &Matrix, ids: Vec<String>) -> Result<Self> {
        Self::new(m.cols(), m.as_slice().iter().map(|&x| x as f32).collect(), ids)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Replaces the row ids, keeping the payload.
    pub fn with_ids(self, ids: Vec<String>) -> Result<Self> {
        Self::new(self.dim, self.data, ids)
    }

    /// Widens to an `f64` matrix.
    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_vec(
            self.count(),
            self.dim,
            self.data.iter().map(|&x| f64::from(x)).collect(),
        )
    }
}

pub fn write_embeddings(set: &EmbeddingSet, path: &Path) -> Result<()> {
    if set.dim() == 0 || set.count() == 0 {
        return Err(Error::EmptySet);
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    w.write_all(&MAGIC).map_err(io)?;
    w.write_all(&VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&(set.dim() as u32).to_le_bytes()).map_err(io)?;
    w.write_all(&(set.count() as u64).to_le_bytes()).map_err(io)?;
    for x in set.data() {
        w.write_all(&x.to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_embeddings(path: &Path) -> Result<EmbeddingSet> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

pub(crate) fn decode(bytes: &[u8]) -> Result<EmbeddingSet> {
    if bytes.len() < 4 || bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated);
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::Version {
            found: version,
            expected: VERSION,
        });
    }
    let dim = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(bytes[10..18].try_into().unwrap());
    if dim == 0 || count == 0 {
        return Err(Error::EmptySet);
    }
    let expected = (count as u128) * (dim as u128) * 4;
    let payload = &bytes[HEADER_LEN..];
    match (payload.len() as u128).cmp(&expected) {
        std::cmp::Ordering::Less => return Err(Error::Truncated),
        std::cmp::Ordering::Greater => return Err(Error::TrailingBytes),
        std::cmp::Ordering::Equal => {}
    }
    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    EmbeddingSet::positional(dim, data)
}
