//! External embedding sidecar files.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic     "GSEM"
//! version   u16 (= 1)
//! input_dim u32
//! count     u64
//! count × { id [u8; 16], values [f32; input_dim] }
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::FeatureError;
use crate::id::ImageId;

pub const EMBED_MAGIC: &[u8; 4] = b"GSEM";
pub const EMBED_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    pub input_dim: usize,
    pub entries: Vec<(ImageId, Vec<f32>)>,
}

impl EmbeddingSet {
    pub fn rows_f64(&self) -> Vec<Vec<f64>> {
        self.entries
            .iter()
            .map(|(_, v)| v.iter().map(|x| *x as f64).collect())
            .collect()
    }
}

pub fn write_embeddings(mut w: impl Write, set: &EmbeddingSet) -> Result<(), FeatureError> {
    w.write_all(EMBED_MAGIC)?;
    w.write_all(&EMBED_VERSION.to_le_bytes())?;
    w.write_all(&(set.input_dim as u32).to_le_bytes())?;
    w.write_all(&(set.entries.len() as u64).to_le_bytes())?;
    for (id, values) in &set.entries {
        if values.len() != set.input_dim {
            return Err(FeatureError::DimensionMismatch {
                expected: set.input_dim,
                got: values.len(),
            });
        }
        w.write_all(id.as_bytes())?;
        for v in values {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_embeddings(mut r: impl Read) -> Result<EmbeddingSet, FeatureError> {
    let truncated = |_| FeatureError::Format("truncated embedding file".into());
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(truncated)?;
    if &magic != EMBED_MAGIC {
        return Err(FeatureError::Format("bad magic".into()));
    }
    let mut b2 = [0u8; 2];
    r.read_exact(&mut b2).map_err(truncated)?;
    let version = u16::from_le_bytes(b2);
    if version != EMBED_VERSION {
        return Err(FeatureError::Format(format!("unsupported version {version}")));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4).map_err(truncated)?;
    let input_dim = u32::from_le_bytes(b4) as usize;
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8).map_err(truncated)?;
    let count = u64::from_le_bytes(b8) as usize;

    let mut entries = Vec::with_capacity(count.min(1 << 20));
    let mut record = vec![0u8; ImageId::LEN + 4 * input_dim];
    for _ in 0..count {
        r.read_exact(&mut record).map_err(truncated)?;
        let mut id = [0u8; 16];
        id.copy_from_slice(&record[..16]);
        let values = record[16..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        entries.push((ImageId::from_bytes(id), values));
    }
    Ok(EmbeddingSet { input_dim, entries })
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingSet, FeatureError> {
    read_embeddings(BufReader::new(File::open(path)?))
}

pub fn save_embeddings(path: &Path, set: &EmbeddingSet) -> Result<(), FeatureError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_embeddings(&mut w, set)?;
    w.flush()?;
    Ok(())
}
