//! Persistent, quantized descriptor cache keyed by file identity.
//!
//! File layout (little-endian):
//!
//! ```text
//! header   magic "GSIX" | version u16 | part_count u16
//!          part_count × { kind u8, dim u16 }
//!          entry_count u64
//! entries  entry_count × {
//!            id [u8; 16] | mtime i64 | size u64
//!            present u8 (bit k: part k stored) | degenerate u8 (bit k)
//!            for each present part, in table order: scale f32 | values [i8; dim]
//!          }
//! ```
//!
//! Entries form an append log; a later entry for the same id supersedes an
//! earlier one. Bytes past `entry_count` records are ignored, so an
//! interrupted append never invalidates committed data.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use crate::features::{Descriptor, Part, PartKind};
use crate::id::ImageId;

pub const INDEX_MAGIC: &[u8; 4] = b"GSIX";
pub const INDEX_VERSION: u16 = 1;
pub const INDEX_FILE_NAME: &str = "features.gsix";

const PART_TABLE: [PartKind; 4] = PartKind::ALL;
const HEADER_LEN: usize = 4 + 2 + 2 + PART_TABLE.len() * 3 + 8;
const COUNT_OFFSET: usize = HEADER_LEN - 8;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("cannot quantize non-finite values")]
    NonFiniteInput,
    #[error("corrupt index at byte offset {0}")]
    CorruptIndex(u64),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Symmetric per-vector int8 quantization: `scale = max|v| / 127`,
/// `q = round(v / scale)`. The zero vector gets scale 0.
pub fn quantize(v: &[f64]) -> Result<(f32, Vec<i8>), StoreError> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(StoreError::NonFiniteInput);
    }
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let scale = (max / 127.0) as f32;
    if scale == 0.0 {
        return Ok((0.0, vec![0; v.len()]));
    }
    let s = scale as f64;
    let values = v.iter().map(|x| (x / s).round().clamp(-127.0, 127.0) as i8).collect();
    Ok((scale, values))
}

pub fn dequantize(scale: f32, values: &[i8]) -> Vec<f64> {
    values.iter().map(|&q| q as f64 * scale as f64).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedPart {
    pub scale: f32,
    pub values: Vec<i8>,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    pub id: ImageId,
    pub mtime: i64,
    pub size_bytes: u64,
    /// One slot per part kind, in [`PartKind::ALL`] order.
    pub parts: [Option<QuantizedPart>; 4],
}

impl IndexEntry {
    pub fn from_descriptor(
        id: ImageId,
        mtime: i64,
        size_bytes: u64,
        descriptor: &Descriptor,
    ) -> Result<Self, StoreError> {
        let mut parts: [Option<QuantizedPart>; 4] = Default::default();
        for (slot, kind) in parts.iter_mut().zip(PART_TABLE) {
            if let Some(part) = descriptor.part(kind) {
                let (scale, values) = quantize(&part.values)?;
                *slot = Some(QuantizedPart {
                    scale,
                    values,
                    degenerate: part.degenerate,
                });
            }
        }
        Ok(IndexEntry {
            id,
            mtime,
            size_bytes,
            parts,
        })
    }

    /// Dequantized descriptor; `None` if a required part is missing.
    pub fn to_descriptor(&self) -> Option<Descriptor> {
        let part = |i: usize| {
            self.parts[i]
                .as_ref()
                .map(|q| Part::from_values(dequantize(q.scale, &q.values), q.degenerate))
        };
        Some(Descriptor {
            color: part(0)?,
            edge: part(1)?,
            freq: part(2)?,
            embed: part(3),
        })
    }

    pub fn has_embed(&self) -> bool {
        self.parts[3].is_some()
    }

    fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(self.id.as_bytes());
        out.extend_from_slice(&self.mtime.to_le_bytes());
        out.extend_from_slice(&self.size_bytes.to_le_bytes());
        let mut present = 0u8;
        let mut degenerate = 0u8;
        for (k, p) in self.parts.iter().enumerate() {
            if let Some(p) = p {
                present |= 1 << k;
                if p.degenerate {
                    degenerate |= 1 << k;
                }
            }
        }
        out.push(present);
        out.push(degenerate);
        for (p, kind) in self.parts.iter().zip(PART_TABLE) {
            if let Some(p) = p {
                debug_assert_eq!(p.values.len(), kind.dim());
                out.extend_from_slice(&p.scale.to_le_bytes());
                out.extend(p.values.iter().map(|v| *v as u8));
            }
        }
    }
}

fn encode_header(count: u64) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN);
    out.extend_from_slice(INDEX_MAGIC);
    out.extend_from_slice(&INDEX_VERSION.to_le_bytes());
    out.extend_from_slice(&(PART_TABLE.len() as u16).to_le_bytes());
    for (code, kind) in PART_TABLE.iter().enumerate() {
        out.push(code as u8);
        out.extend_from_slice(&(kind.dim() as u16).to_le_bytes());
    }
    out.extend_from_slice(&count.to_le_bytes());
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], StoreError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or(StoreError::CorruptIndex(self.pos as u64))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], StoreError> {
        Ok(self.take(N)?.try_into().unwrap())
    }
}

/// Decoded index: committed log entries and the byte length they span.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexLog {
    pub entries: Vec<IndexEntry>,
    pub committed_len: usize,
}

/// Parses an index file image. Trailing bytes beyond the committed entry
/// count are ignored.
pub fn decode_index(bytes: &[u8]) -> Result<IndexLog, StoreError> {
    let mut cur = Cursor { bytes, pos: 0 };
    if &cur.array::<4>()? != INDEX_MAGIC {
        return Err(StoreError::CorruptIndex(0));
    }
    if u16::from_le_bytes(cur.array()?) != INDEX_VERSION {
        return Err(StoreError::CorruptIndex(4));
    }
    let table_at = cur.pos as u64;
    if u16::from_le_bytes(cur.array()?) as usize != PART_TABLE.len() {
        return Err(StoreError::CorruptIndex(table_at));
    }
    for (code, kind) in PART_TABLE.iter().enumerate() {
        let at = cur.pos as u64;
        let [k] = cur.array::<1>()?;
        let dim = u16::from_le_bytes(cur.array()?);
        if k as usize != code || dim as usize != kind.dim() {
            return Err(StoreError::CorruptIndex(at));
        }
    }
    let count = u64::from_le_bytes(cur.array()?);

    let mut entries = Vec::with_capacity(count.min(1 << 20) as usize);
    for _ in 0..count {
        let start = cur.pos as u64;
        let id = ImageId::from_bytes(cur.array()?);
        let mtime = i64::from_le_bytes(cur.array()?);
        let size_bytes = u64::from_le_bytes(cur.array()?);
        let [present] = cur.array::<1>()?;
        let [degenerate] = cur.array::<1>()?;
        if present & !0b1111 != 0 || degenerate & !present != 0 || present & 0b0111 != 0b0111 {
            return Err(StoreError::CorruptIndex(start));
        }
        let mut parts: [Option<QuantizedPart>; 4] = Default::default();
        for (k, (slot, kind)) in parts.iter_mut().zip(PART_TABLE).enumerate() {
            if present & (1 << k) == 0 {
                continue;
            }
            let scale = f32::from_le_bytes(cur.array()?);
            if !scale.is_finite() || scale < 0.0 {
                return Err(StoreError::CorruptIndex(start));
            }
            let values = cur.take(kind.dim())?.iter().map(|b| *b as i8).collect();
            *slot = Some(QuantizedPart {
                scale,
                values,
                degenerate: degenerate & (1 << k) != 0,
            });
        }
        entries.push(IndexEntry {
            id,
            mtime,
            size_bytes,
            parts,
        });
    }
    Ok(IndexLog {
        entries,
        committed_len: cur.pos,
    })
}

/// Serializes a full index file containing `entries` in order.
pub fn encode_index(entries: &[IndexEntry]) -> Vec<u8> {
    let mut out = encode_header(entries.len() as u64);
    for e in entries {
        e.encode(&mut out);
    }
    out
}

/// Single-writer handle on one index file. Upserts are visible to lookups
/// immediately and reach disk at [`FeatureIndex::checkpoint`].
#[derive(Debug)]
pub struct FeatureIndex {
    path: PathBuf,
    live: HashMap<ImageId, IndexEntry>,
    pending: Vec<IndexEntry>,
    log_records: u64,
    committed_len: usize,
    recovered: Option<StoreError>,
    /// The on-disk file must be rewritten even without pending entries.
    stale_file: bool,
}

impl FeatureIndex {
    /// Opens `<cache_dir>/features.gsix`, creating the directory if needed.
    pub fn open(cache_dir: &Path) -> Result<Self, StoreError> {
        fs::create_dir_all(cache_dir)?;
        Self::open_file(&cache_dir.join(INDEX_FILE_NAME))
    }

    /// Loads the index at `path`. A corrupt file is discarded and the index
    /// starts empty; the cause is kept in [`FeatureIndex::recovered_from`].
    pub fn open_file(path: &Path) -> Result<Self, StoreError> {
        let mut index = FeatureIndex {
            path: path.to_path_buf(),
            live: HashMap::new(),
            pending: Vec::new(),
            log_records: 0,
            committed_len: 0,
            recovered: None,
            stale_file: false,
        };
        let bytes = match fs::read(path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(index),
            Err(e) => return Err(e.into()),
        };
        match decode_index(&bytes) {
            Ok(log) => {
                index.log_records = log.entries.len() as u64;
                index.committed_len = log.committed_len;
                for e in log.entries {
                    index.live.insert(e.id, e);
                }
            }
            Err(e) => {
                index.recovered = Some(e);
                index.stale_file = true;
            }
        }
        Ok(index)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Corruption found at open time, if any.
    pub fn recovered_from(&self) -> Option<&StoreError> {
        self.recovered.as_ref()
    }

    /// Number of live ids.
    pub fn len(&self) -> usize {
        self.live.len()
    }

    pub fn is_empty(&self) -> bool {
        self.live.is_empty()
    }

    /// Records in the on-disk log, including superseded ones.
    pub fn log_records(&self) -> u64 {
        self.log_records
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    pub fn get(&self, id: &ImageId) -> Option<&IndexEntry> {
        self.live.get(id)
    }

    pub fn entries(&self) -> impl Iterator<Item = &IndexEntry> {
        self.live.values()
    }

    /// Dequantized descriptor if the stored entry matches `(mtime, size)`.
    pub fn lookup(&self, id: &ImageId, mtime: i64, size_bytes: u64) -> Option<Descriptor> {
        self.live
            .get(id)
            .filter(|e| e.mtime == mtime && e.size_bytes == size_bytes)
            .and_then(IndexEntry::to_descriptor)
    }

    pub fn upsert(&mut self, entry: IndexEntry) {
        self.live.insert(entry.id, entry.clone());
        self.pending.push(entry);
    }

    /// Appends pending entries to the log and publishes it atomically.
    pub fn checkpoint(&mut self) -> Result<(), StoreError> {
        if self.pending.is_empty() && !self.stale_file && self.path.exists() {
            return Ok(());
        }
        let mut bytes = if self.log_records > 0 {
            let mut existing = fs::read(&self.path)?;
            existing.truncate(self.committed_len);
            existing
        } else {
            encode_header(0)
        };
        for e in &self.pending {
            e.encode(&mut bytes);
        }
        let count = self.log_records + self.pending.len() as u64;
        bytes[COUNT_OFFSET..HEADER_LEN].copy_from_slice(&count.to_le_bytes());
        self.publish(&bytes)?;
        self.log_records = count;
        self.committed_len = bytes.len();
        self.pending.clear();
        self.stale_file = false;
        Ok(())
    }

    /// Rewrites the log with one record per live id.
    pub fn compact(&mut self) -> Result<(), StoreError> {
        let mut live: Vec<IndexEntry> = self.live.values().cloned().collect();
        live.sort_by_key(|e| e.id);
        let bytes = encode_index(&live);
        self.publish(&bytes)?;
        self.log_records = live.len() as u64;
        self.committed_len = bytes.len();
        self.pending.clear();
        self.stale_file = false;
        Ok(())
    }

    fn publish(&self, bytes: &[u8]) -> Result<(), StoreError> {
        if let Some(dir) = self.path.parent() {
            fs::create_dir_all(dir)?;
        }
        let tmp = self.path.with_extension("gsix.tmp");
        {
            let mut f = File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &self.path)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use tempfile::TempDir;

    fn unit(dim: usize, hot: usize) -> Part {
        let mut v = vec![0.0; dim];
        v[hot] = 1.0;
        Part::from_values(v, false)
    }

    fn descriptor(seed: usize, embed: bool) -> Descriptor {
        Descriptor {
            color: Part::normalized((0..54).map(|i| ((i * 7 + seed) % 13) as f64).collect()),
            edge: Part::normalized(vec![0.0; 40]),
            freq: unit(21, seed % 21),
            embed: embed.then(|| Part::normalized((0..64).map(|i| ((i + seed) as f64).sin()).collect())),
        }
    }

    fn entry(seed: usize, mtime: i64) -> IndexEntry {
        let id = ImageId::from_bytes([seed as u8; 16]);
        IndexEntry::from_descriptor(id, mtime, seed as u64 * 10, &descriptor(seed, seed.is_multiple_of(2))).unwrap()
    }

    #[test]
    fn quantize_zero_vector() {
        let (s, q) = quantize(&[0.0; 5]).unwrap();
        assert_eq!(s, 0.0);
        assert_eq!(q, vec![0; 5]);
        assert_eq!(dequantize(s, &q), vec![0.0; 5]);
    }

    #[test]
    fn quantize_extreme_hits_127() {
        let (_, q) = quantize(&[0.1, -0.8, 0.3]).unwrap();
        assert_eq!(q[1], -127);
        let (_, q) = quantize(&[0.5, 0.2]).unwrap();
        assert_eq!(q[0], 127);
        assert!(matches!(quantize(&[1.0, f64::NAN]), Err(StoreError::NonFiniteInput)));
    }

    proptest! {
        #[test]
        fn quantization_error_within_half_step(v in prop::collection::vec(-10.0f64..10.0, 1..80)) {
            let (scale, q) = quantize(&v).unwrap();
            let back = dequantize(scale, &q);
            for (a, b) in v.iter().zip(&back) {
                prop_assert!((a - b).abs() <= scale as f64 / 2.0 + 1e-12);
            }
        }

        #[test]
        fn encoded_log_round_trips(seeds in prop::collection::vec(0usize..200, 0..20)) {
            let entries: Vec<IndexEntry> = seeds.iter().map(|&s| entry(s, s as i64 * 3)).collect();
            let bytes = encode_index(&entries);
            let log = decode_index(&bytes).unwrap();
            prop_assert_eq!(log.committed_len, bytes.len());
            prop_assert_eq!(log.entries, entries);
        }
    }

    #[test]
    fn header_layout() {
        let bytes = encode_index(&[]);
        assert_eq!(bytes.len(), HEADER_LEN);
        assert_eq!(&bytes[..4], b"GSIX");
        assert_eq!(&bytes[4..6], &[1, 0]);
        assert_eq!(&bytes[6..8], &[4, 0]);
        assert_eq!(&bytes[8..20], &[0, 54, 0, 1, 40, 0, 2, 21, 0, 3, 64, 0]);
        assert_eq!(&bytes[20..28], &[0; 8]);
    }

    #[test]
    fn entry_layout() {
        let e = entry(4, -2);
        let bytes = encode_index(std::slice::from_ref(&e));
        let rec = &bytes[HEADER_LEN..];
        assert_eq!(&rec[..16], &[4; 16]);
        assert_eq!(&rec[16..24], &(-2i64).to_le_bytes());
        assert_eq!(&rec[24..32], &40u64.to_le_bytes());
        assert_eq!(rec[32], 0b1111);
        assert_eq!(rec[33], 0b0010);
        assert_eq!(rec.len(), 34 + 4 * 4 + 54 + 40 + 21 + 64);
    }

    #[test]
    fn hit_and_stale_miss() {
        let dir = TempDir::new().unwrap();
        let mut idx = FeatureIndex::open(dir.path()).unwrap();
        let e = entry(1, 100);
        idx.upsert(e.clone());
        assert!(idx.lookup(&e.id, 100, 10).is_some());
        assert!(idx.lookup(&e.id, 101, 10).is_none());
        assert!(idx.lookup(&e.id, 100, 11).is_none());
        assert!(idx.lookup(&ImageId::from_bytes([9; 16]), 100, 10).is_none());
    }

    #[test]
    fn supersession_and_compaction() {
        let dir = TempDir::new().unwrap();
        let mut idx = FeatureIndex::open(dir.path()).unwrap();
        for round in 0..3 {
            for s in 0..5 {
                idx.upsert(entry(s, round));
            }
            idx.checkpoint().unwrap();
        }
        assert_eq!(idx.log_records(), 15);
        let reopened = FeatureIndex::open(dir.path()).unwrap();
        assert_eq!(reopened.len(), 5);
        let id = ImageId::from_bytes([3; 16]);
        assert!(reopened.lookup(&id, 2, 30).is_some());
        assert!(reopened.lookup(&id, 1, 30).is_none());

        idx.compact().unwrap();
        assert_eq!(idx.log_records(), 5);
        let compacted = FeatureIndex::open(dir.path()).unwrap();
        assert_eq!(compacted.log_records(), 5);
        assert_eq!(compacted.len(), 5);
        assert!(compacted.lookup(&id, 2, 30).is_some());
    }

    #[test]
    fn corrupt_file_recovers_empty() {
        let dir = TempDir::new().unwrap();
        fs::write(dir.path().join(INDEX_FILE_NAME), b"not an index at all").unwrap();
        let mut idx = FeatureIndex::open(dir.path()).unwrap();
        assert!(matches!(idx.recovered_from(), Some(StoreError::CorruptIndex(0))));
        assert!(idx.is_empty());
        idx.upsert(entry(2, 1));
        idx.checkpoint().unwrap();
        let again = FeatureIndex::open(dir.path()).unwrap();
        assert!(again.recovered_from().is_none());
        assert_eq!(again.len(), 1);
    }

    #[test]
    fn count_beyond_data_is_corrupt() {
        let mut bytes = encode_index(&[entry(1, 1), entry(2, 2)]);
        bytes[COUNT_OFFSET] = 3;
        let end = bytes.len() as u64;
        assert!(matches!(decode_index(&bytes), Err(StoreError::CorruptIndex(o)) if o == end));
    }

    #[test]
    fn dequantized_descriptor_close_to_original() {
        let d = descriptor(7, true);
        let e = IndexEntry::from_descriptor(ImageId::from_bytes([1; 16]), 0, 0, &d).unwrap();
        let back = e.to_descriptor().unwrap();
        for ((_, a), (_, b)) in d.parts().zip(back.parts()) {
            assert_eq!(a.degenerate, b.degenerate);
            let max = a.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!((x - y).abs() <= max / 254.0 + 1e-9);
            }
        }
    }
}
