//! Incremental indexing: reuse stored descriptors for unchanged files and
//! compute the rest from pixels.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::features::embedfile::EmbeddingSet;
use crate::features::{describe, fit_projection, project, Descriptor, FeatureError, Part, ProjectionModel};
use crate::id::ImageId;
use crate::imgscan::{decode, ImageRecord};
use crate::store::{FeatureIndex, IndexEntry, StoreError};

pub const PROJECTION_FILE_NAME: &str = "projection.gspm";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// Projected embedding parts keyed by image id.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingTable {
    parts: HashMap<ImageId, Part>,
}

impl EmbeddingTable {
    /// Fits a projection on all rows of `set` and projects each of them.
    pub fn fit(set: &EmbeddingSet) -> Result<(Self, ProjectionModel), FeatureError> {
        let rows = set.rows_f64();
        let model = fit_projection(&rows)?;
        let table = Self::with_model(set, &model)?;
        Ok((table, model))
    }

    pub fn with_model(set: &EmbeddingSet, model: &ProjectionModel) -> Result<Self, FeatureError> {
        let mut parts = HashMap::with_capacity(set.entries.len());
        for ((id, _), row) in set.entries.iter().zip(set.rows_f64()) {
            parts.insert(*id, project(model, &row)?);
        }
        Ok(EmbeddingTable { parts })
    }

    pub fn get(&self, id: &ImageId) -> Option<&Part> {
        self.parts.get(id)
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IndexStats {
    pub records: usize,
    pub hits: usize,
    pub misses: usize,
    /// Pixel decodes attempted during this run.
    pub decodes: usize,
    pub undecodable: usize,
    pub feature_time: Duration,
    pub store_time: Duration,
}

impl IndexStats {
    pub fn hit_ratio(&self) -> f64 {
        let total = self.hits + self.misses;
        if total == 0 {
            1.0
        } else {
            self.hits as f64 / total as f64
        }
    }
}

/// Result of indexing one record list.
#[derive(Debug, Clone, Default)]
pub struct IndexRun {
    /// Decodable records (dimensions filled in on misses) with their stored
    /// descriptors, in input order.
    pub images: Vec<(ImageRecord, Descriptor)>,
    pub undecodable: Vec<ImageRecord>,
    pub stats: IndexStats,
}

enum Outcome {
    Hit(Descriptor),
    Computed(ImageRecord, Descriptor),
    Failed(ImageRecord),
}

/// Looks up or computes descriptors for `records`, upserts new entries and
/// checkpoints the index. `progress(done, total)` is called as files finish.
pub fn index_records(
    records: &[ImageRecord],
    index: &mut FeatureIndex,
    embeddings: Option<&EmbeddingTable>,
    progress: &(dyn Fn(usize, usize) + Sync),
) -> Result<IndexRun, PipelineError> {
    let total = records.len();
    let done = AtomicUsize::new(0);
    let decodes = AtomicUsize::new(0);
    let started = Instant::now();

    let shared: &FeatureIndex = index;
    let outcomes: Vec<Outcome> = records
        .par_iter()
        .map(|record| {
            let outcome = match shared.lookup(&record.id, record.mtime, record.size_bytes) {
                Some(d) => Outcome::Hit(d),
                None => {
                    decodes.fetch_add(1, Ordering::Relaxed);
                    let mut record = record.clone();
                    match decode(&mut record) {
                        Ok(pixels) => Outcome::Computed(record, describe(&pixels)),
                        Err(_) => Outcome::Failed(record),
                    }
                }
            };
            progress(done.fetch_add(1, Ordering::Relaxed) + 1, total);
            outcome
        })
        .collect();
    let feature_time = started.elapsed();

    let started = Instant::now();
    let mut run = IndexRun::default();
    for (record, outcome) in records.iter().zip(outcomes) {
        let (record, mut descriptor, fresh) = match outcome {
            Outcome::Hit(d) => {
                run.stats.hits += 1;
                (record.clone(), d, false)
            }
            Outcome::Computed(r, d) => {
                run.stats.misses += 1;
                (r, d, true)
            }
            Outcome::Failed(r) => {
                run.stats.misses += 1;
                run.stats.undecodable += 1;
                run.undecodable.push(r);
                continue;
            }
        };
        let embed = embeddings.and_then(|t| t.get(&record.id)).cloned();
        let embed_changed = embed.is_some() && !fresh && !same_quantized(&descriptor, embed.as_ref());
        if embed.is_some() {
            descriptor.embed = embed;
        }
        if fresh || embed_changed {
            let entry = IndexEntry::from_descriptor(record.id, record.mtime, record.size_bytes, &descriptor)?;
            descriptor = entry.to_descriptor().expect("entry holds all required parts");
            index.upsert(entry);
        }
        run.images.push((record, descriptor));
    }
    index.checkpoint()?;

    run.stats.records = total;
    run.stats.decodes = decodes.into_inner();
    run.stats.feature_time = feature_time;
    run.stats.store_time = started.elapsed();
    Ok(run)
}

fn same_quantized(stored: &Descriptor, incoming: Option<&Part>) -> bool {
    match (stored.embed.as_ref(), incoming) {
        (Some(a), Some(b)) => {
            let qa = crate::store::quantize(&a.values).ok();
            let qb = crate::store::quantize(&b.values).ok();
            qa.is_some() && qa == qb
        }
        (None, None) => true,
        _ => false,
    }
}

/// Loads a previously saved projection model from the cache directory.
pub fn load_projection(cache_dir: &Path) -> Option<ProjectionModel> {
    let file = std::fs::File::open(cache_dir.join(PROJECTION_FILE_NAME)).ok()?;
    ProjectionModel::read_from(std::io::BufReader::new(file)).ok()
}

pub fn save_projection(cache_dir: &Path, model: &ProjectionModel) -> std::io::Result<()> {
    std::fs::create_dir_all(cache_dir)?;
    let path = cache_dir.join(PROJECTION_FILE_NAME);
    let tmp = path.with_extension("gspm.tmp");
    {
        let mut w = std::io::BufWriter::new(std::fs::File::create(&tmp)?);
        model.write_to(&mut w)?;
        std::io::Write::flush(&mut w)?;
    }
    std::fs::rename(tmp, path)
}
