//! Scan, index and layout steps shared by the CLI and the HTTP server.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use gridsort_core::features::embedfile::load_embeddings;
use gridsort_core::features::{combine, Descriptor, FeatureError};
use gridsort_core::imgscan::{scan, sort_by_metadata, ImageRecord, ScanError, ScanRequest, SortKey};
use gridsort_core::pipeline::{index_records, save_projection, EmbeddingTable, IndexStats, PipelineError};
use gridsort_core::sortgrid::{ssm_sort_observed, GridLayout, SortConfig, SortEvent};
use gridsort_core::store::FeatureIndex;
use gridsort_core::ImageId;
use serde::{Deserialize, Serialize};

/// Where the index, projection and thumbnails live when no directory is
/// given: `$GRIDSORT_CACHE_DIR`, then `$XDG_CACHE_HOME/gridsort`, then
/// `~/.cache/gridsort`.
pub fn default_cache_dir() -> PathBuf {
    let env = |k: &str| std::env::var_os(k).filter(|v| !v.is_empty()).map(PathBuf::from);
    if let Some(dir) = env("GRIDSORT_CACHE_DIR") {
        return dir;
    }
    if let Some(dir) = env("XDG_CACHE_HOME") {
        return dir.join("gridsort");
    }
    match env("HOME") {
        Some(home) => home.join(".cache").join("gridsort"),
        None => PathBuf::from(".gridsort-cache"),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StageTimings {
    pub scan: Duration,
    pub features: Duration,
    pub store: Duration,
}

/// Indexed, decodable images of one scan.
#[derive(Debug, Default)]
pub struct Corpus {
    /// Path order.
    pub records: Vec<ImageRecord>,
    pub descriptors: HashMap<ImageId, Descriptor>,
    pub undecodable: Vec<ImageRecord>,
    pub scan_errors: Vec<ScanError>,
    pub stats: IndexStats,
    pub timings: StageTimings,
}

impl Corpus {
    /// Descriptors aligned with `records`.
    pub fn ordered_descriptors(&self) -> Vec<&Descriptor> {
        self.records.iter().map(|r| &self.descriptors[&r.id]).collect()
    }
}

/// Scans `request`, then looks up or computes every descriptor.
pub fn build_corpus(
    request: &ScanRequest,
    index: &mut FeatureIndex,
    embeddings: Option<&EmbeddingTable>,
    progress: &(dyn Fn(usize, usize) + Sync),
) -> Result<Corpus, PipelineError> {
    let started = Instant::now();
    let outcome = scan(request);
    let scan_time = started.elapsed();
    progress(0, outcome.records.len());

    let run = index_records(&outcome.records, index, embeddings, progress)?;
    let mut corpus = Corpus {
        scan_errors: outcome.errors,
        undecodable: run.undecodable,
        stats: run.stats,
        ..Default::default()
    };
    corpus.timings = StageTimings {
        scan: scan_time,
        features: corpus.stats.feature_time,
        store: corpus.stats.store_time,
    };
    for (record, descriptor) in run.images {
        corpus.descriptors.insert(record.id, descriptor);
        corpus.records.push(record);
    }
    Ok(corpus)
}

/// Loads an embedding sidecar file, fits the projection on it and saves the
/// model next to the index.
pub fn load_embedding_table(path: &Path, cache_dir: &Path) -> Result<EmbeddingTable, FeatureError> {
    let set = load_embeddings(path)?;
    let (table, model) = EmbeddingTable::fit(&set)?;
    save_projection(cache_dir, &model)?;
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SortMode {
    Visual,
    Name,
    Mtime,
    Ctime,
    Size,
}

impl FromStr for SortMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "visual" => SortMode::Visual,
            "name" => SortMode::Name,
            "mtime" => SortMode::Mtime,
            "ctime" => SortMode::Ctime,
            "size" => SortMode::Size,
            other => return Err(format!("unknown sort mode '{other}'")),
        })
    }
}

/// Visual layout of `descriptors` (item `i` is `descriptors[i]`).
/// `on_stage(done, total)` fires after every block stage.
pub fn visual_layout(
    descriptors: &[&Descriptor],
    columns: usize,
    seed: u64,
    on_stage: &mut dyn FnMut(usize, usize),
) -> GridLayout {
    let config = SortConfig {
        seed,
        shuffle: true,
        ..Default::default()
    };
    let combined: Vec<Vec<f64>> = descriptors.iter().map(|d| combine(d, &config.profile)).collect();
    let rows = descriptors.len().div_ceil(columns.max(1));
    let stages = stage_count(columns.max(rows));
    let mut done = 0;
    ssm_sort_observed(&combined, columns, &config, |e| {
        if let SortEvent::StageEnd { .. } = e {
            done += 1;
            on_stage(done, stages);
        }
    })
}

fn stage_count(extent: usize) -> usize {
    let mut block = 1;
    let mut stages = 0;
    while block < extent {
        stages += 1;
        block *= 2;
    }
    stages
}

/// Layout of `records` in metadata order. Items index into `records`.
pub fn metadata_layout(records: &[ImageRecord], key: SortKey, columns: usize) -> GridLayout {
    let position: HashMap<&Path, usize> = records.iter().enumerate().map(|(i, r)| (r.path.as_path(), i)).collect();
    let order: Vec<usize> = sort_by_metadata(records, key, false)
        .iter()
        .map(|r| position[r.path.as_path()])
        .collect();
    GridLayout::from_order(&order, columns)
}

pub fn sort_key(mode: SortMode) -> Option<SortKey> {
    match mode {
        SortMode::Visual => None,
        SortMode::Name => Some(SortKey::Name),
        SortMode::Mtime => Some(SortKey::Mtime),
        SortMode::Ctime => Some(SortKey::Ctime),
        SortMode::Size => Some(SortKey::Size),
    }
}
