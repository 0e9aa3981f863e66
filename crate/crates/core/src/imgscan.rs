//! Image discovery across folder roots, metadata filtering, decoding and
//! thumbnails.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use image::imageops::FilterType;
use image::{ImageReader, RgbImage};
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::id::ImageId;

/// Decoded 8-bit RGB pixels, row-major.
pub type PixelBuffer = RgbImage;

pub const DEFAULT_EXTENSIONS: [&str; 6] = ["png", "jpg", "jpeg", "bmp", "gif", "webp"];

#[derive(Debug, thiserror::Error)]
pub enum ScanError {
    #[error("root not found: {0}")]
    RootNotFound(PathBuf),
    #[error("permission denied: {0}")]
    PermissionDenied(PathBuf),
    #[error("i/o error at {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("cannot decode {path}: {cause}")]
    Decode { path: PathBuf, cause: String },
    #[error("invalid range: lower bound {lo} exceeds upper bound {hi}")]
    InvalidRange { lo: i64, hi: i64 },
}

impl ScanError {
    fn from_io(path: &Path, err: io::Error) -> Self {
        match err.kind() {
            io::ErrorKind::NotFound => ScanError::RootNotFound(path.to_path_buf()),
            io::ErrorKind::PermissionDenied => ScanError::PermissionDenied(path.to_path_buf()),
            _ => ScanError::Io {
                path: path.to_path_buf(),
                source: err,
            },
        }
    }
}

/// One discovered image file. Timestamps are nanoseconds since the Unix epoch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: ImageId,
    pub path: PathBuf,
    pub size_bytes: u64,
    pub mtime: i64,
    pub ctime: i64,
    /// Zero until decoded.
    pub width: u32,
    pub height: u32,
    /// Identifier of the scan root the file was found under.
    pub folder_id: ImageId,
    pub undecodable: bool,
}

impl ImageRecord {
    /// Builds a record from filesystem metadata.
    pub fn from_path(path: &Path, folder_id: ImageId) -> io::Result<Self> {
        let meta = fs::metadata(path)?;
        let mtime = meta.modified().map(system_time_nanos).unwrap_or(0);
        let ctime = creation_time(&meta).unwrap_or(mtime);
        Ok(ImageRecord {
            id: ImageId::from_path(path),
            path: path.to_path_buf(),
            size_bytes: meta.len(),
            mtime,
            ctime,
            width: 0,
            height: 0,
            folder_id,
            undecodable: false,
        })
    }

    pub fn file_name(&self) -> String {
        self.path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default()
    }
}

fn system_time_nanos(t: SystemTime) -> i64 {
    match t.duration_since(UNIX_EPOCH) {
        Ok(d) => d.as_nanos() as i64,
        Err(e) => -(e.duration().as_nanos() as i64),
    }
}

#[cfg(unix)]
fn creation_time(meta: &fs::Metadata) -> Option<i64> {
    use std::os::unix::fs::MetadataExt;
    meta.created()
        .ok()
        .map(system_time_nanos)
        .or_else(|| Some(meta.ctime() * 1_000_000_000 + meta.ctime_nsec()))
}

#[cfg(not(unix))]
fn creation_time(meta: &fs::Metadata) -> Option<i64> {
    meta.created().ok().map(system_time_nanos)
}

/// Inclusive `[lo, hi]` range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Range {
    pub lo: i64,
    pub hi: i64,
}

impl Range {
    pub fn new(lo: i64, hi: i64) -> Result<Self, ScanError> {
        if lo > hi {
            return Err(ScanError::InvalidRange { lo, hi });
        }
        Ok(Range { lo, hi })
    }

    pub fn contains(&self, v: i64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

/// Metadata filter; the default matches everything.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterSpec {
    /// Case-insensitive substring of the file name.
    pub name_substring: Option<String>,
    pub mtime_range: Option<Range>,
    pub ctime_range: Option<Range>,
    pub size_range: Option<Range>,
}

impl FilterSpec {
    pub fn validate(&self) -> Result<(), ScanError> {
        for r in [self.mtime_range, self.ctime_range, self.size_range]
            .into_iter()
            .flatten()
        {
            Range::new(r.lo, r.hi)?;
        }
        Ok(())
    }

    pub fn matches(&self, record: &ImageRecord) -> bool {
        if let Some(needle) = &self.name_substring {
            let name = record.file_name().to_lowercase();
            if !name.contains(&needle.to_lowercase()) {
                return false;
            }
        }
        let in_range = |r: &Option<Range>, v: i64| r.is_none_or(|r| r.contains(v));
        in_range(&self.mtime_range, record.mtime)
            && in_range(&self.ctime_range, record.ctime)
            && in_range(&self.size_range, record.size_bytes as i64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanRequest {
    pub roots: Vec<PathBuf>,
    pub recursive: bool,
    pub filter: FilterSpec,
    /// Lowercase extensions without the dot.
    pub extensions: BTreeSet<String>,
    pub include_hidden: bool,
}

impl ScanRequest {
    pub fn new<I, P>(roots: I, recursive: bool) -> Self
    where
        I: IntoIterator<Item = P>,
        P: Into<PathBuf>,
    {
        ScanRequest {
            roots: roots.into_iter().map(Into::into).collect(),
            recursive,
            filter: FilterSpec::default(),
            extensions: DEFAULT_EXTENSIONS.iter().map(|s| s.to_string()).collect(),
            include_hidden: false,
        }
    }

    pub fn with_filter(mut self, filter: FilterSpec) -> Self {
        self.filter = filter;
        self
    }

    /// Absolute, deduplicated roots. With recursion enabled, roots nested
    /// inside another root are dropped. Roots that cannot be resolved are
    /// returned as errors.
    pub fn normalized_roots(&self) -> (Vec<PathBuf>, Vec<ScanError>) {
        let mut errors = Vec::new();
        let mut roots = BTreeSet::new();
        for root in &self.roots {
            match fs::canonicalize(root) {
                Ok(p) if p.is_dir() => {
                    roots.insert(p);
                }
                Ok(_) => errors.push(ScanError::RootNotFound(root.clone())),
                Err(e) => errors.push(ScanError::from_io(root, e)),
            }
        }
        let roots: Vec<PathBuf> = roots.into_iter().collect();
        if !self.recursive {
            return (roots, errors);
        }
        let kept = roots
            .iter()
            .filter(|r| !roots.iter().any(|o| o != *r && r.starts_with(o)))
            .cloned()
            .collect();
        (kept, errors)
    }

    fn accepts_extension(&self, path: &Path) -> bool {
        path.extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| self.extensions.contains(&e.to_ascii_lowercase()))
    }
}

/// Scan result: records plus per-root (or per-subtree) failures.
#[derive(Debug, Default)]
pub struct ScanOutcome {
    pub records: Vec<ImageRecord>,
    pub errors: Vec<ScanError>,
}

fn is_hidden(name: &std::ffi::OsStr) -> bool {
    name.to_str().is_some_and(|s| s.starts_with('.'))
}

/// Lists all accepted image files under the request's roots. Failing roots
/// are reported without aborting the others. Records come back in path order
/// with each file exactly once.
pub fn scan(request: &ScanRequest) -> ScanOutcome {
    let (roots, mut errors) = request.normalized_roots();
    let mut found: BTreeMap<PathBuf, ImageRecord> = BTreeMap::new();

    for root in &roots {
        let folder_id = ImageId::from_path(root);
        let max_depth = if request.recursive { usize::MAX } else { 1 };
        let walker = WalkDir::new(root)
            .follow_links(false)
            .max_depth(max_depth)
            .sort_by_file_name()
            .into_iter()
            .filter_entry(|e| e.depth() == 0 || request.include_hidden || !is_hidden(e.file_name()));

        for entry in walker {
            let entry = match entry {
                Ok(e) => e,
                Err(err) => {
                    let path = err.path().unwrap_or(root).to_path_buf();
                    let io_err = err
                        .into_io_error()
                        .unwrap_or_else(|| io::Error::other("filesystem loop"));
                    errors.push(ScanError::from_io(&path, io_err));
                    continue;
                }
            };
            let ft = entry.file_type();
            let is_file = ft.is_file() || (ft.is_symlink() && entry.path().is_file());
            if !is_file || !request.accepts_extension(entry.path()) {
                continue;
            }
            if found.contains_key(entry.path()) {
                continue;
            }
            match ImageRecord::from_path(entry.path(), folder_id) {
                Ok(record) => {
                    if request.filter.matches(&record) {
                        found.insert(record.path.clone(), record);
                    }
                }
                Err(e) => errors.push(ScanError::from_io(entry.path(), e)),
            }
        }
    }

    ScanOutcome {
        records: found.into_values().collect(),
        errors,
    }
}

/// Decodes the file to RGB8 and records its dimensions. On failure the
/// record is marked undecodable.
pub fn decode(record: &mut ImageRecord) -> Result<PixelBuffer, ScanError> {
    match decode_path(&record.path) {
        Ok(pixels) => {
            record.width = pixels.width();
            record.height = pixels.height();
            record.undecodable = false;
            Ok(pixels)
        }
        Err(e) => {
            record.undecodable = true;
            Err(e)
        }
    }
}

pub fn decode_path(path: &Path) -> Result<PixelBuffer, ScanError> {
    let decode_err = |cause: String| ScanError::Decode {
        path: path.to_path_buf(),
        cause,
    };
    let reader = ImageReader::open(path)
        .map_err(|e| decode_err(e.to_string()))?
        .with_guessed_format()
        .map_err(|e| decode_err(e.to_string()))?;
    let image = reader.decode().map_err(|e| decode_err(e.to_string()))?;
    let pixels = image.to_rgb8();
    if pixels.width() == 0 || pixels.height() == 0 {
        return Err(decode_err("empty image".into()));
    }
    Ok(pixels)
}

/// Downscales so the longer edge is at most `max_edge`, keeping the aspect
/// ratio. Never upscales.
pub fn thumbnail(pixels: &PixelBuffer, max_edge: u32) -> PixelBuffer {
    assert!(max_edge >= 16, "max_edge must be at least 16");
    let (w, h) = pixels.dimensions();
    let longer = w.max(h);
    if longer <= max_edge {
        return pixels.clone();
    }
    let scale = max_edge as f64 / longer as f64;
    let (tw, th) = if w >= h {
        (max_edge, ((h as f64 * scale).round() as u32).max(1))
    } else {
        (((w as f64 * scale).round() as u32).max(1), max_edge)
    };
    image::imageops::resize(pixels, tw, th, FilterType::Triangle)
}

/// `<cache>/<first 2 hex of id>/<id>.<max_edge>.png`
pub fn thumbnail_cache_path(cache_dir: &Path, id: &ImageId, max_edge: u32) -> PathBuf {
    let hex = id.to_hex();
    cache_dir.join(&hex[..2]).join(format!("{hex}.{max_edge}.png"))
}

/// Loads the cached thumbnail, creating it from the source file on a miss.
pub fn cached_thumbnail(cache_dir: &Path, record: &ImageRecord, max_edge: u32) -> Result<PixelBuffer, ScanError> {
    let path = thumbnail_cache_path(cache_dir, &record.id, max_edge);
    if let Ok(thumb) = decode_path(&path) {
        return Ok(thumb);
    }
    let pixels = decode_path(&record.path)?;
    let thumb = thumbnail(&pixels, max_edge);
    let io_err = |e: io::Error| ScanError::Io {
        path: path.clone(),
        source: e,
    };
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err)?;
    }
    // Write-then-rename so a concurrent reader never sees a partial file.
    let tmp = path.with_extension("png.tmp");
    thumb
        .save_with_format(&tmp, image::ImageFormat::Png)
        .map_err(|e| io_err(io::Error::other(e)))?;
    fs::rename(&tmp, &path).map_err(io_err)?;
    Ok(thumb)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SortKey {
    Name,
    Mtime,
    Ctime,
    Size,
}

/// Stable metadata sort; ties always fall back to ascending path.
pub fn sort_by_metadata(records: &[ImageRecord], key: SortKey, descending: bool) -> Vec<ImageRecord> {
    let mut sorted = records.to_vec();
    sorted.sort_by(|a, b| {
        let primary = match key {
            SortKey::Name => a.file_name().cmp(&b.file_name()),
            SortKey::Mtime => a.mtime.cmp(&b.mtime),
            SortKey::Ctime => a.ctime.cmp(&b.ctime),
            SortKey::Size => a.size_bytes.cmp(&b.size_bytes),
        };
        let primary = if descending { primary.reverse() } else { primary };
        match primary {
            Ordering::Equal => a.path.cmp(&b.path),
            o => o,
        }
    });
    sorted
}
