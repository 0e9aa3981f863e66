//! `gridsort index | sort | serve`.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use gridsort_core::imgscan::{FilterSpec, Range, ScanError, ScanRequest};
use gridsort_core::pipeline::EmbeddingTable;
use gridsort_core::store::FeatureIndex;

use crate::api::{self, AppState, ServerConfig};
use crate::engine::{build_corpus, default_cache_dir, load_embedding_table, visual_layout, Corpus};
use crate::render::{manifest, render_montage};

#[derive(Debug, Parser)]
#[command(
    name = "gridsort",
    version,
    about = "Visually sorted browsing of local image folders"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Scan folders and cache descriptors for every image.
    Index(IndexArgs),
    /// Sort folders onto a grid and write a PNG montage plus a JSON manifest.
    Sort(SortArgs),
    /// Serve the browsing API on the loopback interface.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Folders to scan.
    pub paths: Vec<PathBuf>,
    /// Descend into subfolders.
    #[arg(short, long)]
    pub recursive: bool,
    /// Index and thumbnail directory [default: ~/.cache/gridsort].
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Keep files whose name contains this text (case-insensitive).
    #[arg(long)]
    pub filter_name: Option<String>,
    /// Keep files whose size lies in `LO..HI` bytes; K, M and G suffixes are
    /// powers of 1024 and either bound may be omitted.
    #[arg(long, value_parser = parse_size_range)]
    pub filter_size: Option<Range>,
    /// Embedding sidecar file to blend into the descriptors.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
}

impl CorpusArgs {
    fn cache_dir(&self) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(default_cache_dir)
    }

    fn filter(&self) -> FilterSpec {
        FilterSpec {
            name_substring: self.filter_name.clone(),
            size_range: self.filter_size,
            ..Default::default()
        }
    }

    fn request(&self) -> ScanRequest {
        ScanRequest::new(self.paths.clone(), self.recursive).with_filter(self.filter())
    }
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
}

#[derive(Debug, Args)]
pub struct SortArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Grid width.
    #[arg(short, long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(1..))]
    pub columns: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Montage PNG path.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Manifest path [default: output with a .json extension].
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Cell edge in pixels.
    #[arg(long, default_value_t = 128, value_parser = clap::value_parser!(u32).range(16..=2048))]
    pub cell: u32,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(short, long, default_value_t = 7878)]
    pub port: u16,
    /// Seed for visual grids unless a request overrides it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Parses `LO..HI` byte ranges such as `1K..10K`, `..2M` or `500..`.
pub fn parse_size_range(s: &str) -> Result<Range, String> {
    let (lo, hi) = s
        .split_once("..")
        .ok_or_else(|| format!("expected LO..HI, got '{s}'"))?;
    let bound = |t: &str, default: i64| -> Result<i64, String> {
        let t = t.trim();
        if t.is_empty() {
            return Ok(default);
        }
        let (digits, unit) = match t.char_indices().last() {
            Some((i, c)) if c.is_ascii_alphabetic() => (&t[..i], c.to_ascii_uppercase()),
            _ => (t, ' '),
        };
        let factor: i64 = match unit {
            ' ' | 'B' => 1,
            'K' => 1 << 10,
            'M' => 1 << 20,
            'G' => 1 << 30,
            other => return Err(format!("unknown size unit '{other}' in '{t}'")),
        };
        let n: i64 = digits.trim().parse().map_err(|_| format!("'{t}' is not a size"))?;
        if n < 0 {
            return Err(format!("size '{t}' is negative"));
        }
        n.checked_mul(factor).ok_or_else(|| format!("size '{t}' is too large"))
    };
    Range::new(bound(lo, 0)?, bound(hi, i64::MAX)?).map_err(|e| e.to_string())
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Opens the index, loads embeddings and indexes the requested folders.
fn index_corpus(args: &CorpusArgs, err: &mut dyn Write) -> Result<(Corpus, PathBuf), String> {
    let cache_dir = args.cache_dir();
    let embeddings: Option<EmbeddingTable> = match &args.embeddings {
        Some(path) => Some(
            load_embedding_table(path, &cache_dir)
                .map_err(|e| format!("cannot load embeddings from {}: {e}", path.display()))?,
        ),
        None => None,
    };
    let mut index =
        FeatureIndex::open(&cache_dir).map_err(|e| format!("cannot open index in {}: {e}", cache_dir.display()))?;
    if let Some(cause) = index.recovered_from() {
        let _ = writeln!(err, "warning: index was unreadable and starts empty ({cause})");
    }
    let corpus = build_corpus(&args.request(), &mut index, embeddings.as_ref(), &|_, _| {})
        .map_err(|e| format!("indexing failed: {e}"))?;
    Ok((corpus, index.path().to_path_buf()))
}

fn report_scan_errors(corpus: &Corpus, err: &mut dyn Write) -> bool {
    let mut root_failed = false;
    for e in &corpus.scan_errors {
        let _ = writeln!(err, "error: {e}");
        root_failed |= matches!(
            e,
            ScanError::RootNotFound(_) | ScanError::PermissionDenied(_) | ScanError::Io { .. }
        );
    }
    for r in &corpus.undecodable {
        let _ = writeln!(err, "warning: cannot decode {}", r.path.display());
    }
    root_failed
}

/// Runs one command and returns the process exit code.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match cli.command {
        Command::Index(args) => run_index(&args, out, err),
        Command::Sort(args) => run_sort(&args, out, err),
        Command::Serve(args) => run_serve(&args, err),
    };
    match result {
        Ok(code) => code,
        Err(message) => {
            let _ = writeln!(err, "error: {message}");
            1
        }
    }
}

fn run_index(args: &IndexArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, String> {
    let (corpus, index_path) = index_corpus(&args.corpus, err)?;
    let failed = report_scan_errors(&corpus, err);
    let s = &corpus.stats;
    let t = &corpus.timings;
    let w = |e: std::io::Error| e.to_string();
    writeln!(out, "scan: {} files in {:.1} ms", s.records, ms(t.scan)).map_err(w)?;
    writeln!(
        out,
        "decode+features: {} hits, {} misses, {} decodes, {} undecodable in {:.1} ms",
        s.hits,
        s.misses,
        s.decodes,
        s.undecodable,
        ms(t.features)
    )
    .map_err(w)?;
    writeln!(out, "store: {:.1} ms", ms(t.store)).map_err(w)?;
    writeln!(out, "cache hit ratio: {:.1}%", s.hit_ratio() * 100.0).map_err(w)?;
    writeln!(
        out,
        "indexed {} images into {}",
        corpus.records.len(),
        index_path.display()
    )
    .map_err(w)?;
    Ok(if failed { 1 } else { 0 })
}

fn run_sort(args: &SortArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, String> {
    let (corpus, _) = index_corpus(&args.corpus, err)?;
    let failed = report_scan_errors(&corpus, err);
    if corpus.records.is_empty() {
        writeln!(out, "no images to sort; nothing written").map_err(|e| e.to_string())?;
        return Ok(if failed { 1 } else { 0 });
    }
    let columns = args.columns as usize;
    let layout = visual_layout(&corpus.ordered_descriptors(), columns, args.seed, &mut |_, _| {});
    layout
        .validate()
        .map_err(|e| format!("sort produced an invalid layout: {e}"))?;

    let montage = render_montage(&layout, &corpus.records, args.cell);
    write_atomically(&args.output, |tmp| {
        montage
            .save_with_format(tmp, image::ImageFormat::Png)
            .map_err(|e| e.to_string())
    })?;
    let manifest_path = args
        .manifest
        .clone()
        .unwrap_or_else(|| args.output.with_extension("json"));
    let json = serde_json::to_vec_pretty(&manifest(&layout, &corpus.records, args.cell)).map_err(|e| e.to_string())?;
    write_atomically(&manifest_path, |tmp| {
        std::fs::write(tmp, &json).map_err(|e| e.to_string())
    })?;

    writeln!(
        out,
        "sorted {} images onto {} x {} cells; wrote {} and {}",
        layout.len,
        layout.columns,
        layout.rows,
        args.output.display(),
        manifest_path.display()
    )
    .map_err(|e| e.to_string())?;
    Ok(if failed { 1 } else { 0 })
}

fn write_atomically(path: &Path, write: impl FnOnce(&Path) -> Result<(), String>) -> Result<(), String> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    write(&tmp).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    std::fs::rename(&tmp, path).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn run_serve(args: &ServeArgs, err: &mut dyn Write) -> Result<i32, String> {
    let cache_dir = args.corpus.cache_dir();
    let embeddings = match &args.corpus.embeddings {
        Some(path) => {
            Some(Arc::new(load_embedding_table(path, &cache_dir).map_err(|e| {
                format!("cannot load embeddings from {}: {e}", path.display())
            })?))
        }
        None => None,
    };
    let config = ServerConfig {
        cache_dir,
        seed: args.seed,
        embeddings,
    };
    let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    runtime.block_on(async {
        let state = AppState::new(config).map_err(|e| e.to_string())?;
        if !args.corpus.paths.is_empty() {
            let snapshot = state
                .set_roots(args.corpus.paths.clone(), args.corpus.recursive, args.corpus.filter())
                .await
                .map_err(|e| e.body.message)?;
            for e in &snapshot.corpus.scan_errors {
                let _ = writeln!(err, "error: {e}");
            }
        }
        api::serve(state, args.port).await.map_err(|e| e.to_string())
    })?;
    Ok(0)
}
