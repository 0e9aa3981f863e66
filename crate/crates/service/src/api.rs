//! Loopback HTTP API over one browsing session.

use std::collections::{BTreeSet, HashMap};
use std::io::Cursor;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU8, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use gridsort_core::features::{Descriptor, WeightProfile};
use gridsort_core::imgscan::{cached_thumbnail, FilterSpec, ImageRecord, ScanRequest};
use gridsort_core::pipeline::EmbeddingTable;
use gridsort_core::search::{rank, QuerySet};
use gridsort_core::sortgrid::GridLayout;
use gridsort_core::store::FeatureIndex;
use gridsort_core::ImageId;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::engine::{build_corpus, metadata_layout, sort_key, visual_layout, Corpus, SortMode};
use crate::error::ApiError;

pub const DEFAULT_THUMB_EDGE: u32 = 256;
pub const MAX_THUMB_EDGE: u32 = 4096;

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub cache_dir: PathBuf,
    pub seed: u64,
    pub embeddings: Option<Arc<EmbeddingTable>>,
}

/// Job progress readable without touching session state.
#[derive(Debug, Default)]
pub struct Progress {
    job: AtomicU8,
    running: AtomicBool,
    done: AtomicUsize,
    total: AtomicUsize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobKind {
    Idle,
    Index,
    Sort,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressReport {
    pub job: JobKind,
    pub running: bool,
    pub done: usize,
    pub total: usize,
    pub fraction: f64,
}

impl Progress {
    fn start(&self, kind: JobKind, total: usize) {
        self.job.store(kind as u8, Ordering::SeqCst);
        self.done.store(0, Ordering::SeqCst);
        self.total.store(total, Ordering::SeqCst);
        self.running.store(true, Ordering::SeqCst);
    }

    fn update(&self, done: usize, total: usize) {
        self.total.store(total, Ordering::Relaxed);
        self.done.fetch_max(done, Ordering::Relaxed);
    }

    fn finish(&self) {
        self.running.store(false, Ordering::SeqCst);
    }

    pub fn report(&self) -> ProgressReport {
        let job = match self.job.load(Ordering::SeqCst) {
            1 => JobKind::Index,
            2 => JobKind::Sort,
            _ => JobKind::Idle,
        };
        let running = self.running.load(Ordering::SeqCst);
        let (done, total) = (self.done.load(Ordering::Relaxed), self.total.load(Ordering::Relaxed));
        let fraction = if total == 0 {
            if running {
                0.0
            } else {
                1.0
            }
        } else {
            done as f64 / total as f64
        };
        ProgressReport {
            job,
            running,
            done,
            total,
            fraction,
        }
    }
}

/// Immutable view of the session after one mutation.
#[derive(Debug, Default)]
pub struct Snapshot {
    pub revision: u64,
    pub roots: Vec<PathBuf>,
    pub recursive: bool,
    pub filter: FilterSpec,
    pub corpus: Corpus,
}

pub struct AppState {
    config: ServerConfig,
    index: Mutex<FeatureIndex>,
    snapshot: RwLock<Arc<Snapshot>>,
    /// Serializes session mutations.
    mutations: tokio::sync::Mutex<()>,
    /// Every record seen by a scan, for thumbnail and image lookups.
    known: RwLock<HashMap<ImageId, ImageRecord>>,
    layouts: Mutex<HashMap<(u64, usize, u64), Arc<GridLayout>>>,
    progress: Progress,
}

impl AppState {
    pub fn new(config: ServerConfig) -> Result<Arc<Self>, gridsort_core::store::StoreError> {
        let index = FeatureIndex::open(&config.cache_dir)?;
        if let Some(cause) = index.recovered_from() {
            tracing::warn!("feature index was unreadable and starts empty: {cause}");
        }
        Ok(Arc::new(AppState {
            config,
            index: Mutex::new(index),
            snapshot: RwLock::new(Arc::new(Snapshot::default())),
            mutations: tokio::sync::Mutex::new(()),
            known: RwLock::new(HashMap::new()),
            layouts: Mutex::new(HashMap::new()),
            progress: Progress::default(),
        }))
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.read().unwrap().clone()
    }

    pub fn progress(&self) -> ProgressReport {
        self.progress.report()
    }

    /// Scans and indexes on a blocking thread, reporting through `progress`.
    async fn index_job(self: &Arc<Self>, request: ScanRequest) -> Result<Corpus, ApiError> {
        let state = self.clone();
        let corpus = tokio::task::spawn_blocking(move || {
            let mut index = state.index.lock().unwrap();
            state.progress.start(JobKind::Index, 0);
            let progress = |done, total| state.progress.update(done, total);
            let result = build_corpus(&request, &mut index, state.config.embeddings.as_deref(), &progress);
            state.progress.finish();
            result
        })
        .await
        .map_err(|e| ApiError::internal(format!("index job failed: {e}")))?
        .map_err(|e| ApiError::internal(format!("index job failed: {e}")))?;
        let mut known = self.known.write().unwrap();
        for r in corpus.records.iter().chain(&corpus.undecodable) {
            known.insert(r.id, r.clone());
        }
        Ok(corpus)
    }

    /// Replaces the session roots. Mutations apply one at a time in arrival
    /// order, so the last request wins.
    pub async fn set_roots(
        self: &Arc<Self>,
        roots: Vec<PathBuf>,
        recursive: bool,
        filter: FilterSpec,
    ) -> Result<Arc<Snapshot>, ApiError> {
        let _guard = self.mutations.lock().await;
        let request = ScanRequest::new(roots.clone(), recursive).with_filter(filter.clone());
        let corpus = self.index_job(request).await?;
        let mut slot = self.snapshot.write().unwrap();
        let next = Arc::new(Snapshot {
            revision: slot.revision + 1,
            roots,
            recursive,
            filter,
            corpus,
        });
        *slot = next.clone();
        self.layouts
            .lock()
            .unwrap()
            .retain(|(rev, _, _), _| *rev == next.revision);
        Ok(next)
    }

    async fn visual(
        self: &Arc<Self>,
        snapshot: Arc<Snapshot>,
        columns: usize,
        seed: u64,
    ) -> Result<Arc<GridLayout>, ApiError> {
        let key = (snapshot.revision, columns, seed);
        if let Some(layout) = self.layouts.lock().unwrap().get(&key) {
            return Ok(layout.clone());
        }
        let state = self.clone();
        let layout = tokio::task::spawn_blocking(move || {
            let descriptors = snapshot.corpus.ordered_descriptors();
            state.progress.start(JobKind::Sort, 0);
            let layout = visual_layout(&descriptors, columns, seed, &mut |done, total| {
                state.progress.update(done, total)
            });
            state.progress.finish();
            Arc::new(layout)
        })
        .await
        .map_err(|e| ApiError::internal(format!("sort job failed: {e}")))?;
        self.layouts.lock().unwrap().insert(key, layout.clone());
        Ok(layout)
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/session", get(get_session))
        .route("/session/roots", post(post_roots))
        .route("/grid", get(get_grid))
        .route("/search", post(post_search))
        .route("/thumb/{id}", get(get_thumb))
        .route("/image/{id}", get(get_image))
        .route("/progress", get(get_progress))
        .with_state(state)
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError::bad_request("malformed_request", format!("invalid request body: {e}")))
}

fn parse_id(s: &str) -> Result<ImageId, ApiError> {
    s.parse()
        .map_err(|_| ApiError::bad_request("invalid_id", format!("'{s}' is not a 32-digit lowercase hex image id")))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionSummary {
    pub revision: u64,
    pub roots: Vec<PathBuf>,
    pub recursive: bool,
    pub filter: FilterSpec,
    pub count: usize,
    pub undecodable: usize,
    pub errors: Vec<String>,
    pub hits: usize,
    pub misses: usize,
    pub decodes: usize,
}

impl SessionSummary {
    fn of(s: &Snapshot) -> Self {
        SessionSummary {
            revision: s.revision,
            roots: s.roots.clone(),
            recursive: s.recursive,
            filter: s.filter.clone(),
            count: s.corpus.records.len(),
            undecodable: s.corpus.undecodable.len(),
            errors: s.corpus.scan_errors.iter().map(ToString::to_string).collect(),
            hits: s.corpus.stats.hits,
            misses: s.corpus.stats.misses,
            decodes: s.corpus.stats.decodes,
        }
    }
}

async fn get_session(State(state): State<Arc<AppState>>) -> Json<SessionSummary> {
    Json(SessionSummary::of(&state.snapshot()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RootsBody {
    roots: Vec<PathBuf>,
    #[serde(default)]
    recursive: bool,
    #[serde(default)]
    filter: FilterSpec,
}

async fn post_roots(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<SessionSummary>, ApiError> {
    let body: RootsBody = parse_body(&body)?;
    body.filter
        .validate()
        .map_err(|e| ApiError::bad_request("invalid_filter", e.to_string()))?;
    let snapshot = state.set_roots(body.roots, body.recursive, body.filter).await?;
    Ok(Json(SessionSummary::of(&snapshot)))
}

#[derive(Debug, Deserialize)]
struct GridParams {
    cols: Option<String>,
    mode: Option<String>,
    seed: Option<String>,
}

/// Grid response; `cells[r * columns + c]` is an image id or null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResponse {
    pub revision: u64,
    pub mode: SortMode,
    pub columns: usize,
    pub rows: usize,
    pub count: usize,
    pub cells: Vec<Option<ImageId>>,
}

async fn get_grid(
    State(state): State<Arc<AppState>>,
    Query(params): Query<GridParams>,
) -> Result<Json<GridResponse>, ApiError> {
    let columns: usize = match params.cols.as_deref() {
        None => 8,
        Some(s) => s.parse().ok().filter(|n| *n >= 1).ok_or_else(|| {
            ApiError::bad_request("invalid_columns", format!("cols must be a positive integer, got '{s}'"))
        })?,
    };
    let mode: SortMode = params
        .mode
        .as_deref()
        .unwrap_or("visual")
        .parse()
        .map_err(|e: String| ApiError::bad_request("invalid_mode", e))?;
    let seed: u64 = match params.seed.as_deref() {
        None => state.config.seed,
        Some(s) => s.parse().map_err(|_| {
            ApiError::bad_request("invalid_seed", format!("seed must be an unsigned integer, got '{s}'"))
        })?,
    };

    let snapshot = state.snapshot();
    let records = &snapshot.corpus.records;
    let layout = match sort_key(mode) {
        _ if records.is_empty() => Arc::new(GridLayout::scanline(0, columns)),
        Some(key) => Arc::new(metadata_layout(records, key, columns)),
        None => state.visual(snapshot.clone(), columns, seed).await?,
    };
    layout
        .validate()
        .map_err(|e| ApiError::internal(format!("layout failed validation: {e}")))?;
    Ok(Json(GridResponse {
        revision: snapshot.revision,
        mode,
        columns: layout.columns,
        rows: layout.rows,
        count: layout.len,
        cells: layout.cells.iter().map(|c| c.map(|i| records[i].id)).collect(),
    }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SearchScope {
    roots: Vec<PathBuf>,
    #[serde(default)]
    recursive: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SearchBody {
    query_ids: Vec<String>,
    /// Folders to search instead of the session roots.
    #[serde(default)]
    scope: Option<SearchScope>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub id: ImageId,
    pub distance: f64,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResponse {
    pub revision: u64,
    pub results: Vec<SearchHit>,
    /// Query ids without a known descriptor; they are kept by the caller
    /// but do not contribute to the ranking.
    pub unresolved: Vec<ImageId>,
}

async fn post_search(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<SearchResponse>, ApiError> {
    let body: SearchBody = parse_body(&body)?;
    let query_ids = body
        .query_ids
        .iter()
        .map(|s| parse_id(s))
        .collect::<Result<Vec<_>, _>>()?;
    if query_ids.is_empty() {
        return Err(ApiError::bad_request("empty_query", "query_ids must not be empty"));
    }
    let snapshot = state.snapshot();

    let scoped;
    let (scope_records, scope_descriptors) = match body.scope {
        None => (&snapshot.corpus.records, &snapshot.corpus.descriptors),
        Some(scope) => {
            let request = ScanRequest::new(scope.roots, scope.recursive).with_filter(snapshot.filter.clone());
            scoped = state.index_job(request).await?;
            (&scoped.records, &scoped.descriptors)
        }
    };

    let mut descriptors: HashMap<ImageId, Descriptor> = scope_descriptors.clone();
    for id in &query_ids {
        if let Some(d) = snapshot.corpus.descriptors.get(id) {
            descriptors.entry(*id).or_insert_with(|| d.clone());
        }
    }
    let (resolved, unresolved): (Vec<ImageId>, Vec<ImageId>) =
        query_ids.iter().partition(|id| descriptors.contains_key(id));
    if resolved.is_empty() {
        return Err(
            ApiError::not_found("none of the query ids is known").with_detail(json!({ "unresolved": unresolved }))
        );
    }

    let scope: BTreeSet<ImageId> = scope_records.iter().map(|r| r.id).collect();
    let queries = QuerySet::new(resolved, scope, WeightProfile::search())
        .map_err(|e| ApiError::bad_request("empty_query", e.to_string()))?;
    let ranked = rank(&queries, &descriptors).map_err(|e| ApiError::internal(e.to_string()))?;
    let known = state.known.read().unwrap();
    let results = ranked
        .into_iter()
        .map(|r| SearchHit {
            id: r.id,
            distance: r.distance,
            path: known.get(&r.id).map(|rec| rec.path.clone()).unwrap_or_default(),
        })
        .collect();
    Ok(Json(SearchResponse {
        revision: snapshot.revision,
        results,
        unresolved,
    }))
}

fn known_record(state: &AppState, id: &str) -> Result<ImageRecord, ApiError> {
    let id = parse_id(id)?;
    state
        .known
        .read()
        .unwrap()
        .get(&id)
        .cloned()
        .ok_or_else(|| ApiError::not_found(format!("unknown image id {id}")))
}

#[derive(Debug, Deserialize)]
struct ThumbParams {
    edge: Option<String>,
}

async fn get_thumb(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(params): Query<ThumbParams>,
) -> Result<Response, ApiError> {
    let record = known_record(&state, &id)?;
    let edge: u32 = match params.edge.as_deref() {
        None => DEFAULT_THUMB_EDGE,
        Some(s) => s
            .parse()
            .ok()
            .filter(|e| (16..=MAX_THUMB_EDGE).contains(e))
            .ok_or_else(|| {
                ApiError::bad_request(
                    "invalid_edge",
                    format!("edge must be an integer in 16..={MAX_THUMB_EDGE}, got '{s}'"),
                )
            })?,
    };
    let cache = state.config.cache_dir.join("thumbs");
    let png = tokio::task::spawn_blocking(move || -> Result<Vec<u8>, ApiError> {
        let thumb = cached_thumbnail(&cache, &record, edge)
            .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "undecodable", e.to_string()))?;
        let mut out = Cursor::new(Vec::new());
        thumb
            .write_to(&mut out, image::ImageFormat::Png)
            .map_err(|e| ApiError::internal(e.to_string()))?;
        Ok(out.into_inner())
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

fn content_type(path: &std::path::Path) -> &'static str {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    match ext.as_str() {
        "png" => "image/png",
        "jpg" | "jpeg" => "image/jpeg",
        "gif" => "image/gif",
        "bmp" => "image/bmp",
        "webp" => "image/webp",
        _ => "application/octet-stream",
    }
}

async fn get_image(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let record = known_record(&state, &id)?;
    let bytes = tokio::fs::read(&record.path)
        .await
        .map_err(|e| ApiError::not_found(format!("cannot read {}: {e}", record.path.display())))?;
    Ok(([(header::CONTENT_TYPE, content_type(&record.path))], bytes).into_response())
}

async fn get_progress(State(state): State<Arc<AppState>>) -> Json<ProgressReport> {
    Json(state.progress())
}

/// Serves `router` on `127.0.0.1:port` until the process exits.
pub async fn serve(state: Arc<AppState>, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
    tracing::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
