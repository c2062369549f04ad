//! Clouds, sessions and their result histories, with optional
//! directory-backed persistence.
//!
//! Layout of a persistence directory:
//!
//! ```text
//! clouds/<cloud_id>.{txt,ply,bin}     uploaded payload, unchanged
//! sessions/<session_id>.json          cloud id, resolution, backend
//! results/<session_id>/<rid>.mask     point mask file
//! results/<session_id>/<rid>.json     result summary
//! ```

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use voxvid_core::cloud::{load_point_mask, save_point_mask, MaskFileError};
use voxvid_core::voxel::{VoxelError, MAX_RESOLUTION, MIN_RESOLUTION};
use voxvid_core::{
    normalize, parse_cloud, segment_3d, BackendError, CloudError, CloudFormat, NormalizationTransform64,
    PipelineError, PointCloud64, PointMask, Prompt3D64, ReferencePropagator, RunParams64, VideoSegmenter,
    VoxelGrid64, VoxelIndex,
};
use voxvid_remote::RemoteSegmenter;

use crate::config::{BackendSpec, ServiceConfig};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown cloud {0}")]
    UnknownCloud(String),
    #[error("resolution {0} outside [{MIN_RESOLUTION}, {MAX_RESOLUTION}]")]
    ResolutionOutOfRange(usize),
    #[error(transparent)]
    Cloud(#[from] CloudError),
    #[error(transparent)]
    Voxel(#[from] VoxelError),
    #[error("cannot create backend: {0}")]
    Backend(#[from] BackendError),
    #[error("persistence failure at {path}: {reason}")]
    Persistence { path: PathBuf, reason: String },
}

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl StoreError {
    fn persistence(path: &Path, reason: impl ToString) -> Self {
        StoreError::Persistence {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        }
    }
}

fn format_tag(format: CloudFormat) -> &'static str {
    match format {
        CloudFormat::Ply => "ply",
        CloudFormat::KittiBin => "bin",
        CloudFormat::XyzrgbText | CloudFormat::Auto => "txt",
    }
}

/// Picks PLY for payloads that start with the PLY magic, text otherwise.
/// KITTI payloads must be named explicitly.
pub fn sniff_format(bytes: &[u8]) -> CloudFormat {
    if bytes.starts_with(b"ply\n") || bytes.starts_with(b"ply\r\n") {
        CloudFormat::Ply
    } else {
        CloudFormat::XyzrgbText
    }
}

/// Content-derived id: the same payload in the same format always maps
/// to the same cloud.
pub fn cloud_id(bytes: &[u8], format: CloudFormat) -> String {
    let mut hasher = Sha256::new();
    hasher.update(format_tag(format).as_bytes());
    hasher.update([0u8]);
    hasher.update(bytes);
    let digest = hasher.finalize();
    format!("c{}", &hex::encode(digest.as_slice())[..24])
}

#[derive(Debug)]
pub struct StoredCloud {
    pub id: String,
    pub format: CloudFormat,
    pub original: PointCloud64,
    pub normalized: PointCloud64,
    pub transform: NormalizationTransform64,
}

impl StoredCloud {
    fn parse(bytes: &[u8], format: CloudFormat) -> Result<Self, CloudError> {
        let format = match format {
            CloudFormat::Auto => sniff_format(bytes),
            f => f,
        };
        let original: PointCloud64 = parse_cloud(bytes, format)?;
        let (normalized, transform) = normalize(&original)?;
        Ok(Self {
            id: cloud_id(bytes, format),
            format,
            original,
            normalized,
            transform,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultSummary {
    pub result_id: String,
    pub prompt_type: String,
    pub selected: usize,
    pub anchor: [usize; 3],
    /// Per view, `null` when it ran or the reason it was skipped.
    pub views: Vec<ViewSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewSummary {
    pub view: String,
    pub frames: usize,
    pub skipped: Option<String>,
}

#[derive(Debug)]
pub struct StoredResult {
    pub summary: ResultSummary,
    pub mask: PointMask,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SessionRecord {
    cloud_id: String,
    resolution: usize,
    backend: BackendSpec,
}

pub struct Session {
    pub id: String,
    pub cloud: Arc<StoredCloud>,
    pub resolution: usize,
    pub backend: BackendSpec,
    pub grid: Arc<VoxelGrid64>,
    segmenter: Arc<dyn VideoSegmenter<f64>>,
    history: RwLock<Vec<Arc<StoredResult>>>,
    busy: AtomicBool,
}

/// Held while a segmentation runs on a session.
pub struct BusyGuard(Arc<Session>);

impl Drop for BusyGuard {
    fn drop(&mut self) {
        self.0.busy.store(false, Ordering::Release);
    }
}

impl Session {
    /// Claims the session for one segmentation; `None` if one is running.
    pub fn try_begin(self: &Arc<Self>) -> Option<BusyGuard> {
        self.busy
            .compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire)
            .ok()
            .map(|_| BusyGuard(Arc::clone(self)))
    }

    pub fn history(&self) -> Vec<Arc<StoredResult>> {
        self.history.read().expect("history lock").clone()
    }

    pub fn result(&self, result_id: &str) -> Option<Arc<StoredResult>> {
        self.history
            .read()
            .expect("history lock")
            .iter()
            .find(|r| r.summary.result_id == result_id)
            .cloned()
    }
}

pub struct Store {
    pub config: ServiceConfig,
    clouds: RwLock<HashMap<String, Arc<StoredCloud>>>,
    sessions: RwLock<HashMap<String, Arc<Session>>>,
}

fn make_segmenter(spec: &BackendSpec, config: &ServiceConfig) -> Result<Arc<dyn VideoSegmenter<f64>>, BackendError> {
    Ok(match spec {
        BackendSpec::Reference => Arc::new(ReferencePropagator),
        BackendSpec::Remote(url) => Arc::new(
            RemoteSegmenter::new(url)?
                .with_deadline(config.deadline())
                .with_retries(config.remote_retries),
        ),
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| StoreError::persistence(dir, e))?;
    }
    let tmp = path.with_extension("partial");
    fs::write(&tmp, bytes).map_err(|e| StoreError::persistence(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| StoreError::persistence(path, e))
}

fn read_dir_sorted(dir: &Path) -> Result<Vec<PathBuf>, StoreError> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| StoreError::persistence(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    paths.sort();
    Ok(paths)
}

fn result_number(id: &str) -> Option<usize> {
    id.strip_prefix('r')?.parse().ok()
}

impl Store {
    /// Opens the store, reloading everything under the persistence
    /// directory if one is configured. Blocks while grids are rebuilt.
    pub fn open(config: ServiceConfig) -> Result<Self, StoreError> {
        let store = Self {
            config,
            clouds: RwLock::default(),
            sessions: RwLock::default(),
        };
        if let Some(dir) = store.config.persistence_dir.clone() {
            store.reload(&dir)?;
        }
        Ok(store)
    }

    fn reload(&self, dir: &Path) -> Result<(), StoreError> {
        for path in read_dir_sorted(&dir.join("clouds"))? {
            let format = match path.extension().and_then(|e| e.to_str()) {
                Some("ply") => CloudFormat::Ply,
                Some("bin") => CloudFormat::KittiBin,
                Some("txt") => CloudFormat::XyzrgbText,
                _ => continue,
            };
            let bytes = fs::read(&path).map_err(|e| StoreError::persistence(&path, e))?;
            let cloud = StoredCloud::parse(&bytes, format)?;
            self.clouds.write().expect("cloud lock").insert(cloud.id.clone(), Arc::new(cloud));
        }
        for path in read_dir_sorted(&dir.join("sessions"))? {
            let Some(id) = path.file_stem().and_then(|s| s.to_str()).map(str::to_string) else {
                continue;
            };
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let text = fs::read_to_string(&path).map_err(|e| StoreError::persistence(&path, e))?;
            let record: SessionRecord = serde_json::from_str(&text).map_err(|e| StoreError::persistence(&path, e))?;
            let session = self.build_session(id.clone(), &record.cloud_id, record.resolution, record.backend)?;

            let mut results = Vec::new();
            for path in read_dir_sorted(&dir.join("results").join(&id))? {
                if path.extension().and_then(|e| e.to_str()) != Some("json") {
                    continue;
                }
                let text = fs::read_to_string(&path).map_err(|e| StoreError::persistence(&path, e))?;
                let summary: ResultSummary =
                    serde_json::from_str(&text).map_err(|e| StoreError::persistence(&path, e))?;
                let mask_path = path.with_extension("mask");
                let mask = load_point_mask(&mask_path).map_err(|e| StoreError::persistence(&mask_path, e))?;
                results.push(Arc::new(StoredResult { summary, mask }));
            }
            results.sort_by_key(|r| result_number(&r.summary.result_id));
            *session.history.write().expect("history lock") = results;
            self.sessions.write().expect("session lock").insert(id, session);
        }
        Ok(())
    }

    pub fn cloud(&self, id: &str) -> Option<Arc<StoredCloud>> {
        self.clouds.read().expect("cloud lock").get(id).cloned()
    }

    pub fn session(&self, id: &str) -> Option<Arc<Session>> {
        self.sessions.read().expect("session lock").get(id).cloned()
    }

    /// Parses and stores a payload. Returns the cloud and whether it is new.
    pub fn add_cloud(&self, bytes: &[u8], format: CloudFormat) -> Result<(Arc<StoredCloud>, bool), StoreError> {
        let resolved = match format {
            CloudFormat::Auto => sniff_format(bytes),
            f => f,
        };
        let id = cloud_id(bytes, resolved);
        if let Some(existing) = self.cloud(&id) {
            return Ok((existing, false));
        }
        let cloud = Arc::new(StoredCloud::parse(bytes, resolved)?);
        if let Some(dir) = &self.config.persistence_dir {
            let path = dir.join("clouds").join(format!("{id}.{}", format_tag(resolved)));
            write_file(&path, bytes)?;
        }
        let mut clouds = self.clouds.write().expect("cloud lock");
        let entry = clouds.entry(id).or_insert(cloud);
        Ok((Arc::clone(entry), true))
    }

    fn build_session(
        &self,
        id: String,
        cloud_id: &str,
        resolution: usize,
        backend: BackendSpec,
    ) -> Result<Arc<Session>, StoreError> {
        let cloud = self.cloud(cloud_id).ok_or_else(|| StoreError::UnknownCloud(cloud_id.to_string()))?;
        if !(MIN_RESOLUTION..=MAX_RESOLUTION).contains(&resolution) {
            return Err(StoreError::ResolutionOutOfRange(resolution));
        }
        let grid = Arc::new(VoxelGrid64::voxelize(&cloud.normalized, resolution)?);
        let segmenter = make_segmenter(&backend, &self.config)?;
        Ok(Arc::new(Session {
            id,
            cloud,
            resolution,
            backend,
            grid,
            segmenter,
            history: RwLock::default(),
            busy: AtomicBool::new(false),
        }))
    }

    /// Voxelizes the cloud once and registers a new session. Blocks.
    pub fn create_session(
        &self,
        cloud_id: &str,
        resolution: Option<usize>,
        backend: Option<BackendSpec>,
    ) -> Result<Arc<Session>, StoreError> {
        let resolution = resolution.unwrap_or(self.config.default_resolution);
        let backend = backend.unwrap_or_else(|| self.config.backend.clone());
        let id = format!("s{}", uuid::Uuid::new_v4().simple());
        let session = self.build_session(id.clone(), cloud_id, resolution, backend)?;
        if let Some(dir) = &self.config.persistence_dir {
            let record = SessionRecord {
                cloud_id: cloud_id.to_string(),
                resolution,
                backend: session.backend.clone(),
            };
            let json = serde_json::to_vec_pretty(&record).expect("record serializes");
            write_file(&dir.join("sessions").join(format!("{id}.json")), &json)?;
        }
        self.sessions.write().expect("session lock").insert(id, Arc::clone(&session));
        Ok(session)
    }

    /// Runs one prompt (already in normalized coordinates) and appends the
    /// result to the session history. The caller holds the busy guard.
    pub fn segment(
        &self,
        _guard: &BusyGuard,
        session: &Session,
        prompt: &Prompt3D64,
        params: &RunParams64,
    ) -> Result<Arc<StoredResult>, SegmentError> {
        let result = segment_3d(&session.cloud.normalized, &session.grid, prompt, &*session.segmenter, params)?;
        let result_id = format!("r{}", session.history.read().expect("history lock").len());
        let summary = ResultSummary {
            result_id: result_id.clone(),
            prompt_type: prompt.kind().to_string(),
            selected: result.selected_count(),
            anchor: anchor_array(result.anchor),
            views: result
                .per_view
                .iter()
                .map(|o| ViewSummary {
                    view: format!("{}", o.view),
                    frames: o.view.len(),
                    skipped: o.skipped.clone(),
                })
                .collect(),
        };
        if let Some(dir) = &self.config.persistence_dir {
            let base = dir.join("results").join(&session.id);
            fs::create_dir_all(&base).map_err(|e| StoreError::persistence(&base, e))?;
            let mask_path = base.join(format!("{result_id}.mask"));
            save_point_mask(&result.point_mask, session.cloud.normalized.len(), &mask_path)
                .map_err(|e: MaskFileError| StoreError::persistence(&mask_path, e))?;
            let json = serde_json::to_vec_pretty(&summary).expect("summary serializes");
            write_file(&base.join(format!("{result_id}.json")), &json)?;
        }
        let stored = Arc::new(StoredResult {
            summary,
            mask: result.point_mask,
        });
        session.history.write().expect("history lock").push(Arc::clone(&stored));
        Ok(stored)
    }
}

fn anchor_array(v: VoxelIndex) -> [usize; 3] {
    [v.i, v.j, v.k]
}
