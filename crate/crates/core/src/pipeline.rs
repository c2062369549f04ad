//! End-to-end promptable segmentation: anchor the prompt, sweep the grid as
//! six videos, segment each video, and fuse the per-frame masks back into
//! a voxel mask and a per-point mask.

use thiserror::Error;

use crate::backend::{BackendError, PropagationParams, VideoSegmentRequest, VideoSegmentResponse, VideoSegmenter};
use crate::cloud::{PointCloud, PointMask};
use crate::prompt::{anchor_of, mask_centroid, project_prompt, Prompt2D, Prompt3D, PromptError};
use crate::scalar::Scalar;
use crate::video::{build_views, render_video, DirectionalView};
use crate::voxel::{squared_distance, VoxelGrid, VoxelIndex, VoxelMask};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("view {view}: {error}")]
    Backend { view: DirectionalView, error: BackendError },
    #[error("{} of {attempted} views failed, first on {}: {}", failures.len(), failures[0].0, failures[0].1)]
    PartialBackendFailure {
        attempted: usize,
        failures: Vec<(DirectionalView, BackendError)>,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("grid has {grid} points but the cloud has {cloud}")]
    GridCloudMismatch { grid: usize, cloud: usize },
}

impl PipelineError {
    /// The backend error behind this failure, if any.
    pub fn backend_error(&self) -> Option<&BackendError> {
        match self {
            PipelineError::Backend { error, .. } => Some(error),
            PipelineError::PartialBackendFailure { failures, .. } => failures.first().map(|f| &f.1),
            _ => None,
        }
    }
}

/// How the six directional masks are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FusionMode {
    /// A voxel is selected when any view selects it.
    #[default]
    Union,
    /// A voxel is selected when at least `min_views` views select it.
    Vote { min_views: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunParams<S> {
    pub propagation: PropagationParams<S>,
    pub fusion: FusionMode,
    /// Run the six backend calls on separate threads.
    pub parallel: bool,
}

impl<S: Scalar> Default for RunParams<S> {
    fn default() -> Self {
        Self {
            propagation: PropagationParams::default(),
            fusion: FusionMode::Union,
            parallel: true,
        }
    }
}

/// What happened on one directional view.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewOutcome {
    pub view: DirectionalView,
    pub prompt: Option<Prompt2D>,
    /// `None` when the prompt gave this view nothing to seed from.
    pub response: Option<VideoSegmentResponse>,
    pub skipped: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SegmentationResult<S> {
    pub anchor: VoxelIndex,
    pub voxel_mask: VoxelMask,
    pub point_mask: PointMask,
    pub per_view: Vec<ViewOutcome>,
    pub prompt_used: Prompt3D<S>,
    pub params_used: RunParams<S>,
}

impl<S> SegmentationResult<S> {
    pub fn selected_count(&self) -> usize {
        self.point_mask.count_selected()
    }
}

enum ViewRun {
    Done(ViewOutcome),
    /// The prompt left nothing to seed on this view.
    NoSeed(ViewOutcome, PipelineError),
    Failed(DirectionalView, BackendError),
}

fn run_view<S: Scalar, B: VideoSegmenter<S> + ?Sized>(
    view: DirectionalView,
    prompt: &Prompt3D<S>,
    cloud: &PointCloud<S>,
    grid: &VoxelGrid<S>,
    backend: &B,
    params: &PropagationParams<S>,
) -> ViewRun {
    let skipped = |reason: String| ViewOutcome {
        view,
        prompt: None,
        response: None,
        skipped: Some(reason),
    };
    let prompt2d = match project_prompt(prompt, &view, cloud, grid) {
        Ok(p) => p,
        Err(e) => return ViewRun::NoSeed(skipped(e.to_string()), e.into()),
    };
    let frames = render_video(grid, &view);
    let request = VideoSegmentRequest {
        frames,
        prompt: prompt2d,
        params: *params,
    };
    match backend
        .segment_video(&request)
        .and_then(|r| r.conform(&request.frames))
    {
        Ok(response) => ViewRun::Done(ViewOutcome {
            view,
            prompt: Some(request.prompt),
            response: Some(response),
            skipped: None,
        }),
        Err(BackendError::InvalidPrompt(reason)) => {
            let mut outcome = skipped(reason.clone());
            outcome.prompt = Some(request.prompt);
            ViewRun::NoSeed(outcome, PipelineError::Backend {
                view,
                error: BackendError::InvalidPrompt(reason),
            })
        }
        Err(error) => ViewRun::Failed(view, error),
    }
}

fn run_views<S: Scalar, B: VideoSegmenter<S> + ?Sized>(
    views: &[DirectionalView; 6],
    prompt: &Prompt3D<S>,
    cloud: &PointCloud<S>,
    grid: &VoxelGrid<S>,
    backend: &B,
    params: &RunParams<S>,
) -> Vec<ViewRun> {
    let propagation = &params.propagation;
    if !params.parallel {
        return views
            .iter()
            .map(|&v| run_view(v, prompt, cloud, grid, backend, propagation))
            .collect();
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = views
            .iter()
            .map(|&v| scope.spawn(move || run_view(v, prompt, cloud, grid, backend, propagation)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("view worker panicked"))
            .collect()
    })
}

/// Runs all six views from `anchor`. Returns `Ok(None)` when no view had a seed.
fn segment_from_anchor<S: Scalar, B: VideoSegmenter<S> + ?Sized>(
    anchor: VoxelIndex,
    prompt: &Prompt3D<S>,
    cloud: &PointCloud<S>,
    grid: &VoxelGrid<S>,
    backend: &B,
    params: &RunParams<S>,
) -> Result<Result<(VoxelMask, Vec<ViewOutcome>), PipelineError>, PipelineError> {
    let views = build_views(grid, anchor);
    let runs = run_views(&views, prompt, cloud, grid, backend, params);

    let mut outcomes = Vec::with_capacity(6);
    let mut failures = Vec::new();
    let mut first_no_seed = None;
    for run in runs {
        match run {
            ViewRun::Done(o) => outcomes.push(o),
            ViewRun::NoSeed(o, e) => {
                first_no_seed.get_or_insert(e);
                outcomes.push(o);
            }
            ViewRun::Failed(view, error) => failures.push((view, error)),
        }
    }
    if !failures.is_empty() {
        let attempted = outcomes.iter().filter(|o| o.response.is_some()).count() + failures.len();
        return Err(if failures.len() == attempted {
            let (view, error) = failures.swap_remove(0);
            PipelineError::Backend { view, error }
        } else {
            PipelineError::PartialBackendFailure { attempted, failures }
        });
    }

    let answered: Vec<(DirectionalView, &VideoSegmentResponse)> = outcomes
        .iter()
        .filter_map(|o| o.response.as_ref().map(|r| (o.view, r)))
        .collect();
    if answered.is_empty() {
        return Ok(Err(first_no_seed.expect("six views ran")));
    }
    let (fused_views, responses): (Vec<_>, Vec<_>) = answered.into_iter().unzip();
    let voxel_mask = fuse_directional(&responses, &fused_views, grid, params.fusion)?;
    Ok(Ok((voxel_mask, outcomes)))
}

/// Segments `cloud` (already voxelized into `grid`) from one 3D prompt.
///
/// Views whose frame-0 prompt has nothing to seed from are skipped; the
/// call fails only when no view can be seeded. A mask prompt whose anchor
/// sections all miss the mask is re-anchored on the masked voxel nearest
/// its centroid. Any other backend error fails the whole call.
pub fn segment_3d<S: Scalar, B: VideoSegmenter<S> + ?Sized>(
    cloud: &PointCloud<S>,
    grid: &VoxelGrid<S>,
    prompt: &Prompt3D<S>,
    backend: &B,
    params: &RunParams<S>,
) -> Result<SegmentationResult<S>, PipelineError> {
    if grid.point_count() != cloud.len() {
        return Err(PipelineError::GridCloudMismatch {
            grid: grid.point_count(),
            cloud: cloud.len(),
        });
    }
    let mut anchor = anchor_of(prompt, cloud, grid)?;
    let mut attempt = segment_from_anchor(anchor, prompt, cloud, grid, backend, params)?;

    if attempt.is_err() {
        if let Prompt3D::Mask(mask) = prompt {
            if let Some(fallback) = nearest_masked_voxel(cloud, grid, mask) {
                if fallback != anchor {
                    anchor = fallback;
                    attempt = segment_from_anchor(anchor, prompt, cloud, grid, backend, params)?;
                }
            }
        }
    }
    let (voxel_mask, per_view) = attempt?;
    let point_mask = PointMask::new(grid.points_selected_by(&voxel_mask));
    Ok(SegmentationResult {
        anchor,
        voxel_mask,
        point_mask,
        per_view,
        prompt_used: prompt.clone(),
        params_used: *params,
    })
}

/// Masked voxel whose center is nearest the mask centroid; ties go to the
/// lowest linear index.
fn nearest_masked_voxel<S: Scalar>(cloud: &PointCloud<S>, grid: &VoxelGrid<S>, mask: &PointMask) -> Option<VoxelIndex> {
    let centroid = mask_centroid(cloud, mask)?;
    let r = grid.resolution();
    grid.voxelize_selection(mask.bits())
        .iter_set()
        .map(|v| (squared_distance(v.center(r), centroid), v))
        .fold(None, |best: Option<(S, VoxelIndex)>, (d, v)| match best {
            Some((bd, _)) if bd <= d => best,
            _ => Some((d, v)),
        })
        .map(|(_, v)| v)
}

/// Combines per-view masks into a voxel mask restricted to occupied voxels.
pub fn fuse_directional<S: Scalar>(
    responses: &[&VideoSegmentResponse],
    views: &[DirectionalView],
    grid: &VoxelGrid<S>,
    mode: FusionMode,
) -> Result<VoxelMask, PipelineError> {
    if responses.len() != views.len() {
        return Err(PipelineError::DimensionMismatch(format!(
            "{} responses for {} views",
            responses.len(),
            views.len()
        )));
    }
    let r = grid.resolution();
    let mut votes = vec![0u8; r.pow(3)];
    for (response, view) in responses.iter().zip(views) {
        if response.masks.len() != view.len() {
            return Err(PipelineError::DimensionMismatch(format!(
                "view {view} has {} frames but {} masks",
                view.len(),
                response.masks.len()
            )));
        }
        for (t, mask) in response.masks.iter().enumerate() {
            if (mask.width, mask.height) != view.frame_dims {
                return Err(PipelineError::DimensionMismatch(format!(
                    "mask {t} of view {view} is {}x{}",
                    mask.width, mask.height
                )));
            }
            for (u, v) in mask.iter_set() {
                let voxel = view
                    .frame_pixel_to_voxel(t, u, v)
                    .map_err(|e| PipelineError::DimensionMismatch(e.to_string()))?;
                let slot = &mut votes[voxel.linear(r)];
                *slot = slot.saturating_add(1);
            }
        }
    }
    let threshold = match mode {
        FusionMode::Union => 1,
        FusionMode::Vote { min_views } => min_views.clamp(1, u8::MAX as usize) as u8,
    };
    let mut fused = VoxelMask::empty(r);
    for (linear, &count) in votes.iter().enumerate() {
        if count >= threshold && grid.occupancy()[linear] {
            fused.set(VoxelIndex::from_linear(linear, r), true);
        }
    }
    Ok(fused)
}

/// Re-runs segmentation with the previous point mask as a mask prompt.
pub fn refine<S: Scalar, B: VideoSegmenter<S> + ?Sized>(
    result: &SegmentationResult<S>,
    cloud: &PointCloud<S>,
    grid: &VoxelGrid<S>,
    backend: &B,
    params: &RunParams<S>,
) -> Result<SegmentationResult<S>, PipelineError> {
    if !result.point_mask.any() {
        return Err(PromptError::EmptyMaskPrompt.into());
    }
    segment_3d(cloud, grid, &Prompt3D::Mask(result.point_mask.clone()), backend, params)
}
