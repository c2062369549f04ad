//! Promptable 3D segmentation of point clouds.
//!
//! A cloud is normalized into the unit cube and voxelized into a dense
//! colored grid. A point, box or mask prompt fixes an anchor voxel; the
//! three axis-aligned sections through it start six directional videos
//! that sweep the grid toward ±X, ±Y and ±Z. A [`VideoSegmenter`] tracks
//! the prompted region through each video, and the six mask sequences are
//! fused back into a voxel mask and a per-point mask.
//!
//! All geometry is generic over the [`Scalar`] type (`f32` or `f64`);
//! the aliases below fix it to `f64` for convenience.

pub mod backend;
pub mod bitmap;
pub mod cloud;
pub mod oracle;
pub mod pipeline;
pub mod prompt;
pub mod rle;
pub mod scalar;
pub mod synthetic;
pub mod video;
pub mod voxel;

pub use backend::{
    BackendError, PropagationParams, ReferencePropagator, VideoSegmentRequest, VideoSegmentResponse, VideoSegmenter,
};
pub use bitmap::Bitmap;
pub use cloud::{
    load_cloud, normalize, parse_cloud, CloudError, CloudFormat, NormalizationTransform, Point, PointCloud, PointMask,
    SourceKind,
};
pub use pipeline::{fuse_directional, refine, segment_3d, FusionMode, PipelineError, RunParams, SegmentationResult};
pub use prompt::{anchor_of, project_prompt, BoxPrompt, Prompt2D, Prompt3D, PromptError};
pub use scalar::Scalar;
pub use video::{build_views, render_video, DirectionalView, FrameSequence, Sign};
pub use voxel::{Axis, Frame, VoxelGrid, VoxelIndex, VoxelMask};

pub type PointCloud64 = PointCloud<f64>;
pub type PointCloud32 = PointCloud<f32>;
pub type VoxelGrid64 = VoxelGrid<f64>;
pub type VoxelGrid32 = VoxelGrid<f32>;
pub type Prompt3D64 = Prompt3D<f64>;
pub type BoxPrompt64 = BoxPrompt<f64>;
pub type NormalizationTransform64 = NormalizationTransform<f64>;
pub type RunParams64 = RunParams<f64>;
pub type SegmentationResult64 = SegmentationResult<f64>;
pub type SegmentationResult32 = SegmentationResult<f32>;
