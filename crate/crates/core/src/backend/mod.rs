//! Frame-sequence segmentation contract.
//!
//! A backend receives one directional video plus a prompt on its first
//! frame and returns one mask per frame. [`ReferencePropagator`] is a
//! deterministic color flood-fill implementation; remote model servers
//! implement the same trait over HTTP.

mod reference;

use std::time::Duration;

use thiserror::Error;

use crate::bitmap::Bitmap;
use crate::prompt::Prompt2D;
use crate::scalar::Scalar;
use crate::video::FrameSequence;

pub use reference::ReferencePropagator;

pub const DEFAULT_COLOR_TOLERANCE: f64 = 0.1;
pub const DEFAULT_SEED_SEARCH_RADIUS: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("backend unavailable after {elapsed:?}: {reason}")]
    BackendUnavailable { elapsed: Duration, reason: String },
    #[error("no usable seed for prompt: {0}")]
    InvalidPrompt(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("protocol error: {0}")]
    ProtocolError(String),
    #[error("remote failure ({status}): {message}")]
    RemoteFailure { status: u16, message: String },
}

/// Tuning of the reference propagator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationParams<S> {
    /// Maximum Euclidean RGB distance to the reference color, in [0,1].
    pub color_tolerance: S,
    /// Chebyshev radius searched around a point prompt on an empty pixel.
    pub seed_search_radius: usize,
}

impl<S: Scalar> Default for PropagationParams<S> {
    fn default() -> Self {
        Self {
            color_tolerance: S::lit(DEFAULT_COLOR_TOLERANCE),
            seed_search_radius: DEFAULT_SEED_SEARCH_RADIUS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoSegmentRequest<S> {
    pub frames: FrameSequence<S>,
    pub prompt: Prompt2D,
    pub params: PropagationParams<S>,
}

impl<S: Scalar> VideoSegmentRequest<S> {
    pub fn validate(&self) -> Result<(), BackendError> {
        let invalid = |m: String| Err(BackendError::InvalidRequest(m));
        let tau = self.params.color_tolerance;
        if !(tau >= S::zero() && tau <= S::one()) {
            return invalid(format!("color tolerance {tau} outside [0,1]"));
        }
        let Some(first) = self.frames.frames.first() else {
            return invalid("video has no frames".into());
        };
        let (w, h) = (first.width, first.height);
        if self.frames.frames.iter().any(|f| f.width != w || f.height != h) {
            return invalid("frames differ in size".into());
        }
        let inside = match &self.prompt {
            Prompt2D::Point { u, v } => *u < w && *v < h,
            Prompt2D::Rect {
                u_min,
                v_min,
                u_max,
                v_max,
            } => u_min <= u_max && v_min <= v_max && *u_max < w && *v_max < h,
            Prompt2D::Mask(m) => m.width == w && m.height == h,
        };
        if !inside {
            return invalid("prompt does not fit frame 0".into());
        }
        Ok(())
    }
}

/// One mask per frame, same dimensions as the frames.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VideoSegmentResponse {
    pub masks: Vec<Bitmap>,
}

impl VideoSegmentResponse {
    /// Checks a response against its request frames and clears every
    /// pixel that is unoccupied in its frame.
    pub fn conform<S: Scalar>(mut self, frames: &FrameSequence<S>) -> Result<Self, BackendError> {
        if self.masks.len() != frames.len() {
            return Err(BackendError::ProtocolError(format!(
                "{} masks returned for {} frames",
                self.masks.len(),
                frames.len()
            )));
        }
        for (t, (mask, frame)) in self.masks.iter_mut().zip(&frames.frames).enumerate() {
            if mask.width != frame.width || mask.height != frame.height {
                return Err(BackendError::ProtocolError(format!(
                    "mask {t} is {}x{}, frame is {}x{}",
                    mask.width, mask.height, frame.width, frame.height
                )));
            }
            mask.intersect(&frame.occupancy);
        }
        Ok(self)
    }
}

/// Segments one directional video from a frame-0 prompt.
pub trait VideoSegmenter<S: Scalar>: Send + Sync {
    fn segment_video(&self, request: &VideoSegmentRequest<S>) -> Result<VideoSegmentResponse, BackendError>;
}

impl<S: Scalar, T: VideoSegmenter<S> + ?Sized> VideoSegmenter<S> for &T {
    fn segment_video(&self, request: &VideoSegmentRequest<S>) -> Result<VideoSegmentResponse, BackendError> {
        (**self).segment_video(request)
    }
}

impl<S: Scalar, T: VideoSegmenter<S> + ?Sized> VideoSegmenter<S> for Box<T> {
    fn segment_video(&self, request: &VideoSegmentRequest<S>) -> Result<VideoSegmentResponse, BackendError> {
        (**self).segment_video(request)
    }
}

impl<S: Scalar, T: VideoSegmenter<S> + ?Sized> VideoSegmenter<S> for std::sync::Arc<T> {
    fn segment_video(&self, request: &VideoSegmentRequest<S>) -> Result<VideoSegmentResponse, BackendError> {
        (**self).segment_video(request)
    }
}
