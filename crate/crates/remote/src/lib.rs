//! Remote segmentation backend.
//!
//! [`RemoteSegmenter`] implements [`voxvid_core::VideoSegmenter`] by posting
//! each directional video to `POST /v1/segment_video` on a model server.
//! Frames travel as base64 PNGs and masks come back run-length encoded;
//! [`wire`] holds the JSON schema and the codecs in both directions so
//! servers and test doubles can share them.

mod client;
pub mod png;
pub mod wire;

pub use client::{RemoteSegmenter, DEFAULT_DEADLINE, SEGMENT_PATH};
pub use wire::{WireError, WireErrorBody, WireFrame, WireMask, WirePrompt, WireRequest, WireResponse};
