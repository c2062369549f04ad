//! JSON schema of `POST /v1/segment_video` and conversions to and from
//! the in-process request and response types.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use voxvid_core::video::DirectionalView;
use voxvid_core::{
    rle, Axis, Bitmap, Frame, FrameSequence, Prompt2D, PropagationParams, Scalar, Sign, VideoSegmentRequest,
    VideoSegmentResponse,
};

use crate::png;

#[derive(Debug, Error)]
pub enum WireError {
    #[error("invalid base64 in {field}: {reason}")]
    Base64 { field: String, reason: String },
    #[error("invalid PNG in {field}: {reason}")]
    Png { field: String, reason: String },
    #[error("{field} is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    Dimensions {
        field: String,
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },
    #[error("mask {index}: {reason}")]
    Rle { index: usize, reason: String },
    #[error("request has no frames")]
    NoFrames,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireFrame {
    pub rgb: String,
    pub occupancy: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum WirePrompt {
    Point { point: [usize; 2] },
    Box {
        #[serde(rename = "box")]
        rect: [usize; 4],
    },
    Mask { mask: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireRequest {
    pub width: usize,
    pub height: usize,
    pub frames: Vec<WireFrame>,
    pub prompt: WirePrompt,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireMask {
    pub rle: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireResponse {
    pub masks: Vec<WireMask>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireErrorBody {
    pub error: String,
}

pub fn encode_request<S: Scalar>(request: &VideoSegmentRequest<S>) -> WireRequest {
    let (width, height) = request
        .frames
        .frames
        .first()
        .map(|f| (f.width, f.height))
        .unwrap_or(request.frames.view.frame_dims);
    let frames = request
        .frames
        .frames
        .iter()
        .map(|f| WireFrame {
            rgb: STANDARD.encode(png::rgb_png(f)),
            occupancy: STANDARD.encode(png::binary_png(f.width, f.height, &f.occupancy)),
        })
        .collect();
    let prompt = match &request.prompt {
        Prompt2D::Point { u, v } => WirePrompt::Point { point: [*u, *v] },
        Prompt2D::Rect {
            u_min,
            v_min,
            u_max,
            v_max,
        } => WirePrompt::Box {
            rect: [*u_min, *v_min, *u_max, *v_max],
        },
        Prompt2D::Mask(m) => WirePrompt::Mask {
            mask: STANDARD.encode(png::bitmap_png(m)),
        },
    };
    WireRequest {
        width,
        height,
        frames,
        prompt,
    }
}

fn unbase64(field: &str, data: &str) -> Result<Vec<u8>, WireError> {
    STANDARD.decode(data).map_err(|e| WireError::Base64 {
        field: field.to_string(),
        reason: e.to_string(),
    })
}

fn check_dims(field: &str, got: (usize, usize), want: (usize, usize)) -> Result<(), WireError> {
    if got == want {
        return Ok(());
    }
    Err(WireError::Dimensions {
        field: field.to_string(),
        got_w: got.0,
        got_h: got.1,
        want_w: want.0,
        want_h: want.1,
    })
}

fn png_error(field: &str, e: image::ImageError) -> WireError {
    WireError::Png {
        field: field.to_string(),
        reason: e.to_string(),
    }
}

/// Rebuilds a request on the server side. Colors come back quantized to
/// 8 bits; the view is a placeholder `+Z` sweep of matching length since
/// the wire carries no grid geometry.
pub fn decode_request<S: Scalar>(
    wire: &WireRequest,
    params: PropagationParams<S>,
) -> Result<VideoSegmentRequest<S>, WireError> {
    if wire.frames.is_empty() {
        return Err(WireError::NoFrames);
    }
    let dims = (wire.width, wire.height);
    let mut frames = Vec::with_capacity(wire.frames.len());
    for (t, f) in wire.frames.iter().enumerate() {
        let field = format!("frames[{t}].rgb");
        let (w, h, rgb) = png::decode_rgb_png(&unbase64(&field, &f.rgb)?).map_err(|e| png_error(&field, e))?;
        check_dims(&field, (w, h), dims)?;
        let field = format!("frames[{t}].occupancy");
        let (w, h, occupancy) =
            png::decode_binary_png(&unbase64(&field, &f.occupancy)?).map_err(|e| png_error(&field, e))?;
        check_dims(&field, (w, h), dims)?;
        let colors = rgb
            .into_iter()
            .map(|c| c.map(|b| S::lit(f64::from(b) / 255.0)))
            .collect();
        frames.push(Frame {
            width: w,
            height: h,
            colors,
            occupancy,
        });
    }
    let prompt = match &wire.prompt {
        WirePrompt::Point { point } => Prompt2D::Point {
            u: point[0],
            v: point[1],
        },
        WirePrompt::Box { rect } => Prompt2D::Rect {
            u_min: rect[0],
            v_min: rect[1],
            u_max: rect[2],
            v_max: rect[3],
        },
        WirePrompt::Mask { mask } => {
            let (w, h, bits) =
                png::decode_binary_png(&unbase64("prompt.mask", mask)?).map_err(|e| png_error("prompt.mask", e))?;
            check_dims("prompt.mask", (w, h), dims)?;
            Prompt2D::Mask(Bitmap::from_bits(w, h, bits).expect("decoded PNG matches its dims"))
        }
    };
    let view = DirectionalView {
        axis: Axis::Z,
        sign: Sign::Plus,
        anchor_slice: 0,
        extent: frames.len(),
        frame_dims: dims,
    };
    Ok(VideoSegmentRequest {
        frames: FrameSequence { view, frames },
        prompt,
        params,
    })
}

pub fn encode_response(response: &VideoSegmentResponse) -> WireResponse {
    WireResponse {
        masks: response
            .masks
            .iter()
            .map(|m| WireMask {
                rle: rle::encode(&m.bits),
            })
            .collect(),
    }
}

/// Decodes every mask as a `width`×`height` bitmap. The mask count is not
/// checked here.
pub fn decode_response(wire: &WireResponse, width: usize, height: usize) -> Result<VideoSegmentResponse, WireError> {
    let masks = wire
        .masks
        .iter()
        .enumerate()
        .map(|(index, m)| {
            let bits = rle::decode(&m.rle, width * height).map_err(|e| WireError::Rle {
                index,
                reason: e.to_string(),
            })?;
            Ok(Bitmap::from_bits(width, height, bits).expect("decoded length matches dims"))
        })
        .collect::<Result<_, WireError>>()?;
    Ok(VideoSegmentResponse { masks })
}
