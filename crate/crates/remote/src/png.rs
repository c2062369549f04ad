//! PNG encoding of frames and binary masks.
//!
//! Pixel `(u, v)` of a frame is image column `u`, row `v`.

use std::io::Cursor;

use image::{GrayImage, ImageFormat, RgbImage};
use voxvid_core::{Bitmap, Frame, Scalar};

/// Quantizes a channel in [0,1] to 8 bits.
pub fn to_byte<S: Scalar>(c: S) -> u8 {
    let c = c.to_f64_lossy().clamp(0.0, 1.0);
    (c * 255.0).round() as u8
}

fn write_png(image: impl Into<image::DynamicImage>) -> Vec<u8> {
    let mut out = Cursor::new(Vec::new());
    image
        .into()
        .write_to(&mut out, ImageFormat::Png)
        .expect("PNG encoding into memory cannot fail");
    out.into_inner()
}

pub fn rgb_png<S: Scalar>(frame: &Frame<S>) -> Vec<u8> {
    let raw: Vec<u8> = frame.colors.iter().flat_map(|c| c.map(to_byte)).collect();
    let img = RgbImage::from_raw(frame.width as u32, frame.height as u32, raw).expect("frame buffer matches dims");
    write_png(img)
}

/// 8-bit gray, 255 where `bits` is set and 0 elsewhere.
pub fn binary_png(width: usize, height: usize, bits: &[bool]) -> Vec<u8> {
    let raw: Vec<u8> = bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
    let img = GrayImage::from_raw(width as u32, height as u32, raw).expect("bit buffer matches dims");
    write_png(img)
}

pub fn bitmap_png(bitmap: &Bitmap) -> Vec<u8> {
    binary_png(bitmap.width, bitmap.height, &bitmap.bits)
}

pub fn decode_rgb_png(bytes: &[u8]) -> Result<(usize, usize, Vec<[u8; 3]>), image::ImageError> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)?.to_rgb8();
    let (w, h) = img.dimensions();
    let pixels = img.pixels().map(|p| p.0).collect();
    Ok((w as usize, h as usize, pixels))
}

/// Any gray level of 128 or more counts as set.
pub fn decode_binary_png(bytes: &[u8]) -> Result<(usize, usize, Vec<bool>), image::ImageError> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)?.to_luma8();
    let (w, h) = img.dimensions();
    let bits = img.pixels().map(|p| p.0[0] >= 128).collect();
    Ok((w as usize, h as usize, bits))
}
