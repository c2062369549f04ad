use std::io::Write;

use super::{CloudError, Point, PointCloud, RecordLocation, SourceKind};
use crate::scalar::Scalar;

const RECORD_BYTES: usize = 16;

/// Parses a KITTI velodyne scan: packed little-endian `f32` quadruples
/// `(x, y, z, intensity)` with no header.
///
/// Intensity is clamped to [0,1] and copied into all three color channels.
pub fn parse_kitti<S: Scalar>(bytes: &[u8]) -> Result<PointCloud<S>, CloudError> {
    if bytes.is_empty() {
        return Err(CloudError::EmptyCloud);
    }
    let trailing = bytes.len() % RECORD_BYTES;
    if trailing != 0 {
        return Err(CloudError::malformed(
            RecordLocation::Offset(bytes.len() - trailing),
            format!("{trailing} trailing bytes after the last 16-byte record"),
        ));
    }

    let mut points = Vec::with_capacity(bytes.len() / RECORD_BYTES);
    for (idx, record) in bytes.chunks_exact(RECORD_BYTES).enumerate() {
        let mut fields = [0f32; 4];
        for (slot, raw) in fields.iter_mut().zip(record.chunks_exact(4)) {
            *slot = f32::from_le_bytes(raw.try_into().expect("4-byte chunk"));
        }
        let [x, y, z, intensity] = fields;
        let offset = idx * RECORD_BYTES;
        if ![x, y, z].iter().all(|c| c.is_finite()) {
            return Err(CloudError::malformed(
                RecordLocation::Offset(offset),
                "non-finite coordinate",
            ));
        }
        if intensity.is_nan() {
            return Err(CloudError::malformed(RecordLocation::Offset(offset), "NaN intensity"));
        }
        let level = S::lit(intensity.clamp(0.0, 1.0) as f64);
        let position = [x, y, z].map(|c| S::lit(c as f64));
        points.push(Point::gray(position, level));
    }
    PointCloud::new(points, SourceKind::Lidar)
}

/// Writes a cloud in KITTI layout, using the red channel as intensity.
pub fn write_kitti<S: Scalar, W: Write>(cloud: &PointCloud<S>, mut out: W) -> std::io::Result<()> {
    for p in cloud.points() {
        let values = [p.position[0], p.position[1], p.position[2], p.color[0]];
        for v in values {
            let v = v.to_f32().unwrap_or(f32::NAN);
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()
}
