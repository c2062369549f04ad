//! Point cloud ingestion, normalization and persistence.
//!
//! Clouds are read from whitespace separated `x y z r g b` text, ascii or
//! little-endian binary PLY, and raw KITTI velodyne scans (where the return
//! intensity becomes a gray color). Every loader produces a [`PointCloud`]
//! whose colors live in [0,1].

mod kitti;
mod mask;
mod ply;
mod text;

use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::scalar::Scalar;

pub use kitti::{parse_kitti, write_kitti};
pub use mask::{load_point_mask, parse_point_mask, save_point_mask, MaskFileError, PointMask};
pub use ply::{parse_ply, write_ply};
pub use text::{parse_xyzrgb, write_xyzrgb};

/// Color assigned to points of non-LiDAR sources that carry no color.
pub const NEUTRAL_GRAY: f64 = 0.5;

/// Where a bad record sits in its source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordLocation {
    /// 1-based line number (text formats).
    Line(usize),
    /// Byte offset (binary formats).
    Offset(usize),
}

impl fmt::Display for RecordLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RecordLocation::Line(line) => write!(f, "line {line}"),
            RecordLocation::Offset(offset) => write!(f, "byte offset {offset}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum CloudError {
    #[error("cannot read {path}: {source}")]
    UnreadableFile {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed record at {location}: {reason}")]
    MalformedRecord {
        location: RecordLocation,
        reason: String,
    },
    #[error("unsupported PLY feature: {0}")]
    UnsupportedPlyFeature(String),
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("point cloud is degenerate: all points coincide")]
    DegenerateCloud,
    #[error("invalid point {index}: {reason}")]
    InvalidPoint { index: usize, reason: String },
    #[error("cannot infer cloud format from {0}")]
    UnknownFormat(PathBuf),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

impl CloudError {
    pub(crate) fn malformed(location: RecordLocation, reason: impl Into<String>) -> Self {
        CloudError::MalformedRecord {
            location,
            reason: reason.into(),
        }
    }
}

/// On-disk encodings understood by [`load_cloud`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CloudFormat {
    XyzrgbText,
    Ply,
    KittiBin,
    Auto,
}

impl CloudFormat {
    /// Resolves `Auto` from the file extension; other formats pass through.
    pub fn resolve(self, path: &Path) -> Result<CloudFormat, CloudError> {
        if self != CloudFormat::Auto {
            return Ok(self);
        }
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        match ext.as_deref() {
            Some("txt") | Some("xyz") => Ok(CloudFormat::XyzrgbText),
            Some("ply") => Ok(CloudFormat::Ply),
            Some("bin") => Ok(CloudFormat::KittiBin),
            _ => Err(CloudError::UnknownFormat(path.to_path_buf())),
        }
    }
}

impl std::str::FromStr for CloudFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "xyzrgb_text" | "text" | "txt" => Ok(CloudFormat::XyzrgbText),
            "ply" => Ok(CloudFormat::Ply),
            "kitti_bin" | "kitti" | "bin" => Ok(CloudFormat::KittiBin),
            "auto" => Ok(CloudFormat::Auto),
            other => Err(format!("unknown cloud format `{other}`")),
        }
    }
}

/// Acquisition scenario a cloud came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SourceKind {
    Object,
    Indoor,
    Outdoor,
    Lidar,
    Synthetic,
    #[default]
    Unknown,
}

/// A colored 3D point. Colors are in [0,1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point<S> {
    pub position: [S; 3],
    pub color: [S; 3],
}

impl<S: Scalar> Point<S> {
    pub fn new(position: [S; 3], color: [S; 3]) -> Self {
        Self { position, color }
    }

    pub fn gray(position: [S; 3], level: S) -> Self {
        Self {
            position,
            color: [level; 3],
        }
    }
}

/// A non-empty set of colored points.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud<S> {
    points: Vec<Point<S>>,
    source_kind: SourceKind,
}

impl<S: Scalar> PointCloud<S> {
    /// Validates the points: at least one, finite coordinates, colors in
    /// [0,1], and gray colors for LiDAR sources.
    pub fn new(points: Vec<Point<S>>, source_kind: SourceKind) -> Result<Self, CloudError> {
        if points.is_empty() {
            return Err(CloudError::EmptyCloud);
        }
        for (index, p) in points.iter().enumerate() {
            if p.position.iter().any(|c| !c.is_finite()) {
                return Err(CloudError::InvalidPoint {
                    index,
                    reason: "non-finite coordinate".into(),
                });
            }
            if p.color.iter().any(|&c| !(c >= S::zero() && c <= S::one())) {
                return Err(CloudError::InvalidPoint {
                    index,
                    reason: "color channel outside [0,1]".into(),
                });
            }
            if source_kind == SourceKind::Lidar
                && (p.color[0] != p.color[1] || p.color[1] != p.color[2])
            {
                return Err(CloudError::InvalidPoint {
                    index,
                    reason: "lidar point must be gray".into(),
                });
            }
        }
        Ok(Self {
            points,
            source_kind,
        })
    }

    pub fn points(&self) -> &[Point<S>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false for a constructed cloud; present for API symmetry.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn source_kind(&self) -> SourceKind {
        self.source_kind
    }

    pub fn with_source_kind(mut self, kind: SourceKind) -> Result<Self, CloudError> {
        self.source_kind = kind;
        Self::new(self.points, kind)
    }

    /// Axis-aligned bounding box as `(min, max)`.
    pub fn bounds(&self) -> ([S; 3], [S; 3]) {
        let mut lo = self.points[0].position;
        let mut hi = lo;
        for p in &self.points[1..] {
            for axis in 0..3 {
                lo[axis] = lo[axis].min(p.position[axis]);
                hi[axis] = hi[axis].max(p.position[axis]);
            }
        }
        (lo, hi)
    }

    /// True when every coordinate lies in the unit cube.
    pub fn is_normalized(&self) -> bool {
        self.points.iter().all(|p| {
            p.position
                .iter()
                .all(|&c| c >= S::zero() && c <= S::one())
        })
    }

    fn map_positions(&self, f: impl Fn([S; 3]) -> [S; 3]) -> Self {
        Self {
            points: self
                .points
                .iter()
                .map(|p| Point::new(f(p.position), p.color))
                .collect(),
            source_kind: self.source_kind,
        }
    }
}

/// Uniform scale plus translation taking a cloud's bounding box into the
/// unit cube with its longest side mapped to exactly 1.
///
/// Forward: `(p - origin) / extent`. Inverse: `q * extent + origin`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationTransform<S> {
    origin: [S; 3],
    extent: S,
}

impl<S: Scalar> NormalizationTransform<S> {
    pub fn identity() -> Self {
        Self {
            origin: [S::zero(); 3],
            extent: S::one(),
        }
    }

    /// Builds a transform from its bounding box origin and longest extent.
    pub fn from_parts(origin: [S; 3], extent: S) -> Option<Self> {
        (extent > S::zero() && extent.is_finite() && origin.iter().all(|c| c.is_finite()))
            .then_some(Self { origin, extent })
    }

    /// Translation applied before scaling (the negated bbox minimum).
    pub fn translation(&self) -> [S; 3] {
        self.origin.map(|c| -c)
    }

    pub fn origin(&self) -> [S; 3] {
        self.origin
    }

    pub fn extent(&self) -> S {
        self.extent
    }

    /// Uniform scale factor, `1 / extent`.
    pub fn scale(&self) -> S {
        self.extent.recip()
    }

    pub fn apply(&self, p: [S; 3]) -> [S; 3] {
        [
            (p[0] - self.origin[0]) / self.extent,
            (p[1] - self.origin[1]) / self.extent,
            (p[2] - self.origin[2]) / self.extent,
        ]
    }

    pub fn invert(&self, q: [S; 3]) -> [S; 3] {
        [
            q[0] * self.extent + self.origin[0],
            q[1] * self.extent + self.origin[1],
            q[2] * self.extent + self.origin[2],
        ]
    }

    /// Converts a length in source units to normalized units.
    pub fn apply_length(&self, length: S) -> S {
        length / self.extent
    }

    pub fn invert_length(&self, length: S) -> S {
        length * self.extent
    }

    pub fn denormalize(&self, cloud: &PointCloud<S>) -> PointCloud<S> {
        cloud.map_positions(|q| self.invert(q))
    }
}

/// Maps `cloud` into [0,1]³ anchored at its bbox minimum with one uniform scale.
pub fn normalize<S: Scalar>(
    cloud: &PointCloud<S>,
) -> Result<(PointCloud<S>, NormalizationTransform<S>), CloudError> {
    let (lo, hi) = cloud.bounds();
    let extent = (0..3)
        .map(|axis| hi[axis] - lo[axis])
        .fold(S::zero(), S::max);
    if extent <= S::zero() {
        return Err(CloudError::DegenerateCloud);
    }
    let transform = NormalizationTransform { origin: lo, extent };
    // Clamping only absorbs rounding; the division already lands in [0,1].
    let normalized =
        cloud.map_positions(|p| transform.apply(p).map(|c| c.max(S::zero()).min(S::one())));
    Ok((normalized, transform))
}

/// Reads and parses a cloud from disk.
pub fn load_cloud<S: Scalar>(path: &Path, format: CloudFormat) -> Result<PointCloud<S>, CloudError> {
    let format = format.resolve(path)?;
    let bytes = std::fs::read(path).map_err(|source| CloudError::UnreadableFile {
        path: path.to_path_buf(),
        source,
    })?;
    parse_cloud(&bytes, format)
}

/// Parses an in-memory payload. `Auto` is treated as text.
pub fn parse_cloud<S: Scalar>(bytes: &[u8], format: CloudFormat) -> Result<PointCloud<S>, CloudError> {
    match format {
        CloudFormat::XyzrgbText | CloudFormat::Auto => parse_xyzrgb(bytes),
        CloudFormat::Ply => parse_ply(bytes),
        CloudFormat::KittiBin => parse_kitti(bytes),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(positions: &[[f64; 3]]) -> PointCloud<f64> {
        PointCloud::new(
            positions
                .iter()
                .map(|&p| Point::gray(p, 0.5))
                .collect(),
            SourceKind::Synthetic,
        )
        .unwrap()
    }

    #[test]
    fn normalize_uses_longest_axis() {
        let c = cloud(&[[0.0, 0.0, 0.0], [2.0, 1.0, 1.0], [1.0, 0.5, 0.25]]);
        let (n, t) = normalize(&c).unwrap();
        assert_eq!(t.scale(), 0.5);
        let (lo, hi) = n.bounds();
        assert_eq!(lo, [0.0, 0.0, 0.0]);
        assert_eq!(hi, [1.0, 0.5, 0.5]);
    }

    #[test]
    fn normalize_identity_on_unit_cloud() {
        let c = cloud(&[[0.0, 0.0, 0.0], [1.0, 0.3, 0.7], [0.2, 0.1, 0.4]]);
        let (n, t) = normalize(&c).unwrap();
        assert_eq!(t, NormalizationTransform::identity());
        assert_eq!(n, c);
    }

    #[test]
    fn normalize_rejects_single_repeated_point() {
        let c = cloud(&[[0.3, 0.3, 0.3], [0.3, 0.3, 0.3]]);
        assert!(matches!(normalize(&c), Err(CloudError::DegenerateCloud)));
    }

    #[test]
    fn normalize_round_trips() {
        let c = cloud(&[[-3.5, 10.0, 2.25], [7.125, -1.0, 0.0], [0.1, 0.2, 0.3]]);
        let (n, t) = normalize(&c).unwrap();
        let back = t.denormalize(&n);
        for (a, b) in back.points().iter().zip(c.points()) {
            for axis in 0..3 {
                assert!((a.position[axis] - b.position[axis]).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn cloud_invariants_are_checked() {
        assert!(matches!(
            PointCloud::<f64>::new(vec![], SourceKind::Unknown),
            Err(CloudError::EmptyCloud)
        ));
        let bad_color = Point::new([0.0; 3], [1.5, 0.0, 0.0]);
        assert!(PointCloud::new(vec![bad_color], SourceKind::Unknown).is_err());
        let nan = Point::new([f64::NAN, 0.0, 0.0], [0.0; 3]);
        assert!(PointCloud::new(vec![nan], SourceKind::Unknown).is_err());
        let colored = Point::new([0.0; 3], [1.0, 0.0, 0.0]);
        assert!(PointCloud::new(vec![colored], SourceKind::Lidar).is_err());
    }

    #[test]
    fn auto_format_from_extension() {
        let f = |p: &str| CloudFormat::Auto.resolve(Path::new(p));
        assert_eq!(f("a.txt").unwrap(), CloudFormat::XyzrgbText);
        assert_eq!(f("a.XYZ").unwrap(), CloudFormat::XyzrgbText);
        assert_eq!(f("scan.ply").unwrap(), CloudFormat::Ply);
        assert_eq!(f("000001.bin").unwrap(), CloudFormat::KittiBin);
        assert!(f("model.obj").is_err());
    }
}
