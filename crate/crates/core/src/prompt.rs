//! 3D prompts (point, box, mask), their anchor voxels, and their 2D
//! projections onto the first frame of each directional video.

use thiserror::Error;

use crate::bitmap::Bitmap;
use crate::cloud::{PointCloud, PointMask};
use crate::scalar::Scalar;
use crate::video::DirectionalView;
use crate::voxel::{Axis, VoxelGrid, VoxelIndex};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PromptError {
    #[error("mask prompt selects no points")]
    EmptyMaskPrompt,
    #[error("mask prompt has {actual} entries but the cloud has {expected} points")]
    MaskLengthMismatch { expected: usize, actual: usize },
    #[error("prompt outside the grid: {0}")]
    PromptOutsideGrid(String),
    #[error("invalid box prompt: {0}")]
    InvalidBox(String),
}

/// Box prompt: center, full side lengths, and extrinsic x-y-z Euler angles in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxPrompt<S> {
    pub center: [S; 3],
    pub dims: [S; 3],
    pub rotation: [S; 3],
}

impl<S: Scalar> BoxPrompt<S> {
    pub fn axis_aligned(center: [S; 3], dims: [S; 3]) -> Self {
        Self {
            center,
            dims,
            rotation: [S::zero(); 3],
        }
    }

    pub fn is_rotated(&self) -> bool {
        self.rotation.iter().any(|&a| a != S::zero())
    }

    /// Corners after rotating about the center by `Rz(γ)·Ry(β)·Rx(α)`.
    pub fn corners(&self) -> [[S; 3]; 8] {
        let rot = rotation_matrix(self.rotation);
        let half = self.dims.map(|d| d / (S::one() + S::one()));
        let mut out = [[S::zero(); 3]; 8];
        for (n, corner) in out.iter_mut().enumerate() {
            let offset = [0, 1, 2].map(|a| if n >> a & 1 == 1 { half[a] } else { -half[a] });
            let turned = mat_vec(&rot, offset);
            *corner = [0, 1, 2].map(|a| self.center[a] + turned[a]);
        }
        out
    }
}

/// A user prompt in normalized cloud coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum Prompt3D<S> {
    Point([S; 3]),
    Box(BoxPrompt<S>),
    Mask(PointMask),
}

impl<S: Scalar> Prompt3D<S> {
    pub fn kind(&self) -> &'static str {
        match self {
            Prompt3D::Point(_) => "point",
            Prompt3D::Box(_) => "box",
            Prompt3D::Mask(_) => "mask",
        }
    }

    /// Checks the prompt against a cloud of `point_count` points.
    pub fn validate(&self, point_count: usize) -> Result<(), PromptError> {
        let in_unit = |p: &[S; 3]| p.iter().all(|&c| c >= S::zero() && c <= S::one());
        match self {
            Prompt3D::Point(p) => {
                if !in_unit(p) {
                    return Err(PromptError::PromptOutsideGrid(format!(
                        "point ({}, {}, {}) outside the normalized cloud bounds",
                        p[0], p[1], p[2]
                    )));
                }
            }
            Prompt3D::Box(b) => {
                if !b.dims.iter().all(|&d| d > S::zero() && d.is_finite()) {
                    return Err(PromptError::InvalidBox("dimensions must be positive".into()));
                }
                if !b.rotation.iter().all(|a| a.is_finite()) {
                    return Err(PromptError::InvalidBox("rotation must be finite".into()));
                }
                if !in_unit(&b.center) {
                    return Err(PromptError::PromptOutsideGrid(
                        "box center outside the normalized cloud bounds".into(),
                    ));
                }
            }
            Prompt3D::Mask(mask) => {
                if mask.len() != point_count {
                    return Err(PromptError::MaskLengthMismatch {
                        expected: point_count,
                        actual: mask.len(),
                    });
                }
                if !mask.any() {
                    return Err(PromptError::EmptyMaskPrompt);
                }
            }
        }
        Ok(())
    }
}

/// A prompt on frame 0 of one video, in pixel coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Prompt2D {
    Point { u: usize, v: usize },
    /// Inclusive pixel rectangle.
    Rect {
        u_min: usize,
        v_min: usize,
        u_max: usize,
        v_max: usize,
    },
    Mask(Bitmap),
}

/// Unweighted mean position of the masked points.
pub fn mask_centroid<S: Scalar>(cloud: &PointCloud<S>, mask: &PointMask) -> Option<[S; 3]> {
    let mut sum = [S::zero(); 3];
    let mut count = 0usize;
    for (p, _) in cloud.points().iter().zip(mask.bits()).filter(|(_, &m)| m) {
        for axis in 0..3 {
            sum[axis] = sum[axis] + p.position[axis];
        }
        count += 1;
    }
    (count > 0).then(|| sum.map(|s| s / S::from_usize_lossy(count)))
}

/// The voxel the six videos start from.
pub fn anchor_of<S: Scalar>(
    prompt: &Prompt3D<S>,
    cloud: &PointCloud<S>,
    grid: &VoxelGrid<S>,
) -> Result<VoxelIndex, PromptError> {
    prompt.validate(cloud.len())?;
    let r = grid.resolution();
    match prompt {
        Prompt3D::Point(p) => Ok(VoxelIndex::containing(*p, r)),
        Prompt3D::Box(b) => Ok(VoxelIndex::containing(b.center, r)),
        Prompt3D::Mask(mask) => mask_centroid(cloud, mask)
            .map(|c| VoxelIndex::containing(c, r))
            .ok_or(PromptError::EmptyMaskPrompt),
    }
}

/// Continuous `(u, v)` footprint of a box on frames swept along `axis`,
/// as `([u_lo, u_hi], [v_lo, v_hi])`.
pub fn box_footprint<S: Scalar>(b: &BoxPrompt<S>, axis: Axis) -> ([S; 2], [S; 2]) {
    if b.is_rotated() {
        return rotated_box_footprint(b, axis);
    }
    let (ua, va) = axis.frame_axes();
    let two = S::one() + S::one();
    let range = |a: Axis| {
        let half = b.dims[a.index()] / two;
        let c = b.center[a.index()];
        [c - half, c + half]
    };
    (range(ua), range(va))
}

/// Footprint through the 8-corner rotation path, used for any rotation.
pub fn rotated_box_footprint<S: Scalar>(b: &BoxPrompt<S>, axis: Axis) -> ([S; 2], [S; 2]) {
    let (ua, va) = axis.frame_axes();
    let corners = b.corners();
    let bounds = |a: Axis| {
        corners.iter().fold([S::infinity(), S::neg_infinity()], |[lo, hi], c| {
            [lo.min(c[a.index()]), hi.max(c[a.index()])]
        })
    };
    (bounds(ua), bounds(va))
}

/// Inclusive pixel range `[⌊lo·R⌋, min(⌈hi·R⌉−1, R−1)]` clipped to the
/// frame, or `None` when nothing remains.
pub fn snap_range<S: Scalar>(range: [S; 2], resolution: usize) -> Option<(usize, usize)> {
    let r = S::from_usize_lossy(resolution);
    let lo = (range[0] * r).floor().max(S::zero());
    let hi = ((range[1] * r).ceil() - S::one()).min(r - S::one());
    if !(lo <= hi) {
        return None;
    }
    Some((lo.to_usize()?, hi.to_usize()?))
}

/// Projects `prompt` onto frame 0 of `view`.
pub fn project_prompt<S: Scalar>(
    prompt: &Prompt3D<S>,
    view: &DirectionalView,
    cloud: &PointCloud<S>,
    grid: &VoxelGrid<S>,
) -> Result<Prompt2D, PromptError> {
    let r = grid.resolution();
    match prompt {
        Prompt3D::Point(p) => {
            let (u, v) = view.project(VoxelIndex::containing(*p, r));
            Ok(Prompt2D::Point { u, v })
        }
        Prompt3D::Box(b) => {
            let (u_range, v_range) = box_footprint(b, view.axis);
            match (snap_range(u_range, r), snap_range(v_range, r)) {
                (Some((u_min, u_max)), Some((v_min, v_max))) => Ok(Prompt2D::Rect {
                    u_min,
                    v_min,
                    u_max,
                    v_max,
                }),
                _ => Err(PromptError::PromptOutsideGrid(format!(
                    "box footprint on view {view} lies outside the frame"
                ))),
            }
        }
        Prompt3D::Mask(mask) => {
            prompt.validate(cloud.len())?;
            let voxels = grid.voxelize_selection(mask.bits());
            let bits = voxels.slice(view.axis, view.anchor_slice);
            let (w, h) = view.frame_dims;
            let bitmap = Bitmap::from_bits(w, h, bits).expect("slice matches frame dims");
            if bitmap.is_clear() {
                return Err(PromptError::PromptOutsideGrid(format!(
                    "mask prompt does not intersect the anchor section of view {view}"
                )));
            }
            Ok(Prompt2D::Mask(bitmap))
        }
    }
}

type Mat3<S> = [[S; 3]; 3];

fn mat_mul<S: Scalar>(a: &Mat3<S>, b: &Mat3<S>) -> Mat3<S> {
    let mut out = [[S::zero(); 3]; 3];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, cell) in row.iter_mut().enumerate() {
            *cell = a[r][0] * b[0][c] + a[r][1] * b[1][c] + a[r][2] * b[2][c];
        }
    }
    out
}

fn mat_vec<S: Scalar>(m: &Mat3<S>, v: [S; 3]) -> [S; 3] {
    [0, 1, 2].map(|r| m[r][0] * v[0] + m[r][1] * v[1] + m[r][2] * v[2])
}

/// `Rz(γ)·Ry(β)·Rx(α)` for angles `[α, β, γ]`.
pub fn rotation_matrix<S: Scalar>(angles: [S; 3]) -> Mat3<S> {
    let (o, z) = (S::one(), S::zero());
    let (sa, ca) = angles[0].sin_cos();
    let (sb, cb) = angles[1].sin_cos();
    let (sg, cg) = angles[2].sin_cos();
    let rx = [[o, z, z], [z, ca, -sa], [z, sa, ca]];
    let ry = [[cb, z, sb], [z, o, z], [-sb, z, cb]];
    let rz = [[cg, -sg, z], [sg, cg, z], [z, z, o]];
    mat_mul(&rz, &mat_mul(&ry, &rx))
}
