//! Six directional videos swept through a voxel grid from an anchor voxel.
//!
//! For each axis, the slice through the anchor is frame 0 of two videos:
//! one sweeping toward increasing slice indices and one toward decreasing.

use std::fmt;

use thiserror::Error;

use crate::scalar::Scalar;
use crate::voxel::{Axis, Frame, VoxelGrid, VoxelIndex};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VideoError {
    #[error("frame {frame} out of range for a {len}-frame video")]
    FrameOutOfRange { frame: usize, len: usize },
    #[error("pixel ({u}, {v}) outside {width}x{height} frame")]
    PixelOutOfRange {
        u: usize,
        v: usize,
        width: usize,
        height: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Plus,
    Minus,
}

/// One of the six sweeps through the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DirectionalView {
    pub axis: Axis,
    pub sign: Sign,
    pub anchor_slice: usize,
    /// Number of slices along `axis`.
    pub extent: usize,
    /// `(U, V)` pixel dimensions of every frame.
    pub frame_dims: (usize, usize),
}

impl fmt::Display for DirectionalView {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = match self.sign {
            Sign::Plus => '+',
            Sign::Minus => '-',
        };
        write!(f, "{sign}{:?}@{}", self.axis, self.anchor_slice)
    }
}

impl DirectionalView {
    /// Number of frames in this sweep, anchor slice included.
    pub fn len(&self) -> usize {
        match self.sign {
            Sign::Plus => self.extent - self.anchor_slice,
            Sign::Minus => self.anchor_slice + 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid slice index shown by frame `t`.
    pub fn slice_of(&self, t: usize) -> Result<usize, VideoError> {
        if t >= self.len() {
            return Err(VideoError::FrameOutOfRange {
                frame: t,
                len: self.len(),
            });
        }
        Ok(match self.sign {
            Sign::Plus => self.anchor_slice + t,
            Sign::Minus => self.anchor_slice - t,
        })
    }

    /// Inverse of the render addressing: voxel shown at pixel `(u, v)` of frame `t`.
    pub fn frame_pixel_to_voxel(&self, t: usize, u: usize, v: usize) -> Result<VoxelIndex, VideoError> {
        let (width, height) = self.frame_dims;
        if u >= width || v >= height {
            return Err(VideoError::PixelOutOfRange { u, v, width, height });
        }
        Ok(self.axis.voxel_at(self.slice_of(t)?, u, v))
    }

    /// Frame and pixel at which `voxel` appears, if this sweep covers it.
    pub fn voxel_to_frame_pixel(&self, voxel: VoxelIndex) -> Option<(usize, usize, usize)> {
        let (slice, u, v) = self.axis.split(voxel);
        let t = match self.sign {
            Sign::Plus => slice.checked_sub(self.anchor_slice)?,
            Sign::Minus => self.anchor_slice.checked_sub(slice)?,
        };
        (t < self.len() && u < self.frame_dims.0 && v < self.frame_dims.1).then_some((t, u, v))
    }

    /// In-frame pixel of `voxel` ignoring the sweep coordinate.
    pub fn project(&self, voxel: VoxelIndex) -> (usize, usize) {
        let (_, u, v) = self.axis.split(voxel);
        (u, v)
    }
}

/// Ordered frames of one directional view.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence<S> {
    pub view: DirectionalView,
    pub frames: Vec<Frame<S>>,
}

impl<S> FrameSequence<S> {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// The six views for `anchor`, ordered `+X, -X, +Y, -Y, +Z, -Z`.
pub fn build_views<S: Scalar>(grid: &VoxelGrid<S>, anchor: VoxelIndex) -> [DirectionalView; 6] {
    debug_assert!(grid.contains(anchor));
    let view = |axis: Axis, sign: Sign| {
        let (u_axis, v_axis) = axis.frame_axes();
        DirectionalView {
            axis,
            sign,
            anchor_slice: anchor.get(axis),
            extent: grid.extent(axis),
            frame_dims: (grid.extent(u_axis), grid.extent(v_axis)),
        }
    };
    [
        view(Axis::X, Sign::Plus),
        view(Axis::X, Sign::Minus),
        view(Axis::Y, Sign::Plus),
        view(Axis::Y, Sign::Minus),
        view(Axis::Z, Sign::Plus),
        view(Axis::Z, Sign::Minus),
    ]
}

/// Materializes the frames of `view`.
pub fn render_video<S: Scalar>(grid: &VoxelGrid<S>, view: &DirectionalView) -> FrameSequence<S> {
    let frames = (0..view.len())
        .map(|t| {
            let slice = view.slice_of(t).expect("t < len");
            grid.slice(view.axis, slice).expect("slice within extent")
        })
        .collect();
    FrameSequence { view: *view, frames }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::{Point, PointCloud, SourceKind};

    fn grid_with(points: &[[f64; 3]], r: usize) -> VoxelGrid<f64> {
        let pts = points.iter().map(|&p| Point::new(p, [1.0, 0.0, 0.0])).collect();
        VoxelGrid::voxelize(&PointCloud::new(pts, SourceKind::Synthetic).unwrap(), r).unwrap()
    }

    fn find(views: &[DirectionalView; 6], axis: Axis, sign: Sign) -> DirectionalView {
        *views.iter().find(|v| v.axis == axis && v.sign == sign).unwrap()
    }

    #[test]
    fn frame_counts_from_anchor() {
        let grid = grid_with(&[[0.5; 3]], 10);
        let views = build_views(&grid, VoxelIndex::new(5, 5, 3));
        let zp = find(&views, Axis::Z, Sign::Plus);
        let zm = find(&views, Axis::Z, Sign::Minus);
        assert_eq!(zp.len(), 7);
        assert_eq!(zm.len(), 4);
        assert_eq!((0..7).map(|t| zp.slice_of(t).unwrap()).collect::<Vec<_>>(), (3..10).collect::<Vec<_>>());
        assert_eq!((0..4).map(|t| zm.slice_of(t).unwrap()).collect::<Vec<_>>(), vec![3, 2, 1, 0]);
        for axis in Axis::ALL {
            let total = find(&views, axis, Sign::Plus).len() + find(&views, axis, Sign::Minus).len();
            assert_eq!(total, 11);
        }
    }

    #[test]
    fn origin_anchor_has_single_frame_minus_views() {
        let grid = grid_with(&[[0.5; 3]], 6);
        let views = build_views(&grid, VoxelIndex::new(0, 0, 0));
        for v in views.iter().filter(|v| v.sign == Sign::Minus) {
            assert_eq!(v.len(), 1);
        }
    }

    #[test]
    fn render_places_pixels_by_convention() {
        let grid = grid_with(&[[0.5; 3]], 4);
        let views = build_views(&grid, VoxelIndex::new(2, 2, 2));
        let zp = render_video(&grid, &find(&views, Axis::Z, Sign::Plus));
        assert_eq!(zp.len(), 2);
        assert!(zp.frames[0].is_occupied(2, 2));
        assert_eq!(zp.frames[0].occupied_count(), 1);
        assert_eq!(zp.frames[1].occupied_count(), 0);
        let xp = render_video(&grid, &find(&views, Axis::X, Sign::Plus));
        assert!(xp.frames[0].is_occupied(2, 2));
    }

    #[test]
    fn full_grid_minus_from_bottom_is_one_frame() {
        let pts: Vec<[f64; 3]> = (0..64)
            .map(|l| VoxelIndex::from_linear(l, 4).center(4))
            .collect();
        let grid = grid_with(&pts, 4);
        let views = build_views(&grid, VoxelIndex::new(1, 1, 0));
        let zm = render_video(&grid, &find(&views, Axis::Z, Sign::Minus));
        assert_eq!(zm.len(), 1);
        assert_eq!(zm.frames[0].occupied_count(), 16);
    }

    #[test]
    fn pixel_to_voxel_examples() {
        let grid = grid_with(&[[0.5; 3]], 10);
        let views = build_views(&grid, VoxelIndex::new(0, 0, 3));
        let zp = find(&views, Axis::Z, Sign::Plus);
        let zm = find(&views, Axis::Z, Sign::Minus);
        assert_eq!(zp.frame_pixel_to_voxel(2, 1, 0).unwrap(), VoxelIndex::new(1, 0, 5));
        assert_eq!(zm.frame_pixel_to_voxel(2, 1, 0).unwrap(), VoxelIndex::new(1, 0, 1));
        for v in views {
            assert_eq!(v.slice_of(0).unwrap(), v.anchor_slice);
        }
        assert!(matches!(zm.frame_pixel_to_voxel(4, 0, 0), Err(VideoError::FrameOutOfRange { .. })));
        assert!(matches!(zm.frame_pixel_to_voxel(0, 10, 0), Err(VideoError::PixelOutOfRange { .. })));
    }

    #[test]
    fn voxel_to_frame_pixel_inverts() {
        let grid = grid_with(&[[0.5; 3]], 5);
        for view in build_views(&grid, VoxelIndex::new(1, 3, 2)) {
            for t in 0..view.len() {
                for v in 0..5 {
                    for u in 0..5 {
                        let voxel = view.frame_pixel_to_voxel(t, u, v).unwrap();
                        assert_eq!(view.voxel_to_frame_pixel(voxel), Some((t, u, v)));
                    }
                }
            }
        }
    }
}
