//! Dense cubic voxel grids built from normalized clouds.
//!
//! Each occupied voxel takes the color of the point inside it that lies
//! nearest to the voxel center. The grid keeps the exact point-to-voxel
//! assignment so segmentation results can be carried back to points.

use thiserror::Error;

use crate::cloud::PointCloud;
use crate::scalar::{cell_of, Scalar};

pub const MIN_RESOLUTION: usize = 2;
pub const MAX_RESOLUTION: usize = 1024;
pub const DEFAULT_RESOLUTION: usize = 256;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VoxelError {
    #[error("resolution {0} outside [{MIN_RESOLUTION}, {MAX_RESOLUTION}]")]
    ResolutionOutOfRange(usize),
    #[error("point {index} lies outside the unit cube; normalize the cloud first")]
    NotNormalized { index: usize },
    #[error("slice {index} out of range for axis {axis:?} with extent {extent}")]
    IndexOutOfRange { axis: Axis, index: usize, extent: usize },
    #[error("point index {index} out of range for {len} points")]
    PointIndexOutOfRange { index: usize, len: usize },
}

/// Grid axis. A frame swept along an axis is addressed by the other two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    /// The two in-frame axes `(u, v)` when sweeping along `self`.
    ///
    /// Z: (u,v) = (i,j); X: (u,v) = (j,k); Y: (u,v) = (i,k).
    pub fn frame_axes(self) -> (Axis, Axis) {
        match self {
            Axis::Z => (Axis::X, Axis::Y),
            Axis::X => (Axis::Y, Axis::Z),
            Axis::Y => (Axis::X, Axis::Z),
        }
    }

    /// Voxel at `slice` along this axis and in-frame pixel `(u, v)`.
    pub fn voxel_at(self, slice: usize, u: usize, v: usize) -> VoxelIndex {
        match self {
            Axis::Z => VoxelIndex::new(u, v, slice),
            Axis::X => VoxelIndex::new(slice, u, v),
            Axis::Y => VoxelIndex::new(u, slice, v),
        }
    }

    /// Inverse of [`Axis::voxel_at`]: `(slice, u, v)`.
    pub fn split(self, voxel: VoxelIndex) -> (usize, usize, usize) {
        match self {
            Axis::Z => (voxel.k, voxel.i, voxel.j),
            Axis::X => (voxel.i, voxel.j, voxel.k),
            Axis::Y => (voxel.j, voxel.i, voxel.k),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VoxelIndex {
    pub i: usize,
    pub j: usize,
    pub k: usize,
}

impl VoxelIndex {
    pub const fn new(i: usize, j: usize, k: usize) -> Self {
        Self { i, j, k }
    }

    pub fn get(&self, axis: Axis) -> usize {
        match axis {
            Axis::X => self.i,
            Axis::Y => self.j,
            Axis::Z => self.k,
        }
    }

    /// Voxel containing a normalized position.
    pub fn containing<S: Scalar>(position: [S; 3], resolution: usize) -> Self {
        Self::new(
            cell_of(position[0], resolution),
            cell_of(position[1], resolution),
            cell_of(position[2], resolution),
        )
    }

    pub fn linear(&self, resolution: usize) -> usize {
        self.i + resolution * (self.j + resolution * self.k)
    }

    pub fn from_linear(linear: usize, resolution: usize) -> Self {
        Self::new(
            linear % resolution,
            (linear / resolution) % resolution,
            linear / (resolution * resolution),
        )
    }

    /// Center of this voxel in normalized coordinates.
    pub fn center<S: Scalar>(&self, resolution: usize) -> [S; 3] {
        let r = S::from_usize_lossy(resolution);
        let half = S::lit(0.5);
        [self.i, self.j, self.k].map(|c| (S::from_usize_lossy(c) + half) / r)
    }
}

/// A 2D cut through the grid: colors plus occupancy, row-major in `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame<S> {
    pub width: usize,
    pub height: usize,
    pub colors: Vec<[S; 3]>,
    pub occupancy: Vec<bool>,
}

impl<S: Scalar> Frame<S> {
    pub fn blank(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            colors: vec![[S::zero(); 3]; width * height],
            occupancy: vec![false; width * height],
        }
    }

    pub fn pixel(&self, u: usize, v: usize) -> usize {
        v * self.width + u
    }

    pub fn is_occupied(&self, u: usize, v: usize) -> bool {
        self.occupancy[self.pixel(u, v)]
    }

    pub fn color(&self, u: usize, v: usize) -> [S; 3] {
        self.colors[self.pixel(u, v)]
    }

    pub fn occupied_count(&self) -> usize {
        self.occupancy.iter().filter(|&&o| o).count()
    }
}

/// Boolean field over all voxels of a cubic grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VoxelMask {
    resolution: usize,
    bits: Vec<bool>,
}

impl VoxelMask {
    pub fn empty(resolution: usize) -> Self {
        Self {
            resolution,
            bits: vec![false; resolution.pow(3)],
        }
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn get(&self, voxel: VoxelIndex) -> bool {
        self.bits[voxel.linear(self.resolution)]
    }

    pub fn set(&mut self, voxel: VoxelIndex, value: bool) {
        let idx = voxel.linear(self.resolution);
        self.bits[idx] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn iter_set(&self) -> impl Iterator<Item = VoxelIndex> + '_ {
        let r = self.resolution;
        self.bits
            .iter()
            .enumerate()
            .filter_map(move |(i, &b)| b.then(|| VoxelIndex::from_linear(i, r)))
    }

    /// Bitmap of the slice at `index` along `axis`, addressed like frames.
    pub fn slice(&self, axis: Axis, index: usize) -> Vec<bool> {
        let r = self.resolution;
        let mut out = vec![false; r * r];
        for v in 0..r {
            for u in 0..r {
                out[v * r + u] = self.get(axis.voxel_at(index, u, v));
            }
        }
        out
    }
}

/// Dense `R×R×R` grid of colored voxels with point bookkeeping.
#[derive(Debug, Clone)]
pub struct VoxelGrid<S> {
    resolution: usize,
    colors: Vec<[S; 3]>,
    occupancy: Vec<bool>,
    point_voxel: Vec<usize>,
    /// Sorted linear indices of occupied voxels.
    occupied: Vec<usize>,
    /// `members[offsets[n]..offsets[n + 1]]` are the points of `occupied[n]`.
    offsets: Vec<usize>,
    members: Vec<usize>,
}

impl<S: Scalar> VoxelGrid<S> {
    /// Voxelizes a normalized cloud at `resolution` cells per axis.
    pub fn voxelize(cloud: &PointCloud<S>, resolution: usize) -> Result<Self, VoxelError> {
        if !(MIN_RESOLUTION..=MAX_RESOLUTION).contains(&resolution) {
            return Err(VoxelError::ResolutionOutOfRange(resolution));
        }
        let cells = resolution.pow(3);
        let mut point_voxel = Vec::with_capacity(cloud.len());
        for (index, p) in cloud.points().iter().enumerate() {
            if p.position.iter().any(|&c| !(c >= S::zero() && c <= S::one())) {
                return Err(VoxelError::NotNormalized { index });
            }
            point_voxel.push(VoxelIndex::containing(p.position, resolution).linear(resolution));
        }

        let mut order: Vec<usize> = (0..cloud.len()).collect();
        order.sort_by_key(|&p| point_voxel[p]);

        let mut colors = vec![[S::zero(); 3]; cells];
        let mut occupancy = vec![false; cells];
        let mut occupied = Vec::new();
        let mut offsets = vec![0];
        let points = cloud.points();

        for group in order.chunk_by(|&a, &b| point_voxel[a] == point_voxel[b]) {
            let linear = point_voxel[group[0]];
            let center: [S; 3] = VoxelIndex::from_linear(linear, resolution).center(resolution);
            // Members are in ascending point order, so strict `<` keeps the lowest index on ties.
            let mut best = group[0];
            let mut best_dist = squared_distance(points[best].position, center);
            for &p in &group[1..] {
                let d = squared_distance(points[p].position, center);
                if d < best_dist {
                    best = p;
                    best_dist = d;
                }
            }
            colors[linear] = points[best].color;
            occupancy[linear] = true;
            occupied.push(linear);
            offsets.push(offsets.last().unwrap() + group.len());
        }

        Ok(Self {
            resolution,
            colors,
            occupancy,
            point_voxel,
            occupied,
            offsets,
            members: order,
        })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.resolution, self.resolution, self.resolution)
    }

    pub fn extent(&self, _axis: Axis) -> usize {
        self.resolution
    }

    pub fn point_count(&self) -> usize {
        self.point_voxel.len()
    }

    pub fn contains(&self, voxel: VoxelIndex) -> bool {
        voxel.i < self.resolution && voxel.j < self.resolution && voxel.k < self.resolution
    }

    pub fn is_occupied(&self, voxel: VoxelIndex) -> bool {
        self.occupancy[voxel.linear(self.resolution)]
    }

    pub fn color(&self, voxel: VoxelIndex) -> [S; 3] {
        self.colors[voxel.linear(self.resolution)]
    }

    pub fn colors(&self) -> &[[S; 3]] {
        &self.colors
    }

    pub fn occupancy(&self) -> &[bool] {
        &self.occupancy
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.len()
    }

    pub fn occupied_voxels(&self) -> impl Iterator<Item = VoxelIndex> + '_ {
        self.occupied
            .iter()
            .map(|&l| VoxelIndex::from_linear(l, self.resolution))
    }

    pub fn voxel_of_point(&self, point_index: usize) -> Result<VoxelIndex, VoxelError> {
        self.point_voxel
            .get(point_index)
            .map(|&l| VoxelIndex::from_linear(l, self.resolution))
            .ok_or(VoxelError::PointIndexOutOfRange {
                index: point_index,
                len: self.point_voxel.len(),
            })
    }

    /// Points inside `voxel`, ascending. Empty for unoccupied voxels.
    pub fn points_in(&self, voxel: VoxelIndex) -> &[usize] {
        let linear = voxel.linear(self.resolution);
        match self.occupied.binary_search(&linear) {
            Ok(n) => &self.members[self.offsets[n]..self.offsets[n + 1]],
            Err(_) => &[],
        }
    }

    /// The frame at `index` along `axis`.
    pub fn slice(&self, axis: Axis, index: usize) -> Result<Frame<S>, VoxelError> {
        let r = self.resolution;
        if index >= r {
            return Err(VoxelError::IndexOutOfRange {
                axis,
                index,
                extent: r,
            });
        }
        let mut frame = Frame::blank(r, r);
        for v in 0..r {
            for u in 0..r {
                let linear = axis.voxel_at(index, u, v).linear(r);
                let px = v * r + u;
                frame.colors[px] = self.colors[linear];
                frame.occupancy[px] = self.occupancy[linear];
            }
        }
        Ok(frame)
    }

    /// Marks every voxel containing at least one selected point.
    pub fn voxelize_selection(&self, selected: &[bool]) -> VoxelMask {
        let mut mask = VoxelMask::empty(self.resolution);
        for (p, _) in selected.iter().enumerate().filter(|(_, &s)| s) {
            if let Some(&linear) = self.point_voxel.get(p) {
                mask.bits[linear] = true;
            }
        }
        mask
    }

    /// Per-point lookup of a voxel mask.
    pub fn points_selected_by(&self, mask: &VoxelMask) -> Vec<bool> {
        self.point_voxel.iter().map(|&l| mask.bits[l]).collect()
    }
}

pub(crate) fn squared_distance<S: Scalar>(a: [S; 3], b: [S; 3]) -> S {
    let d0 = a[0] - b[0];
    let d1 = a[1] - b[1];
    let d2 = a[2] - b[2];
    d0 * d0 + d1 * d1 + d2 * d2
}
