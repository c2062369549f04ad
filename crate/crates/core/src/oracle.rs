//! Brute-force 3D reference computations used to check segmentations.

use crate::scalar::Scalar;
use crate::voxel::{VoxelGrid, VoxelIndex, VoxelMask};

/// 6-connected component of occupied voxels reachable from `seed` whose
/// color lies within `tolerance` of `reference`. Empty if the seed itself
/// does not qualify.
pub fn color_component<S: Scalar>(grid: &VoxelGrid<S>, seed: VoxelIndex, reference: [S; 3], tolerance: S) -> VoxelMask {
    let r = grid.resolution();
    let qualifies = |v: VoxelIndex| {
        if !grid.is_occupied(v) {
            return false;
        }
        let c = grid.color(v);
        let d: S = (0..3).map(|i| (c[i] - reference[i]).powi(2)).fold(S::zero(), |a, b| a + b);
        d.sqrt() <= tolerance
    };
    let mut component = VoxelMask::empty(r);
    if !grid.contains(seed) || !qualifies(seed) {
        return component;
    }
    component.set(seed, true);
    let mut queue = std::collections::VecDeque::from([seed]);
    while let Some(v) = queue.pop_front() {
        let (i, j, k) = (v.i as isize, v.j as isize, v.k as isize);
        for (di, dj, dk) in [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)] {
            let (ni, nj, nk) = (i + di, j + dj, k + dk);
            if [ni, nj, nk].iter().any(|&c| c < 0 || c >= r as isize) {
                continue;
            }
            let n = VoxelIndex::new(ni as usize, nj as usize, nk as usize);
            if !component.get(n) && qualifies(n) {
                component.set(n, true);
                queue.push_back(n);
            }
        }
    }
    component
}

/// True when every voxel set in `inner` is also set in `outer`.
pub fn is_subset(inner: &VoxelMask, outer: &VoxelMask) -> bool {
    inner.bits().iter().zip(outer.bits()).all(|(&a, &b)| !a || b)
}

/// Occupied voxel count by direct scan of the occupancy field.
pub fn count_occupied<S: Scalar>(grid: &VoxelGrid<S>) -> usize {
    grid.occupancy().iter().filter(|&&o| o).count()
}
