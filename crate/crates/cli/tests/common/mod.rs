//! Brute-force reference computations for the acceptance suite, written
//! without the library's voxel, prompt or propagation code.

#![allow(dead_code)]

use std::collections::HashSet;

use nalgebra::{Rotation3, Vector3};
use voxvid_core::{PointCloud, VoxelGrid, VoxelIndex};

pub type Voxel = (usize, usize, usize);

pub fn floor_cell(c: f64, r: usize) -> usize {
    ((c * r as f64).floor() as isize).clamp(0, r as isize - 1) as usize
}

pub fn cell_of(p: [f64; 3], r: usize) -> Voxel {
    (floor_cell(p[0], r), floor_cell(p[1], r), floor_cell(p[2], r))
}

/// Per voxel (linear order `i + r(j + r k)`): the points inside it and the
/// color of the one nearest the voxel center, lowest index on ties.
pub fn brute_force_voxels(cloud: &PointCloud<f64>, r: usize) -> Vec<(Vec<usize>, Option<[f64; 3]>)> {
    let mut out = Vec::with_capacity(r * r * r);
    for k in 0..r {
        for j in 0..r {
            for i in 0..r {
                let center = [i, j, k].map(|c| (c as f64 + 0.5) / r as f64);
                let mut members = Vec::new();
                let mut best: Option<(f64, [f64; 3])> = None;
                for (idx, p) in cloud.points().iter().enumerate() {
                    if cell_of(p.position, r) != (i, j, k) {
                        continue;
                    }
                    members.push(idx);
                    let d: f64 = (0..3).map(|a| (p.position[a] - center[a]).powi(2)).sum();
                    if best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, p.color));
                    }
                }
                out.push((members, best.map(|b| b.1)));
            }
        }
    }
    out
}

/// 6-connected flood fill over occupied voxels within `tol` of `reference`.
pub fn component_3d(grid: &VoxelGrid<f64>, seed: Voxel, reference: [f64; 3], tol: f64) -> HashSet<Voxel> {
    let r = grid.resolution() as isize;
    let ok = |v: Voxel| {
        let idx = VoxelIndex::new(v.0, v.1, v.2);
        let c = grid.color(idx);
        grid.is_occupied(idx)
            && ((c[0] - reference[0]).powi(2) + (c[1] - reference[1]).powi(2) + (c[2] - reference[2]).powi(2)).sqrt()
                <= tol
    };
    let mut seen = HashSet::new();
    if !ok(seed) {
        return seen;
    }
    let mut stack = vec![seed];
    seen.insert(seed);
    while let Some((i, j, k)) = stack.pop() {
        for (di, dj, dk) in [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)] {
            let n = (i as isize + di, j as isize + dj, k as isize + dk);
            if n.0 < 0 || n.1 < 0 || n.2 < 0 || n.0 >= r || n.1 >= r || n.2 >= r {
                continue;
            }
            let n = (n.0 as usize, n.1 as usize, n.2 as usize);
            if !seen.contains(&n) && ok(n) {
                seen.insert(n);
                stack.push(n);
            }
        }
    }
    seen
}

/// Bounding rectangle of the eight rotated corners on the plane of axes
/// `(ua, va)`, rotating by `Rz(yaw)·Ry(pitch)·Rx(roll)`.
pub fn corner_footprint(center: [f64; 3], dims: [f64; 3], angles: [f64; 3], ua: usize, va: usize) -> ([f64; 2], [f64; 2]) {
    let rot = Rotation3::from_euler_angles(angles[0], angles[1], angles[2]);
    let mut u = [f64::INFINITY, f64::NEG_INFINITY];
    let mut v = [f64::INFINITY, f64::NEG_INFINITY];
    for sx in [-0.5, 0.5] {
        for sy in [-0.5, 0.5] {
            for sz in [-0.5, 0.5] {
                let p = Vector3::from(center) + rot * Vector3::new(sx * dims[0], sy * dims[1], sz * dims[2]);
                u = [u[0].min(p[ua]), u[1].max(p[ua])];
                v = [v[0].min(p[va]), v[1].max(p[va])];
            }
        }
    }
    (u, v)
}

/// Pixel range covered by `[lo, hi]` at resolution `r`, if any.
pub fn snap(range: [f64; 2], r: usize) -> Option<(usize, usize)> {
    let lo = (range[0] * r as f64).floor().max(0.0);
    let hi = ((range[1] * r as f64).ceil() - 1.0).min(r as f64 - 1.0);
    (hi >= lo && hi >= 0.0).then(|| (lo as usize, hi as usize))
}
