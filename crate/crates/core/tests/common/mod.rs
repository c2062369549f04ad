//! Brute-force reference computations, kept independent of the library's
//! own code paths.

#![allow(dead_code)]

use std::collections::HashSet;

use voxvid_core::{Point, PointCloud, SourceKind, VoxelGrid};

pub type Voxel = (usize, usize, usize);

pub fn floor_cell(c: f64, r: usize) -> usize {
    ((c * r as f64).floor() as isize).clamp(0, r as isize - 1) as usize
}

/// For every voxel, scan all points, keep those inside it, and pick the
/// one nearest the center (lowest index on ties).
pub fn brute_force_colors(cloud: &PointCloud<f64>, r: usize) -> Vec<Option<[f64; 3]>> {
    let mut out = vec![None; r * r * r];
    for k in 0..r {
        for j in 0..r {
            for i in 0..r {
                let center = [(i as f64 + 0.5) / r as f64, (j as f64 + 0.5) / r as f64, (k as f64 + 0.5) / r as f64];
                let mut best: Option<(f64, [f64; 3])> = None;
                for p in cloud.points() {
                    let cell = (floor_cell(p.position[0], r), floor_cell(p.position[1], r), floor_cell(p.position[2], r));
                    if cell != (i, j, k) {
                        continue;
                    }
                    let d: f64 = (0..3).map(|a| (p.position[a] - center[a]).powi(2)).sum();
                    if best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, p.color));
                    }
                }
                out[i + r * (j + r * k)] = best.map(|b| b.1);
            }
        }
    }
    out
}

/// 6-connected flood fill over occupied voxels within `tol` of `reference`.
pub fn component_3d(grid: &VoxelGrid<f64>, seed: Voxel, reference: [f64; 3], tol: f64) -> HashSet<Voxel> {
    let r = grid.resolution() as isize;
    let ok = |v: Voxel| {
        let idx = voxvid_core::VoxelIndex::new(v.0, v.1, v.2);
        grid.is_occupied(idx) && {
            let c = grid.color(idx);
            ((c[0] - reference[0]).powi(2) + (c[1] - reference[1]).powi(2) + (c[2] - reference[2]).powi(2)).sqrt() <= tol
        }
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

pub fn set_of(mask: &voxvid_core::VoxelMask) -> HashSet<Voxel> {
    mask.iter_set().map(|v| (v.i, v.j, v.k)).collect()
}

pub fn cloud_from(points: &[([f64; 3], [f64; 3])]) -> PointCloud<f64> {
    PointCloud::new(points.iter().map(|&(p, c)| Point::new(p, c)).collect(), SourceKind::Synthetic).unwrap()
}
