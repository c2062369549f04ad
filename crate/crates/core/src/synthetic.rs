//! Synthetic block scenes with known ground truth.

use rand::Rng;

use crate::cloud::{Point, PointCloud, PointMask, SourceKind};
use crate::prompt::BoxPrompt;
use crate::scalar::Scalar;
use crate::voxel::VoxelIndex;

/// Well separated colors: any two differ by at least 1.0 in RGB distance.
pub const PALETTE: [[f64; 3]; 6] = [
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
    [1.0, 1.0, 0.0],
    [0.0, 1.0, 1.0],
    [1.0, 0.0, 1.0],
];

/// Uniformly colored axis-aligned block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Block {
    /// Inclusive voxel range at the scene resolution.
    pub min: VoxelIndex,
    pub max: VoxelIndex,
    pub color: [f64; 3],
}

impl Block {
    pub fn contains(&self, v: VoxelIndex) -> bool {
        (self.min.i..=self.max.i).contains(&v.i)
            && (self.min.j..=self.max.j).contains(&v.j)
            && (self.min.k..=self.max.k).contains(&v.k)
    }

    pub fn voxels(&self) -> impl Iterator<Item = VoxelIndex> + '_ {
        (self.min.k..=self.max.k).flat_map(move |k| {
            (self.min.j..=self.max.j)
                .flat_map(move |j| (self.min.i..=self.max.i).map(move |i| VoxelIndex::new(i, j, k)))
        })
    }

    pub fn voxel_count(&self) -> usize {
        (self.max.i - self.min.i + 1) * (self.max.j - self.min.j + 1) * (self.max.k - self.min.k + 1)
    }
}

/// A normalized cloud made of blocks, with the block each point came from.
#[derive(Debug, Clone)]
pub struct BlockScene<S> {
    pub cloud: PointCloud<S>,
    pub resolution: usize,
    pub blocks: Vec<Block>,
    pub labels: Vec<usize>,
}

impl<S: Scalar> BlockScene<S> {
    pub fn block_mask(&self, block: usize) -> PointMask {
        PointMask::new(self.labels.iter().map(|&l| l == block).collect())
    }

    /// Bounding box of the block's points as a box prompt.
    pub fn tight_box(&self, block: usize) -> BoxPrompt<S> {
        let mut lo = [S::infinity(); 3];
        let mut hi = [S::neg_infinity(); 3];
        for (p, _) in self.cloud.points().iter().zip(&self.labels).filter(|(_, &l)| l == block) {
            for a in 0..3 {
                lo[a] = lo[a].min(p.position[a]);
                hi[a] = hi[a].max(p.position[a]);
            }
        }
        let two = S::lit(2.0);
        BoxPrompt::axis_aligned([0, 1, 2].map(|a| (lo[a] + hi[a]) / two), [0, 1, 2].map(|a| hi[a] - lo[a]))
    }

    /// Center of the block's middle voxel.
    pub fn block_center(&self, block: usize) -> [S; 3] {
        let b = &self.blocks[block];
        VoxelIndex::new((b.min.i + b.max.i) / 2, (b.min.j + b.max.j) / 2, (b.min.k + b.max.k) / 2)
            .center(self.resolution)
    }
}

/// Fills every voxel of every block with points: one at the voxel center,
/// then `extra_per_voxel` jittered points strictly inside the voxel.
pub fn voxel_block_scene<S: Scalar, R: Rng + ?Sized>(
    resolution: usize,
    blocks: &[Block],
    extra_per_voxel: usize,
    rng: &mut R,
) -> BlockScene<S> {
    let r = resolution as f64;
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (label, block) in blocks.iter().enumerate() {
        let color = block.color.map(S::lit);
        for v in block.voxels() {
            let center = [v.i, v.j, v.k].map(|c| (c as f64 + 0.5) / r);
            points.push(Point::new(center.map(S::lit), color));
            labels.push(label);
            for _ in 0..extra_per_voxel {
                let jittered = center.map(|c| c + rng.gen_range(-0.45..0.45) / r);
                points.push(Point::new(jittered.map(S::lit), color));
                labels.push(label);
            }
        }
    }
    BlockScene {
        cloud: PointCloud::new(points, SourceKind::Synthetic).expect("block scene is a valid cloud"),
        resolution,
        blocks: blocks.to_vec(),
        labels,
    }
}

/// Random block with sides of 1..=`max_side` voxels.
pub fn random_block<R: Rng + ?Sized>(resolution: usize, max_side: usize, color: [f64; 3], rng: &mut R) -> Block {
    let side = |rng: &mut R| rng.gen_range(1..=max_side.min(resolution));
    let (si, sj, sk) = (side(rng), side(rng), side(rng));
    let min = VoxelIndex::new(
        rng.gen_range(0..=resolution - si),
        rng.gen_range(0..=resolution - sj),
        rng.gen_range(0..=resolution - sk),
    );
    Block {
        min,
        max: VoxelIndex::new(min.i + si - 1, min.j + sj - 1, min.k + sk - 1),
        color,
    }
}

/// Scene of `count` random (possibly touching or overlapping) blocks.
pub fn random_block_scene<S: Scalar, R: Rng + ?Sized>(resolution: usize, count: usize, rng: &mut R) -> BlockScene<S> {
    let max_side = (resolution / 3).max(1);
    let blocks: Vec<Block> = (0..count)
        .map(|_| {
            let color = PALETTE[rng.gen_range(0..PALETTE.len())];
            random_block(resolution, max_side, color, rng)
        })
        .collect();
    voxel_block_scene(resolution, &blocks, 1, rng)
}

/// Lattice spacing of [`golden_scene`].
pub const GOLDEN_LATTICE: usize = 64;

/// Red, green and blue cubes on a 1/64 lattice: red spans [0,0.25]³,
/// green [0.375,0.625]³ and blue [0.75,1]³. The bounding box is the unit
/// cube, so normalization is the identity.
pub fn golden_scene<S: Scalar>() -> (PointCloud<S>, Vec<usize>) {
    let cubes = [(0usize, 16usize, PALETTE[0]), (24, 40, PALETTE[1]), (48, 64, PALETTE[2])];
    let step = GOLDEN_LATTICE as f64;
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (label, &(lo, hi, color)) in cubes.iter().enumerate() {
        for k in lo..=hi {
            for j in lo..=hi {
                for i in lo..=hi {
                    let pos = [i, j, k].map(|c| S::lit(c as f64 / step));
                    points.push(Point::new(pos, color.map(S::lit)));
                    labels.push(label);
                }
            }
        }
    }
    (
        PointCloud::new(points, SourceKind::Synthetic).expect("golden scene is valid"),
        labels,
    )
}
