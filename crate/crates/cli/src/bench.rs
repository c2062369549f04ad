use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use voxvid_core::oracle::{color_component, is_subset};
use voxvid_core::synthetic::{random_block_scene, BlockScene};
use voxvid_core::{
    segment_3d, PointMask, Prompt3D64, PropagationParams, ReferencePropagator, RunParams64, SegmentationResult64,
    VoxelGrid64, VoxelIndex, VoxelMask,
};

use crate::{BenchArgs, CliError};

/// Every voxel any view selected, and whether all of them lie in `component`.
fn views_contained(result: &SegmentationResult64, component: &VoxelMask) -> bool {
    result.per_view.iter().all(|o| {
        o.response.as_ref().is_none_or(|resp| {
            resp.masks.iter().enumerate().all(|(t, mask)| {
                mask.iter_set()
                    .all(|(u, v)| o.view.frame_pixel_to_voxel(t, u, v).is_ok_and(|vx| component.get(vx)))
            })
        })
    })
}

fn containment(scene: &BlockScene<f64>, params: &RunParams64, rng: &mut ChaCha8Rng) -> Result<bool, CliError> {
    let grid = VoxelGrid64::voxelize(&scene.cloud, scene.resolution).map_err(|e| CliError::Io(e.to_string()))?;
    let occupied: Vec<VoxelIndex> = grid.occupied_voxels().collect();
    let seed = occupied[rng.gen_range(0..occupied.len())];
    let prompt = Prompt3D64::Point(seed.center(scene.resolution));
    let result = segment_3d(&scene.cloud, &grid, &prompt, &ReferencePropagator, params)
        .map_err(|e| CliError::Backend(e.to_string()))?;
    let component = color_component(&grid, seed, grid.color(seed), params.propagation.color_tolerance);
    Ok(views_contained(&result, &component) && is_subset(&result.voxel_mask, &component))
}

/// Point, tight box and random subset mask on a single solid block.
fn convex(scene: &BlockScene<f64>, params: &RunParams64, rng: &mut ChaCha8Rng) -> Result<[bool; 3], CliError> {
    let r = scene.resolution;
    let grid = VoxelGrid64::voxelize(&scene.cloud, r).map_err(|e| CliError::Io(e.to_string()))?;
    let center = scene.block_center(0);
    let seed = VoxelIndex::containing(center, r);
    let component = color_component(&grid, seed, grid.color(seed), params.propagation.color_tolerance);

    let n = scene.cloud.len();
    let mut subset = PointMask::from_indices(n, (0..n).filter(|_| rng.gen_bool(0.3)));
    if !subset.any() {
        subset.set(rng.gen_range(0..n), true);
    }
    let prompts = [
        Prompt3D64::Point(center),
        Prompt3D64::Box(scene.tight_box(0)),
        Prompt3D64::Mask(subset),
    ];
    let mut out = [false; 3];
    for (slot, prompt) in out.iter_mut().zip(&prompts) {
        let result = segment_3d(&scene.cloud, &grid, prompt, &ReferencePropagator, params)
            .map_err(|e| CliError::Backend(e.to_string()))?;
        *slot = result.voxel_mask == component;
    }
    Ok(out)
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

pub fn run(args: &BenchArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if args.max_blocks == 0 {
        return Err(CliError::Io("--max-blocks must be at least 1".into()));
    }
    let io = |e: std::io::Error| CliError::Io(e.to_string());
    let params = RunParams64 {
        propagation: PropagationParams {
            color_tolerance: args.tau,
            ..PropagationParams::default()
        },
        ..RunParams64::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let r = args.resolution;
    let wall = Instant::now();

    writeln!(out, "seed {} | {} scenes | R={r} | tau={}", args.seed, args.scenes, args.tau).map_err(io)?;
    writeln!(out, "{:>5}  {:>6}  {:>11}  {:>6} {:>6} {:>6}  {:>8}", "scene", "blocks", "containment", "point", "box", "mask", "ms")
        .map_err(io)?;
    let (mut contained, mut convex_ok) = (0, 0);
    for s in 0..args.scenes {
        let started = Instant::now();
        let blocks = rng.gen_range(1..=args.max_blocks);
        let multi: BlockScene<f64> = random_block_scene(r, blocks, &mut rng);
        let c = containment(&multi, &params, &mut rng)?;
        let single: BlockScene<f64> = random_block_scene(r, 1, &mut rng);
        let v = convex(&single, &params, &mut rng)?;
        contained += usize::from(c);
        convex_ok += v.iter().filter(|&&ok| ok).count();
        writeln!(
            out,
            "{s:>5}  {blocks:>6}  {:>11}  {:>6} {:>6} {:>6}  {:>8.1}",
            mark(c),
            mark(v[0]),
            mark(v[1]),
            mark(v[2]),
            started.elapsed().as_secs_f64() * 1e3
        )
        .map_err(io)?;
    }
    let failures = (args.scenes - contained) + (3 * args.scenes - convex_ok);
    writeln!(
        out,
        "containment {contained}/{} | convex equality {convex_ok}/{} | wall {:.3} s",
        args.scenes,
        3 * args.scenes,
        wall.elapsed().as_secs_f64()
    )
    .map_err(io)?;
    if failures > 0 {
        return Err(CliError::Check(format!("{failures} oracle checks failed")));
    }
    Ok(())
}
