use std::io::Write;

use voxvid_core::{load_cloud, normalize, Axis, VoxelGrid64};
use voxvid_remote::png;

use crate::{CliError, VoxelizeArgs};

fn parse_slice(spec: &str, resolution: usize) -> Result<(Axis, usize), CliError> {
    let bad = || CliError::Io(format!("bad --slice `{spec}` (expected <x|y|z>:<index below {resolution}>)"));
    let (axis, index) = spec.split_once(':').ok_or_else(bad)?;
    let axis = match axis {
        "x" | "X" => Axis::X,
        "y" | "Y" => Axis::Y,
        "z" | "Z" => Axis::Z,
        _ => return Err(bad()),
    };
    let index: usize = index.parse().map_err(|_| bad())?;
    if index >= resolution {
        return Err(bad());
    }
    Ok((axis, index))
}

pub fn run(args: &VoxelizeArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let slices = args
        .slice
        .iter()
        .map(|s| parse_slice(s, args.resolution))
        .collect::<Result<Vec<_>, _>>()?;
    let cloud = load_cloud::<f64>(&args.input.input, args.input.format).map_err(|e| CliError::Io(e.to_string()))?;
    let (normalized, transform) = normalize(&cloud).map_err(|e| CliError::Io(e.to_string()))?;
    let grid = VoxelGrid64::voxelize(&normalized, args.resolution).map_err(|e| CliError::Io(e.to_string()))?;

    let r = args.resolution;
    let occupied = grid.occupied_count();
    let io = |e: std::io::Error| CliError::Io(e.to_string());
    writeln!(out, "points: {}", cloud.len()).map_err(io)?;
    writeln!(out, "resolution: {r}").map_err(io)?;
    writeln!(out, "voxel size: {:.6}", transform.invert_length(1.0 / r as f64)).map_err(io)?;
    writeln!(
        out,
        "occupied voxels: {occupied} of {} ({:.4}%)",
        r * r * r,
        100.0 * occupied as f64 / (r * r * r) as f64
    )
    .map_err(io)?;
    writeln!(out, "points per occupied voxel: {:.3}", cloud.len() as f64 / occupied as f64).map_err(io)?;

    if !slices.is_empty() {
        std::fs::create_dir_all(&args.slice_dir)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", args.slice_dir.display())))?;
    }
    for (axis, index) in slices {
        let frame = grid.slice(axis, index).map_err(|e| CliError::Io(e.to_string()))?;
        let name = format!("slice_{}_{index}.png", format!("{axis:?}").to_lowercase());
        let path = args.slice_dir.join(name);
        std::fs::write(&path, png::rgb_png(&frame))
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        writeln!(
            out,
            "slice {axis:?}={index}: {} occupied pixels, {}x{} -> {}",
            frame.occupied_count(),
            frame.width,
            frame.height,
            path.display()
        )
        .map_err(io)?;
    }
    Ok(())
}
