use std::io::Write;
use std::sync::Arc;
use std::time::Duration;

use serde_json::json;
use voxvid_core::cloud::{load_point_mask, save_point_mask, MaskFileError};
use voxvid_core::{
    load_cloud, normalize, refine, segment_3d, BoxPrompt, PipelineError, Prompt2D, Prompt3D64, PropagationParams,
    ReferencePropagator, RunParams64, SegmentationResult64, VideoSegmenter, VoxelGrid64,
};
use voxvid_remote::RemoteSegmenter;
use voxvid_service::BackendSpec;

use crate::{CliError, PromptSpec, SegmentArgs};

fn pipeline_error(e: PipelineError) -> CliError {
    match e {
        PipelineError::Prompt(p) => CliError::Prompt(p.to_string()),
        e @ (PipelineError::Backend { .. } | PipelineError::PartialBackendFailure { .. }) => {
            CliError::Backend(e.to_string())
        }
        other => CliError::Io(other.to_string()),
    }
}

fn backend(args: &SegmentArgs) -> Result<Arc<dyn VideoSegmenter<f64>>, CliError> {
    Ok(match &args.backend {
        BackendSpec::Reference => Arc::new(ReferencePropagator),
        BackendSpec::Remote(url) => Arc::new(
            RemoteSegmenter::new(url)
                .map_err(|e| CliError::Backend(e.to_string()))?
                .with_deadline(Duration::from_millis(args.deadline_ms))
                .with_retries(args.retries),
        ),
    })
}

fn describe(prompt: &Prompt2D) -> serde_json::Value {
    match prompt {
        Prompt2D::Point { u, v } => json!({"point": [u, v]}),
        Prompt2D::Rect {
            u_min,
            v_min,
            u_max,
            v_max,
        } => json!({"rect": [u_min, v_min, u_max, v_max]}),
        Prompt2D::Mask(m) => json!({"mask_pixels": m.count()}),
    }
}

fn view_dump(result: &SegmentationResult64) -> serde_json::Value {
    let views: Vec<_> = result
        .per_view
        .iter()
        .map(|o| {
            let counts: Option<Vec<usize>> = o
                .response
                .as_ref()
                .map(|r| r.masks.iter().map(|m| m.count()).collect());
            json!({
                "view": o.view.to_string(),
                "frames": o.view.len(),
                "prompt": o.prompt.as_ref().map(describe),
                "mask_pixels": counts,
                "skipped": o.skipped,
            })
        })
        .collect();
    json!({
        "anchor": [result.anchor.i, result.anchor.j, result.anchor.k],
        "selected_voxels": result.voxel_mask.count(),
        "selected_points": result.selected_count(),
        "views": views,
    })
}

pub fn run(args: &SegmentArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let spec: PromptSpec = args.prompt.parse().map_err(|e: crate::PromptSpecError| CliError::Prompt(e.to_string()))?;
    let cloud = load_cloud::<f64>(&args.input.input, args.input.format).map_err(|e| CliError::Io(e.to_string()))?;
    let (normalized, transform) = normalize(&cloud).map_err(|e| CliError::Io(e.to_string()))?;

    let prompt = match spec {
        PromptSpec::Point(p) => Prompt3D64::Point(transform.apply(p)),
        PromptSpec::Box {
            center,
            dims,
            rotation,
        } => Prompt3D64::Box(BoxPrompt {
            center: transform.apply(center),
            dims: dims.map(|d| transform.apply_length(d)),
            rotation,
        }),
        PromptSpec::Mask(path) => Prompt3D64::Mask(load_point_mask(&path).map_err(|e| match e {
            MaskFileError::Io(io) => CliError::Io(format!("cannot read mask {}: {io}", path.display())),
            other => CliError::Prompt(format!("{}: {other}", path.display())),
        })?),
    };

    let grid = VoxelGrid64::voxelize(&normalized, args.resolution).map_err(|e| CliError::Io(e.to_string()))?;
    let backend = backend(args)?;
    let params = RunParams64 {
        propagation: PropagationParams {
            color_tolerance: args.tau,
            seed_search_radius: args.rho,
        },
        fusion: args.fusion,
        parallel: !args.sequential,
    };

    let mut result = segment_3d(&normalized, &grid, &prompt, &*backend, &params).map_err(pipeline_error)?;
    for _ in 0..args.refine {
        result = refine(&result, &normalized, &grid, &*backend, &params).map_err(pipeline_error)?;
    }

    save_point_mask(&result.point_mask, normalized.len(), &args.out)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", args.out.display())))?;
    if let Some(path) = &args.dump_views {
        let text = serde_json::to_string_pretty(&view_dump(&result)).expect("dump serializes");
        std::fs::write(path, text + "\n").map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    }
    writeln!(out, "selected {} of {} points", result.selected_count(), normalized.len())
        .map_err(|e| CliError::Io(e.to_string()))
}
