//! `voxvid` command-line tool.
//!
//! Exit codes: 0 success, 1 input/output or usage error, 2 bad prompt,
//! 3 backend failure, 4 benchmark check failure.

mod bench;
pub mod prompt_spec;
mod segment;
mod voxelize;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;
use voxvid_core::voxel::{MAX_RESOLUTION, MIN_RESOLUTION};
use voxvid_core::{CloudFormat, FusionMode};
use voxvid_service::{BackendSpec, ServiceConfig};

pub use prompt_spec::{PromptSpec, PromptSpecError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("bad prompt: {0}")]
    Prompt(String),
    #[error("backend failure: {0}")]
    Backend(String),
    #[error("{0}")]
    Check(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Prompt(_) => 2,
            CliError::Backend(_) => 3,
            CliError::Check(_) => 4,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "voxvid", version, about = "Promptable point cloud segmentation by sweeping voxel grids as videos")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment a cloud from one prompt and write the selected point indices.
    Segment(SegmentArgs),
    /// Voxelize a cloud, print occupancy statistics and optionally export slices.
    Voxelize(VoxelizeArgs),
    /// Run the HTTP session service.
    Serve(ServeArgs),
    /// Check the pipeline against brute-force oracles on seeded random scenes.
    Bench(BenchArgs),
    /// Write the three-block demo scene as xyzrgb text.
    DemoScene(DemoSceneArgs),
}

fn parse_format(s: &str) -> Result<CloudFormat, String> {
    s.parse()
}

fn parse_resolution(s: &str) -> Result<usize, String> {
    let r: usize = s.parse().map_err(|e| format!("{e}"))?;
    if (MIN_RESOLUTION..=MAX_RESOLUTION).contains(&r) {
        Ok(r)
    } else {
        Err(format!("resolution must be in [{MIN_RESOLUTION}, {MAX_RESOLUTION}]"))
    }
}

fn parse_tolerance(s: &str) -> Result<f64, String> {
    let t: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&t) {
        Ok(t)
    } else {
        Err("color tolerance must be in [0, 1]".into())
    }
}

fn parse_fusion(s: &str) -> Result<FusionMode, String> {
    if s == "union" {
        return Ok(FusionMode::Union);
    }
    s.strip_prefix("vote:")
        .and_then(|k| k.parse().ok())
        .filter(|k| (1..=6).contains(k))
        .map(|min_views| FusionMode::Vote { min_views })
        .ok_or_else(|| format!("unknown fusion `{s}` (expected union or vote:<1-6>)"))
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Point cloud file (.txt/.xyz, .ply, KITTI .bin).
    #[arg(long)]
    pub input: PathBuf,
    /// auto, xyzrgb_text, ply or kitti_bin.
    #[arg(long, default_value = "auto", value_parser = parse_format)]
    pub format: CloudFormat,
}

#[derive(Debug, Clone, Args)]
pub struct SegmentArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// point:x,y,z | box:x,y,z,w,h,l[,rot=a,b,g] | mask:@file, in input coordinates.
    #[arg(long)]
    pub prompt: String,
    #[arg(long, env = "VOXVID_RESOLUTION", default_value_t = 256, value_parser = parse_resolution)]
    pub resolution: usize,
    /// reference or remote:<url>.
    #[arg(long, env = "VOXVID_BACKEND", default_value = "reference")]
    pub backend: BackendSpec,
    /// Color tolerance of the reference propagator.
    #[arg(long, env = "VOXVID_TAU", default_value_t = 0.1, value_parser = parse_tolerance)]
    pub tau: f64,
    /// Seed search radius (pixels) of the reference propagator.
    #[arg(long, env = "VOXVID_RHO", default_value_t = 2)]
    pub rho: usize,
    /// union or vote:<k>.
    #[arg(long, default_value = "union", value_parser = parse_fusion)]
    pub fusion: FusionMode,
    /// Remote call deadline in milliseconds.
    #[arg(long, env = "VOXVID_DEADLINE_MS", default_value_t = 60_000)]
    pub deadline_ms: u64,
    #[arg(long, env = "VOXVID_RETRIES", default_value_t = 1)]
    pub retries: u32,
    /// Feed the result back as a mask prompt this many times.
    #[arg(long, default_value_t = 0)]
    pub refine: u32,
    /// Mask file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Write a per-view JSON summary to this file.
    #[arg(long)]
    pub dump_views: Option<PathBuf>,
    /// Segment the six views one after another.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Clone, Args)]
pub struct VoxelizeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, env = "VOXVID_RESOLUTION", default_value_t = 256, value_parser = parse_resolution)]
    pub resolution: usize,
    /// Export a slice as PNG, e.g. `z:8`. Repeatable.
    #[arg(long)]
    pub slice: Vec<String>,
    #[arg(long, default_value = ".")]
    pub slice_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    /// TOML config file; VOXVID_* variables override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub listen: Option<String>,
    #[arg(long)]
    pub persistence_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub scenes: usize,
    #[arg(long, default_value_t = 32, value_parser = parse_resolution)]
    pub resolution: usize,
    #[arg(long, default_value_t = 0.1, value_parser = parse_tolerance)]
    pub tau: f64,
    #[arg(long, default_value_t = 4)]
    pub max_blocks: usize,
}

#[derive(Debug, Clone, Args)]
pub struct DemoSceneArgs {
    #[arg(long)]
    pub out: PathBuf,
}

fn serve(args: ServeArgs) -> Result<(), CliError> {
    let mut config = ServiceConfig::load(args.config.as_deref()).map_err(|e| CliError::Io(e.to_string()))?;
    if let Some(listen) = args.listen {
        config.listen = listen;
    }
    if let Some(dir) = args.persistence_dir {
        config.persistence_dir = Some(dir);
    }
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Io(e.to_string()))?;
    runtime
        .block_on(voxvid_service::serve(config))
        .map_err(|e| CliError::Io(e.to_string()))
}

fn demo_scene(args: DemoSceneArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (cloud, labels) = voxvid_core::synthetic::golden_scene::<f64>();
    let mut buf = Vec::new();
    voxvid_core::cloud::write_xyzrgb(&cloud, &mut buf).map_err(|e| CliError::Io(e.to_string()))?;
    std::fs::write(&args.out, buf).map_err(|e| CliError::Io(format!("cannot write {}: {e}", args.out.display())))?;
    let per_block: Vec<usize> = (0..3).map(|b| labels.iter().filter(|&&l| l == b).count()).collect();
    writeln!(
        out,
        "wrote {} points to {} (blocks: {:?})",
        cloud.len(),
        args.out.display(),
        per_block
    )
    .map_err(|e| CliError::Io(e.to_string()))
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Segment(a) => segment::run(&a, out),
        Command::Voxelize(a) => voxelize::run(&a, out),
        Command::Serve(a) => serve(a),
        Command::Bench(a) => bench::run(&a, out),
        Command::DemoScene(a) => demo_scene(a, out),
    }
}

/// Parses `args` (program name first) and runs the command, returning
/// the process exit code. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match execute(cli, &mut out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("voxvid: {e}");
            e.exit_code()
        }
    }
}
