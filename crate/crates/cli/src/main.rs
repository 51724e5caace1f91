//! `panolayout` command-line tool.
//!
//! Exit codes: 0 on success, 1 when some records failed (the rest are still
//! written), 2 on an invalid invocation or unreadable input.

mod commands;
mod manifest;
mod overlay;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "panolayout", version, about = "Panorama room layout tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DTypeArg {
    F32,
    F64,
}

impl From<DTypeArg> for panolayout::io::DType {
    fn from(d: DTypeArg) -> Self {
        match d {
            DTypeArg::F32 => panolayout::io::DType::F32,
            DTypeArg::F64 => panolayout::io::DType::F64,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Axis {
    Pitch,
    Yaw,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Sampling {
    /// Evenly spaced from min to max, inclusive.
    Grid,
    /// Independent uniform draws in [min, max].
    Random,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Target {
    Soft,
    Binarized,
}

/// GT rendering parameters shared by several commands.
#[derive(Debug, Clone, Copy, Args)]
pub struct GtArgs {
    /// Gaussian blur sigma in pixels.
    #[arg(long, default_value_t = 2.0)]
    pub sigma: f64,
    /// Boundary line thickness in pixels.
    #[arg(long, default_value_t = 3.0)]
    pub thickness: f64,
}

impl GtArgs {
    pub fn params(&self) -> panolayout::gt_synth::RenderParams {
        panolayout::gt_synth::RenderParams {
            thickness: self.thickness,
            sigma: self.sigma,
        }
    }
}

/// Panorama size used when loading images.
#[derive(Debug, Clone, Copy, Args)]
pub struct SizeArgs {
    #[arg(long, default_value_t = 256)]
    pub width: usize,
    #[arg(long, default_value_t = 128)]
    pub height: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Export the spherical kernel sample positions of every image row.
    Offsets(OffsetsArgs),
    /// Generate random synthetic rooms with images, labels and a manifest.
    Synth(SynthArgs),
    /// Render edge and corner ground-truth maps from labels.
    GenGt(GenGtArgs),
    /// Mirror, rotate and randomly erase an image with its labels.
    Augment(AugmentArgs),
    /// Extract ceiling/floor corner labels from a corner probability map.
    ExtractLayout(ExtractArgs),
    /// Recover a 3D layout from corner labels.
    Reconstruct(ReconstructArgs),
    /// Evaluate predicted edge and corner maps against ground truth.
    EvalMaps(EvalMapsArgs),
    /// Evaluate predicted layouts (3D IoU, corner and pixel errors).
    EvalLayout(EvalLayoutArgs),
    /// Rotate a panorama and its labels over a range of angles.
    SimRotate(SimRotateArgs),
    /// Move the camera vertically over a range of offsets.
    SimTranslate(SimTranslateArgs),
    /// Overfit a small equirectangular network on one panorama.
    TrainMicro(TrainArgs),
    /// Draw predicted and ground-truth layout boundaries on a panorama.
    RenderOverlay(OverlayArgs),
}

#[derive(Args)]
pub struct OffsetsArgs {
    #[arg(long, default_value_t = 256)]
    pub width: usize,
    #[arg(long, default_value_t = 128)]
    pub height: usize,
    /// Kernel resolution (odd).
    #[arg(short = 'r', long = "resolution", default_value_t = 3)]
    pub resolution: usize,
    /// Kernel field of view in degrees.
    #[arg(long, conflicts_with = "alpha_auto", required_unless_present = "alpha_auto")]
    pub alpha: Option<f64>,
    /// Field of view matching a standard r x r kernel at the equator.
    #[arg(long)]
    pub alpha_auto: bool,
    #[arg(long, value_enum, default_value_t = DTypeArg::F64)]
    pub dtype: DTypeArg,
    /// Optional PNG showing the sample positions of the kernel centered at
    /// the middle column of the given rows.
    #[arg(long)]
    pub png: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', requires = "png")]
    pub rows: Vec<usize>,
    /// Output tensor file with extents [H, r*r, 2], (u, v) per sample.
    pub output: PathBuf,
}

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub count: usize,
    #[command(flatten)]
    pub size: SizeArgs,
    #[arg(long, default_value_t = 4)]
    pub min_walls: usize,
    #[arg(long, default_value_t = 8)]
    pub max_walls: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args)]
pub struct GenGtArgs {
    /// Layout labels JSON.
    #[arg(required_unless_present = "manifest", conflicts_with = "manifest")]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[command(flatten)]
    pub gt: GtArgs,
    #[arg(long, value_enum, default_value_t = DTypeArg::F32)]
    pub dtype: DTypeArg,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args)]
pub struct AugmentArgs {
    pub image: PathBuf,
    pub labels: PathBuf,
    /// Mirror left to right.
    #[arg(long)]
    pub mirror: bool,
    /// Rotate by this many pixel columns (applied after mirroring).
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    pub shift: isize,
    /// Number of randomly erased rectangles.
    #[arg(long, default_value_t = 0)]
    pub erase: usize,
    /// Required with --erase.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct PeakArgs {
    #[arg(long, default_value_t = 0.5)]
    pub min_peak: f64,
    #[arg(long, default_value_t = 5.0)]
    pub nms_radius: f64,
    /// Report peaks at integer pixel positions.
    #[arg(long)]
    pub no_subpixel: bool,
}

#[derive(Args)]
pub struct ExtractArgs {
    /// Corner map (PNG or tensor file).
    #[arg(required_unless_present = "manifest", conflicts_with = "manifest")]
    pub map: Option<PathBuf>,
    /// Batch mode: reads `prediction.corner` of every record.
    #[arg(long, requires = "out_dir")]
    pub manifest: Option<PathBuf>,
    #[command(flatten)]
    pub peaks: PeakArgs,
    #[arg(long, required_unless_present = "manifest")]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args)]
pub struct ReconstructArgs {
    #[arg(required_unless_present = "manifest", conflicts_with = "manifest")]
    pub labels: Option<PathBuf>,
    /// Batch mode: reads `prediction.labels` of every record.
    #[arg(long, requires = "out_dir")]
    pub manifest: Option<PathBuf>,
    #[arg(long, required_unless_present = "manifest")]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args)]
pub struct EvalMapsArgs {
    #[arg(long, required_unless_present = "manifest")]
    pub pred_edge: Option<PathBuf>,
    #[arg(long, required_unless_present = "manifest")]
    pub pred_corner: Option<PathBuf>,
    /// Ground-truth labels; maps are rendered with the GT parameters.
    #[arg(long, required_unless_present = "manifest")]
    pub gt: Option<PathBuf>,
    #[arg(long, conflicts_with_all = ["pred_edge", "pred_corner", "gt"])]
    pub manifest: Option<PathBuf>,
    #[command(flatten)]
    pub gt_params: GtArgs,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Also write the report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Args)]
pub struct EvalLayoutArgs {
    /// Predicted labels or 3D layout JSON.
    #[arg(required_unless_present = "manifest", conflicts_with = "manifest")]
    pub pred: Option<PathBuf>,
    /// Ground-truth labels or 3D layout JSON.
    #[arg(required_unless_present = "manifest")]
    pub gt: Option<PathBuf>,
    /// Batch mode: `prediction.labels` against `layout` (or `labels`).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Image size used when neither input carries one.
    #[command(flatten)]
    pub size: SizeArgs,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    pub image: PathBuf,
    pub labels: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub min: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub max: f64,
    #[arg(long, default_value_t = 11)]
    pub steps: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Sampling::Grid)]
    pub sampling: Sampling,
    #[command(flatten)]
    pub gt: GtArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args)]
pub struct SimRotateArgs {
    #[arg(long, value_enum, default_value_t = Axis::Pitch)]
    pub axis: Axis,
    /// Angles in degrees.
    #[command(flatten)]
    pub sweep: SweepArgs,
}

#[derive(Args)]
pub struct SimTranslateArgs {
    /// Offsets in ceiling heights, positive raises the camera.
    #[command(flatten)]
    pub sweep: SweepArgs,
    /// Exact 3D layout of the scene; reconstructed from the labels otherwise.
    #[arg(long)]
    pub layout: Option<PathBuf>,
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 32)]
    pub width: usize,
    #[arg(long, default_value_t = 16)]
    pub height: usize,
    /// Hidden layer widths.
    #[arg(long, value_delimiter = ',', default_value = "32,32")]
    pub hidden: Vec<usize>,
    #[arg(short = 'r', long = "resolution", default_value_t = 7)]
    pub resolution: usize,
    #[arg(long, default_value_t = 300)]
    pub epochs: usize,
    #[arg(long, default_value_t = 2.5e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.995)]
    pub lr_decay: f64,
    #[arg(long, value_enum, default_value_t = Target::Binarized)]
    pub target: Target,
    /// Use standard convolutions instead of equirectangular ones.
    #[arg(long)]
    pub standard: bool,
    #[arg(long, default_value_t = 0.75)]
    pub thickness: f64,
    #[arg(long, default_value_t = 0.5)]
    pub sigma: f64,
    /// Train on this panorama instead of a random room (needs --labels).
    #[arg(long, requires = "labels")]
    pub image: Option<PathBuf>,
    #[arg(long, requires = "image")]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args)]
pub struct OverlayArgs {
    pub image: PathBuf,
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[arg(long)]
    pub pred: Option<PathBuf>,
    #[arg(long)]
    pub output: PathBuf,
}

/// Invalid invocation or unreadable input.
#[derive(Debug)]
pub struct Invalid(pub anyhow::Error);

impl<E: Into<anyhow::Error>> From<E> for Invalid {
    fn from(e: E) -> Self {
        Invalid(e.into())
    }
}

/// Number of records that failed.
pub type Outcome = Result<usize, Invalid>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Offsets(a) => commands::offsets(&a),
        Command::Synth(a) => commands::synth(&a),
        Command::GenGt(a) => commands::gen_gt(&a),
        Command::Augment(a) => commands::augment(&a),
        Command::ExtractLayout(a) => commands::extract_layout(&a),
        Command::Reconstruct(a) => commands::reconstruct(&a),
        Command::EvalMaps(a) => commands::eval_maps(&a),
        Command::EvalLayout(a) => commands::eval_layout(&a),
        Command::SimRotate(a) => commands::sim_rotate(&a),
        Command::SimTranslate(a) => commands::sim_translate(&a),
        Command::TrainMicro(a) => commands::train_micro(&a),
        Command::RenderOverlay(a) => overlay::render_overlay(&a),
    };
    match res {
        Ok(0) => ExitCode::SUCCESS,
        Ok(n) => {
            eprintln!("error: {n} record(s) failed");
            ExitCode::from(1)
        }
        Err(Invalid(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
