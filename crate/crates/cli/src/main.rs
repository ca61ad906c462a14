use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use exposure_core::eval::{ApMethod, BoxMode};
use exposure_core::ingest::Split;
use exposure_core::report::ReportFormat;

mod commands;
mod error;

use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "exposure", version, about = "Sponsor visibility analytics over oriented logo detections")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Per-brand exposure metrics, timeline and ranking from a detection stream.
    Analyze(AnalyzeArgs),
    /// Detector evaluation (AP, mAP, P/R, IoU histogram) against a labelled split.
    Evaluate(EvaluateArgs),
    /// Tightness ratio by orientation for labels and/or predictions.
    Fit(FitArgs),
    /// Loss fixtures and gradient check.
    Losscheck(LosscheckArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CommonArgs {
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, default_value = "csv")]
    pub format: ReportFormat,
    /// Abort on the first malformed record (exit code 2).
    #[arg(long)]
    pub strict: bool,
    /// Worker threads; defaults to the number of available processors.
    #[arg(long)]
    #[serde(skip)]
    pub jobs: Option<usize>,
}

/// Frame geometry: a sidecar CSV (`video_id,width,height,fps,frame_count`)
/// or flags applied to every video.
#[derive(Args, Debug, Clone, Serialize)]
pub struct MetaArgs {
    #[arg(long)]
    pub meta: Option<PathBuf>,
    #[arg(long)]
    pub width: Option<f64>,
    #[arg(long)]
    pub height: Option<f64>,
    #[arg(long)]
    pub fps: Option<f64>,
    #[arg(long)]
    pub frames: Option<u64>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct AnalyzeArgs {
    /// JSON-lines detections, `-` for stdin.
    #[arg(long)]
    pub detections: PathBuf,
    #[arg(long)]
    pub classes: Option<PathBuf>,
    #[command(flatten)]
    pub meta: MetaArgs,
    #[arg(long, default_value_t = exposure_core::exposure::DEFAULT_CONF_THRESHOLD)]
    pub conf_threshold: f64,
    #[arg(long, default_value_t = 10)]
    pub top_k: usize,
    /// Drop visible runs shorter than this many frames.
    #[arg(long, default_value_t = 1)]
    pub min_run: u64,
    /// Bridge absent gaps of at most this many frames.
    #[arg(long, default_value_t = 0)]
    pub max_gap: u64,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct EvaluateArgs {
    /// Dataset root holding `<split>/images` and `<split>/labels`.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, default_value = "val")]
    pub split: Split,
    /// JSON-lines predictions; `video_id` is the image stem.
    #[arg(long)]
    pub detections: PathBuf,
    #[arg(long)]
    pub classes: Option<PathBuf>,
    #[command(flatten)]
    pub meta: MetaArgs,
    #[arg(long, default_value_t = exposure_core::eval::DEFAULT_IOU_THRESHOLD)]
    pub iou_threshold: f64,
    /// Report P/R at this confidence instead of the max-F1 point.
    #[arg(long)]
    pub conf_threshold: Option<f64>,
    #[arg(long, default_value = "obb")]
    pub box_mode: BoxMode,
    #[arg(long, default_value = "all-points")]
    pub ap_method: ApMethod,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct FitArgs {
    /// Dataset root for ground-truth samples.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, default_value = "val")]
    pub split: Split,
    /// JSON-lines predictions for predicted samples.
    #[arg(long)]
    pub detections: Option<PathBuf>,
    #[arg(long)]
    pub classes: Option<PathBuf>,
    #[command(flatten)]
    pub meta: MetaArgs,
    /// Predictions below this confidence are ignored.
    #[arg(long, default_value_t = 0.0)]
    pub conf_threshold: f64,
    /// Orientation bin width in degrees; both 15 and 5 when omitted.
    #[arg(long)]
    pub bin_width: Option<f64>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct LosscheckArgs {
    /// JSON file with any of `gamma`, `alpha`, `lambda_box`, `lambda_cls`, `lambda_dfl`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Write the full report as JSON to this directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("EXPOSURE_LOG", "warn");
    env_logger::Builder::from_env(env).format_timestamp(None).init();
}

fn run(command: Command) -> Result<(), CliError> {
    let jobs = match &command {
        Command::Analyze(a) => a.common.jobs,
        Command::Evaluate(a) => a.common.jobs,
        Command::Fit(a) => a.common.jobs,
        Command::Losscheck(_) => None,
    };
    let jobs = match jobs {
        Some(0) => return Err(CliError::Config("--jobs must be at least 1".into())),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(|| match command {
        Command::Analyze(a) => commands::analyze(&a, jobs),
        Command::Evaluate(a) => commands::evaluate(&a, jobs),
        Command::Fit(a) => commands::fit(&a, jobs),
        Command::Losscheck(a) => commands::losscheck(&a),
    })
}

fn main() -> ExitCode {
    init_logging();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
