//! Command-line surface. Every option a config file can supply is an
//! `Option` here so the merge in [`crate::config`] can tell "absent" from
//! "explicitly given"; plain `bool` flags combine with the file by OR.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "qcnn",
    version,
    about = "Quaternion convolutional networks for color images"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Fit a model, writing a checkpoint and a per-epoch CSV log
    Train(TrainArgs),
    /// Score a checkpoint: classification accuracy or reconstruction PSNR
    Eval(EvalArgs),
    /// Restore corrupted images with a trained model and report PSNR
    Denoise(DenoiseArgs),
    /// Verify analytic gradients against finite differences
    Gradcheck(GradcheckArgs),
    /// Print per-layer parameter and multiply counts for a preset
    Audit(AuditArgs),
}

#[derive(Args)]
pub struct TrainArgs {
    /// Plain-text `key = value` file supplying any long option; flags win
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Architecture: shallow-cifar | denoiser | vggs
    #[arg(long)]
    pub preset: Option<String>,
    /// Labeled batch file or directory; an image directory for the denoiser
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Learning rate
    #[arg(long)]
    pub lr: Option<f64>,
    /// sgd | rmsprop | adam
    #[arg(long)]
    pub optimizer: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Keep only the first N training images
    #[arg(long)]
    pub subset: Option<usize>,
    /// Keep only the first N evaluation images
    #[arg(long)]
    pub test_subset: Option<usize>,
    /// Quaternion layers instead of the real-valued baseline
    #[arg(long)]
    pub quaternion: bool,
    /// Multiply preset widths by this ratio and round (0.7071 halves conv parameters)
    #[arg(long)]
    pub filter_ratio: Option<f64>,
    /// single | double
    #[arg(long)]
    pub precision: Option<String>,
    /// Checkpoint output path (default model.qcnn)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-epoch log path; written as epoch,train_loss,eval_metric,wall_secs
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Four comma-separated conv widths for the shallow preset
    #[arg(long)]
    pub conv_widths: Option<String>,
    /// Hidden dense width for the shallow preset
    #[arg(long)]
    pub dense_width: Option<usize>,
    /// Per-layer conv width for the denoiser preset
    #[arg(long)]
    pub base_width: Option<usize>,
    /// Random mirror-and-shift augmentation (classification only)
    #[arg(long)]
    pub augment: bool,
    /// Record elapsed seconds in the CSV; off keeps logs byte-reproducible
    #[arg(long)]
    pub wall_clock: bool,
    /// Stop early once eval accuracy reaches this fraction
    #[arg(long)]
    pub stop_accuracy: Option<f64>,
    /// Hold out the last N corpus images for denoiser evaluation
    #[arg(long)]
    pub holdout: Option<usize>,
    /// Fraction of pixels corrupted when preparing denoiser pairs
    #[arg(long)]
    pub noise_fraction: Option<f64>,
    /// Standard deviation of the noise added to corrupted pixels
    #[arg(long)]
    pub noise_sigma: Option<f64>,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Trained model to score
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Labeled data (classifier) or image directory (denoiser)
    #[arg(long)]
    pub dataset: PathBuf,
    /// Keep only the first N images
    #[arg(long)]
    pub subset: Option<usize>,
    /// Seed for the denoiser's corruption draw
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.3)]
    pub noise_fraction: f64,
    #[arg(long, default_value_t = 0.1)]
    pub noise_sigma: f64,
}

#[derive(Args)]
pub struct DenoiseArgs {
    /// Trained restoration model
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// One image file or a directory of .png/.ppm images
    #[arg(long)]
    pub dataset: PathBuf,
    /// Directory for restored images (written as <stem>_restored.<ext>)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-image comparison CSV; requires --compare
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Second checkpoint of the other flavor for a paired comparison
    #[arg(long)]
    pub compare: Option<PathBuf>,
    /// Inputs are already corrupted; skip corruption (and PSNR, which needs
    /// a clean reference)
    #[arg(long)]
    pub pre_corrupted: bool,
    /// Keep only the first N images
    #[arg(long)]
    pub subset: Option<usize>,
    /// Seed for the corruption draw
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.3)]
    pub noise_fraction: f64,
    #[arg(long, default_value_t = 0.1)]
    pub noise_sigma: f64,
}

#[derive(Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args)]
pub struct AuditArgs {
    /// Architecture: shallow-cifar | denoiser | vggs
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub quaternion: bool,
    #[arg(long)]
    pub filter_ratio: Option<f64>,
    #[arg(long)]
    pub conv_widths: Option<String>,
    #[arg(long)]
    pub dense_width: Option<usize>,
    #[arg(long)]
    pub base_width: Option<usize>,
}
