//! Config-file parsing and flag/file/default resolution for `train`.
//!
//! The file format is deliberately plain: UTF-8 lines of `key = value`,
//! `#` starts a comment, keys use the same spelling as the long flags
//! (without the dashes). Explicit command-line flags always win.

use crate::opts::TrainArgs;
use crate::specs::{OptName, Precision, Preset};
use crate::Failure;
use qcnn_core::presets;
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

const KNOWN_KEYS: &[&str] = &[
    "preset",
    "dataset",
    "epochs",
    "batch-size",
    "lr",
    "optimizer",
    "seed",
    "subset",
    "test-subset",
    "quaternion",
    "filter-ratio",
    "precision",
    "out",
    "csv",
    "conv-widths",
    "dense-width",
    "base-width",
    "augment",
    "wall-clock",
    "stop-accuracy",
    "holdout",
    "noise-fraction",
    "noise-sigma",
];

/// Parse a `key = value` file, rejecting malformed lines and unknown keys.
pub fn parse_file(path: &Path) -> Result<HashMap<String, String>, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut map = HashMap::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Failure::usage(format!(
                "{}:{}: expected `key = value`, got `{raw}`",
                path.display(),
                ln + 1
            )));
        };
        let key = key.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(Failure::usage(format!(
                "{}:{}: unknown config key `{key}`",
                path.display(),
                ln + 1
            )));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

/// Everything `train` needs, fully resolved.
#[derive(Clone, Debug)]
pub struct TrainSettings {
    pub preset: Preset,
    pub dataset: PathBuf,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub optimizer: OptName,
    pub seed: u64,
    pub subset: Option<usize>,
    pub test_subset: Option<usize>,
    pub quaternion: bool,
    pub filter_ratio: f64,
    pub precision: Precision,
    pub out: PathBuf,
    pub csv: Option<PathBuf>,
    pub conv_widths: [usize; 4],
    pub dense_width: usize,
    pub base_width: usize,
    pub augment: bool,
    pub wall_clock: bool,
    pub stop_accuracy: Option<f64>,
    pub holdout: usize,
    pub noise_fraction: f64,
    pub noise_sigma: f64,
}

/// Parse an enum-valued flag whose `FromStr` error is already a user-facing
/// message.
fn flag_enum<T: FromStr<Err = String>>(flag: Option<String>) -> Result<Option<T>, Failure> {
    flag.map(|raw| raw.parse().map_err(Failure::Usage)).transpose()
}

fn parsed<T: FromStr>(key: &str, value: &str) -> Result<T, Failure> {
    value
        .parse()
        .map_err(|_| Failure::usage(format!("config {key} = {value} is not a valid value")))
}

/// Flag beats file beats default.
fn pick<T: FromStr>(
    flag: Option<T>,
    cfg: &HashMap<String, String>,
    key: &str,
) -> Result<Option<T>, Failure> {
    if let Some(v) = flag {
        return Ok(Some(v));
    }
    match cfg.get(key) {
        Some(raw) => Ok(Some(parsed(key, raw)?)),
        None => Ok(None),
    }
}

fn pick_bool(flag: bool, cfg: &HashMap<String, String>, key: &str) -> Result<bool, Failure> {
    if flag {
        return Ok(true);
    }
    match cfg.get(key) {
        Some(raw) => parsed(key, raw),
        None => Ok(false),
    }
}

pub fn parse_conv_widths(raw: &str) -> Result<[usize; 4], Failure> {
    let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(Failure::usage(format!(
            "conv-widths needs exactly four comma-separated values, got `{raw}`"
        )));
    }
    let mut out = [0usize; 4];
    for (i, p) in parts.iter().enumerate() {
        out[i] = p
            .parse()
            .ok()
            .filter(|w| *w > 0)
            .ok_or_else(|| Failure::usage(format!("conv width `{p}` is not a positive integer")))?;
    }
    Ok(out)
}

pub fn resolve_train(args: TrainArgs) -> Result<TrainSettings, Failure> {
    let cfg = match &args.config {
        Some(path) => parse_file(path)?,
        None => HashMap::new(),
    };

    let preset: Preset =
        pick(flag_enum(args.preset)?, &cfg, "preset")?.unwrap_or(Preset::ShallowCifar);
    let dataset: PathBuf = pick(args.dataset, &cfg, "dataset")?
        .ok_or_else(|| Failure::usage("train needs --dataset (or `dataset` in the config file)"))?;
    let epochs = pick(args.epochs, &cfg, "epochs")?.unwrap_or(20);
    let batch_size = pick(args.batch_size, &cfg, "batch-size")?.unwrap_or(32);
    let lr = pick(args.lr, &cfg, "lr")?.unwrap_or(1e-4);
    let optimizer: OptName = pick(flag_enum(args.optimizer)?, &cfg, "optimizer")?
        .unwrap_or(match preset {
            Preset::Denoiser => OptName::Adam,
            _ => OptName::RmsProp,
        });
    let seed = pick(args.seed, &cfg, "seed")?.unwrap_or(0);
    let subset = pick(args.subset, &cfg, "subset")?;
    let test_subset = pick(args.test_subset, &cfg, "test-subset")?;
    let quaternion = pick_bool(args.quaternion, &cfg, "quaternion")?;
    let filter_ratio = pick(args.filter_ratio, &cfg, "filter-ratio")?.unwrap_or(1.0);
    let precision: Precision =
        pick(flag_enum(args.precision)?, &cfg, "precision")?.unwrap_or(Precision::Single);
    let out: PathBuf = pick(args.out, &cfg, "out")?.unwrap_or_else(|| PathBuf::from("model.qcnn"));
    let csv = pick(args.csv, &cfg, "csv")?;
    let conv_widths = match pick(args.conv_widths, &cfg, "conv-widths")? {
        Some(raw) => parse_conv_widths(&raw)?,
        None => presets::SHALLOW_CONV_WIDTHS,
    };
    let dense_width = pick(args.dense_width, &cfg, "dense-width")?.unwrap_or(presets::SHALLOW_DENSE_WIDTH);
    let base_width = pick(args.base_width, &cfg, "base-width")?.unwrap_or(presets::DENOISER_BASE_WIDTH);
    let augment = pick_bool(args.augment, &cfg, "augment")?;
    let wall_clock = pick_bool(args.wall_clock, &cfg, "wall-clock")?;
    let stop_accuracy = pick(args.stop_accuracy, &cfg, "stop-accuracy")?;
    let holdout = pick(args.holdout, &cfg, "holdout")?.unwrap_or(0);
    let noise_fraction = pick(args.noise_fraction, &cfg, "noise-fraction")?.unwrap_or(0.3);
    let noise_sigma = pick(args.noise_sigma, &cfg, "noise-sigma")?.unwrap_or(0.1);

    if epochs == 0 {
        return Err(Failure::usage("epochs must be at least 1"));
    }
    if batch_size == 0 {
        return Err(Failure::usage("batch-size must be at least 1"));
    }
    if !(lr.is_finite() && lr > 0.0) {
        return Err(Failure::usage(format!("lr must be positive, got {lr}")));
    }
    if !(filter_ratio.is_finite() && filter_ratio > 0.0) {
        return Err(Failure::usage(format!("filter-ratio must be positive, got {filter_ratio}")));
    }
    if let Some(a) = stop_accuracy {
        if !(0.0..=1.0).contains(&a) {
            return Err(Failure::usage(format!("stop-accuracy must be in [0, 1], got {a}")));
        }
    }
    if !(0.0..=1.0).contains(&noise_fraction) {
        return Err(Failure::usage(format!("noise-fraction must be in [0, 1], got {noise_fraction}")));
    }
    if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
        return Err(Failure::usage(format!("noise-sigma must be non-negative, got {noise_sigma}")));
    }

    Ok(TrainSettings {
        preset,
        dataset,
        epochs,
        batch_size,
        lr,
        optimizer,
        seed,
        subset,
        test_subset,
        quaternion,
        filter_ratio,
        precision,
        out,
        csv,
        conv_widths,
        dense_width,
        base_width,
        augment,
        wall_clock,
        stop_accuracy,
        holdout,
        noise_fraction,
        noise_sigma,
    })
}
