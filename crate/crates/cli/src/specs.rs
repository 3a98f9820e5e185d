//! Preset names, width resolution, and spec construction shared by the
//! `train` and `audit` subcommands.

use crate::config::TrainSettings;
use crate::Failure;
use qcnn_core::net::NetworkSpec;
use qcnn_core::presets;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    ShallowCifar,
    Denoiser,
    Vggs,
}

impl FromStr for Preset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "shallow-cifar" => Ok(Preset::ShallowCifar),
            "denoiser" => Ok(Preset::Denoiser),
            "vggs" => Ok(Preset::Vggs),
            other => Err(format!(
                "unknown preset `{other}` (expected shallow-cifar, denoiser, or vggs)"
            )),
        }
    }
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::ShallowCifar => "shallow-cifar",
            Preset::Denoiser => "denoiser",
            Preset::Vggs => "vggs",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    Classify,
    Denoise,
}

impl Preset {
    pub fn task(self) -> Task {
        match self {
            Preset::Denoiser => Task::Denoise,
            _ => Task::Classify,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptName {
    Sgd,
    RmsProp,
    Adam,
}

impl FromStr for OptName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sgd" => Ok(OptName::Sgd),
            "rmsprop" => Ok(OptName::RmsProp),
            "adam" => Ok(OptName::Adam),
            other => Err(format!("unknown optimizer `{other}` (expected sgd, rmsprop, or adam)")),
        }
    }
}

impl OptName {
    pub fn name(self) -> &'static str {
        match self {
            OptName::Sgd => "sgd",
            OptName::RmsProp => "rmsprop",
            OptName::Adam => "adam",
        }
    }

    pub fn config(self, lr: f64) -> qcnn_core::training::OptimizerConfig {
        use qcnn_core::training::OptimizerConfig;
        match self {
            OptName::Sgd => OptimizerConfig::sgd(lr),
            OptName::RmsProp => OptimizerConfig::rmsprop(lr),
            OptName::Adam => OptimizerConfig::adam(lr),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Precision {
    Single,
    Double,
}

impl FromStr for Precision {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "single" | "f32" => Ok(Precision::Single),
            "double" | "f64" => Ok(Precision::Double),
            other => Err(format!("unknown precision `{other}` (expected single or double)")),
        }
    }
}

impl Precision {
    pub fn name(self) -> &'static str {
        match self {
            Precision::Single => "single",
            Precision::Double => "double",
        }
    }
}

/// Apply the filter ratio to one width, rounding and keeping at least 1.
pub fn scaled(width: usize, ratio: f64) -> usize {
    ((width as f64 * ratio).round() as usize).max(1)
}

/// Widths after the filter ratio, for the banner and for spec construction.
pub fn resolved_widths(s: &TrainSettings) -> ([usize; 4], usize, usize) {
    let conv = s.conv_widths.map(|w| scaled(w, s.filter_ratio));
    (conv, scaled(s.dense_width, s.filter_ratio), scaled(s.base_width, s.filter_ratio))
}

/// Build the network description a settings bundle asks for.
pub fn build_spec(s: &TrainSettings) -> Result<NetworkSpec, Failure> {
    let (conv, dense, base) = resolved_widths(s);
    Ok(match s.preset {
        Preset::ShallowCifar => presets::shallow_classifier(s.quaternion, conv, dense, 10),
        Preset::Denoiser => presets::denoiser(s.quaternion, base),
        Preset::Vggs => presets::vggs_classifier(s.quaternion, 10),
    })
}
