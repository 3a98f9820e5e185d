//! `qcnn eval`: score a checkpoint against a dataset. Classifiers report
//! top-1 accuracy; denoisers report restored PSNR next to the corrupted
//! baseline so the gain is visible at a glance.

use crate::commands::noise_rng;
use crate::opts::EvalArgs;
use crate::CmdResult;
use qcnn_core::data::{self, NoiseConfig, Split};
use qcnn_core::metrics::image_psnr;
use qcnn_core::net::Shape;
use qcnn_core::num::Real;
use qcnn_core::training::{self, checkpoint};

pub fn run(args: EvalArgs) -> CmdResult {
    let manifest = checkpoint::read_manifest(&args.checkpoint)?;
    println!(
        "checkpoint = {} ({}, {} epochs trained)",
        args.checkpoint.display(),
        manifest.precision,
        manifest.epochs_trained
    );
    if manifest.precision == "f64" {
        go::<f64>(args)
    } else {
        go::<f32>(args)
    }
}

fn go<F: Real>(args: EvalArgs) -> CmdResult {
    let loaded = checkpoint::load::<F>(&args.checkpoint)?;
    let mut net = loaded.net;
    match net.output_shape() {
        Shape::Vec { .. } => {
            let mut data = data::load_labeled(&args.dataset, Split::Test)?;
            if let Some(n) = args.subset {
                data.truncate(n);
            }
            let acc = training::evaluate_classifier(&mut net, &data)?;
            println!("accuracy = {acc:.4} ({} images)", data.len());
        }
        _ => {
            let mut images = data::load_image_folder(&args.dataset, net.spec().input_h)?;
            if let Some(n) = args.subset {
                images.truncate(n);
            }
            let cfg = NoiseConfig {
                pixel_fraction: args.noise_fraction,
                sigma: args.noise_sigma,
            };
            let pairs = data::corrupt_pairs(&images, &cfg, &mut noise_rng(args.seed));
            let mut baseline = 0.0;
            for (noisy, clean) in &pairs {
                baseline += image_psnr(noisy, clean)?;
            }
            baseline /= pairs.len().max(1) as f64;
            let restored = training::evaluate_denoiser(&mut net, &pairs)?;
            println!(
                "psnr = {restored:.2} dB restored, {baseline:.2} dB corrupted ({} images)",
                pairs.len()
            );
        }
    }
    Ok(0)
}
