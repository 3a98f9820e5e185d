//! `qcnn train`: fit a preset on a dataset, logging one CSV row per epoch
//! and writing a resumable checkpoint at the end.

use crate::commands::noise_rng;
use crate::config::{resolve_train, TrainSettings};
use crate::opts::TrainArgs;
use crate::specs::{build_spec, resolved_widths, Precision, Preset, Task};
use crate::{CmdResult, Failure};
use anyhow::Context;
use qcnn_core::data::{self, NoiseConfig, Split};
use qcnn_core::metrics::{self, EpochRecord};
use qcnn_core::net::Network;
use qcnn_core::num::Real;
use qcnn_core::qtensor::ImageBuf;
use qcnn_core::training::{self, checkpoint, Optimizer};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

pub fn run(args: TrainArgs) -> CmdResult {
    let s = resolve_train(args)?;
    match s.precision {
        Precision::Single => go::<f32>(&s),
        Precision::Double => go::<f64>(&s),
    }
}

fn banner(s: &TrainSettings, params: usize) {
    let flavor = if s.quaternion { "quaternion" } else { "real" };
    println!("preset = {} ({flavor}), precision = {}, seed = {}", s.preset.name(), s.precision.name(), s.seed);
    let (conv, dense, base) = resolved_widths(s);
    match s.preset {
        Preset::ShallowCifar => println!(
            "widths = {},{},{},{}, dense = {dense}",
            conv[0], conv[1], conv[2], conv[3]
        ),
        Preset::Denoiser => println!("base width = {base}"),
        Preset::Vggs => println!("widths = preset-fixed"),
    }
    println!(
        "optimizer = {}, lr = {}, epochs = {}, batch size = {}",
        s.optimizer.name(),
        s.lr,
        s.epochs,
        s.batch_size
    );
    println!("dataset = {}", s.dataset.display());
    println!("parameters = {params}");
}

fn go<F: Real>(s: &TrainSettings) -> CmdResult {
    let spec = build_spec(s)?;
    let mut net = Network::<F>::build(spec, s.seed)?;
    banner(s, net.num_params());
    let mut opt = Optimizer::new(s.optimizer.config(s.lr), &net);
    match s.preset.task() {
        Task::Classify => classify::<F>(s, &mut net, &mut opt),
        Task::Denoise => denoise::<F>(s, &mut net, &mut opt),
    }
}

fn finish<F: Real>(
    s: &TrainSettings,
    net: &Network<F>,
    opt: &Optimizer<F>,
    records: &[EpochRecord],
) -> CmdResult {
    if let Some(csv) = &s.csv {
        metrics::write_epoch_csv(csv, records)?;
        println!("csv -> {}", csv.display());
    }
    checkpoint::save(&s.out, net, Some(opt), s.seed, records.len() as u64)?;
    println!("checkpoint -> {}", s.out.display());
    Ok(0)
}

fn classify<F: Real>(s: &TrainSettings, net: &mut Network<F>, opt: &mut Optimizer<F>) -> CmdResult {
    let mut train = data::load_labeled(&s.dataset, Split::Train)?;
    if let Some(n) = s.subset {
        train.truncate(n);
    }
    if train.is_empty() {
        return Err(Failure::usage("training subset is empty"));
    }
    let mut eval = if s.dataset.is_dir() {
        data::load_labeled(&s.dataset, Split::Test)?
    } else {
        train.clone()
    };
    if let Some(n) = s.test_subset {
        eval.truncate(n);
    }
    println!("images = {} train / {} eval", train.len(), eval.len());

    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let started = Instant::now();
    let mut records = Vec::new();
    for epoch in 1..=s.epochs {
        let loss =
            training::train_classifier_epoch(net, opt, &train, s.batch_size, s.augment, &mut rng)
                .context("training epoch failed")?;
        let acc = training::evaluate_classifier(net, &eval)?;
        let wall = if s.wall_clock { started.elapsed().as_secs_f64() } else { 0.0 };
        println!("epoch {epoch}/{}: loss {loss:.6}, accuracy {acc:.4}", s.epochs);
        records.push(EpochRecord { epoch, train_loss: loss, eval_metric: acc, wall_secs: wall });
        if s.stop_accuracy.is_some_and(|t| acc >= t) {
            println!("stopping early: accuracy {acc:.4} reached the target");
            break;
        }
    }
    finish(s, net, opt, &records)
}

/// Corrupt the corpus once up front (train images first, then holdout) so a
/// given seed always produces the same pairs.
fn make_pairs(
    s: &TrainSettings,
    images: Vec<ImageBuf>,
) -> (Vec<(ImageBuf, ImageBuf)>, Vec<(ImageBuf, ImageBuf)>) {
    let cfg = NoiseConfig { pixel_fraction: s.noise_fraction, sigma: s.noise_sigma };
    let mut rng = noise_rng(s.seed);
    let split = images.len() - s.holdout.min(images.len());
    let train = data::corrupt_pairs(&images[..split], &cfg, &mut rng);
    let held = data::corrupt_pairs(&images[split..], &cfg, &mut rng);
    (train, held)
}

fn denoise<F: Real>(s: &TrainSettings, net: &mut Network<F>, opt: &mut Optimizer<F>) -> CmdResult {
    let size = net.spec().input_h;
    let mut images = data::load_image_folder(&s.dataset, size)?;
    if let Some(n) = s.subset {
        images.truncate(n);
    }
    if s.holdout >= images.len() {
        return Err(Failure::usage(format!(
            "holdout {} leaves no training images (corpus has {})",
            s.holdout,
            images.len()
        )));
    }
    let (train_pairs, held_pairs) = make_pairs(s, images);
    println!("images = {} train / {} held out", train_pairs.len(), held_pairs.len());
    let eval_pairs = if held_pairs.is_empty() { &train_pairs } else { &held_pairs };
    let mut baseline = 0.0;
    for (noisy, clean) in eval_pairs {
        baseline += metrics::image_psnr(noisy, clean)?;
    }
    baseline /= eval_pairs.len() as f64;
    println!("corrupted baseline = {baseline:.2} dB over {} images", eval_pairs.len());

    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let started = Instant::now();
    let mut records = Vec::new();
    for epoch in 1..=s.epochs {
        let loss = training::train_denoiser_epoch(net, opt, &train_pairs, s.batch_size, &mut rng)
            .context("training epoch failed")?;
        let psnr = training::evaluate_denoiser(net, eval_pairs)?;
        let wall = if s.wall_clock { started.elapsed().as_secs_f64() } else { 0.0 };
        println!("epoch {epoch}/{}: loss {loss:.6}, psnr {psnr:.2} dB", s.epochs);
        records.push(EpochRecord { epoch, train_loss: loss, eval_metric: psnr, wall_secs: wall });
    }
    finish(s, net, opt, &records)
}
