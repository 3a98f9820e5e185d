//! `qcnn denoise`: run a trained restoration network over images, optionally
//! writing the outputs and a per-image CSV comparing a real-valued and a
//! quaternion checkpoint on the same corruption.

use crate::commands::noise_rng;
use crate::opts::DenoiseArgs;
use crate::{CmdResult, Failure};
use qcnn_core::data::{self, NoiseConfig};
use qcnn_core::metrics::{self, ComparisonRecord};
use qcnn_core::net::InputKind;
use qcnn_core::qtensor::ImageBuf;
use qcnn_core::training::{self, checkpoint, Manifest};
use std::fs;
use std::path::{Path, PathBuf};

/// A loaded checkpoint with its precision erased, so f32 and f64 models can
/// sit side by side in --compare mode.
struct Restorer {
    manifest: Manifest,
    size: usize,
    run: Box<dyn FnMut(&ImageBuf) -> qcnn_core::Result<ImageBuf>>,
}

impl Restorer {
    fn is_quaternion(&self) -> bool {
        matches!(self.manifest.spec.input, InputKind::Quaternion { .. })
    }
}

fn load_restorer(path: &Path) -> Result<Restorer, Failure> {
    let manifest = checkpoint::read_manifest(path)?;
    if manifest.precision == "f64" {
        let mut net = checkpoint::load::<f64>(path)?.net;
        let size = net.spec().input_h;
        Ok(Restorer {
            manifest,
            size,
            run: Box::new(move |img| training::denoise_image(&mut net, img)),
        })
    } else {
        let mut net = checkpoint::load::<f32>(path)?.net;
        let size = net.spec().input_h;
        Ok(Restorer {
            manifest,
            size,
            run: Box::new(move |img| training::denoise_image(&mut net, img)),
        })
    }
}

fn collect_paths(dataset: &Path) -> Result<Vec<PathBuf>, Failure> {
    if !dataset.is_dir() {
        return Ok(vec![dataset.to_path_buf()]);
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(dataset)
        .map_err(|e| qcnn_core::Error::io(dataset, e))?
        .filter_map(|entry| entry.ok())
        .map(|entry| entry.path())
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("png") | Some("ppm")
            )
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Failure::usage(format!(
            "no .png or .ppm images in {}",
            dataset.display()
        )));
    }
    Ok(paths)
}

fn stem_of(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("image").to_string()
}

/// Saves next to the source format: .ppm sources stay PPM, everything else
/// becomes PNG.
fn save_like(src: &Path, dir: &Path, stem: &str, tag: &str, img: &ImageBuf) -> qcnn_core::Result<()> {
    if src.extension().and_then(|e| e.to_str()) == Some("ppm") {
        data::save_ppm(&dir.join(format!("{stem}_{tag}.ppm")), img)
    } else {
        data::save_png(&dir.join(format!("{stem}_{tag}.png")), img)
    }
}

pub fn run(args: DenoiseArgs) -> CmdResult {
    if args.csv.is_some() != args.compare.is_some() {
        return Err(Failure::usage("--csv and --compare must be used together"));
    }
    if args.pre_corrupted && args.compare.is_some() {
        return Err(Failure::usage(
            "--compare scores against clean references, so --pre-corrupted does not apply",
        ));
    }

    let mut main = load_restorer(&args.checkpoint)?;
    let mut other = args.compare.as_deref().map(load_restorer).transpose()?;
    if let Some(o) = &other {
        if main.is_quaternion() == o.is_quaternion() {
            return Err(Failure::usage(
                "--compare needs one quaternion and one real checkpoint",
            ));
        }
        if main.size != o.size {
            return Err(Failure::usage(format!(
                "checkpoints expect different input sizes ({} vs {})",
                main.size, o.size
            )));
        }
    }

    let mut paths = collect_paths(&args.dataset)?;
    if let Some(n) = args.subset {
        paths.truncate(n);
    }
    if let Some(out) = &args.out {
        fs::create_dir_all(out).map_err(|e| qcnn_core::Error::io(out, e))?;
    }

    let cfg = NoiseConfig { pixel_fraction: args.noise_fraction, sigma: args.noise_sigma };
    let mut rng = noise_rng(args.seed);
    let mut rows = Vec::new();
    for path in &paths {
        let stem = stem_of(path);
        let loaded = data::center_crop_resize(&data::load_image(path)?, main.size)?;
        let noisy = if args.pre_corrupted {
            loaded.clone()
        } else {
            data::corrupt(&loaded, &cfg, &mut rng)
        };
        let restored = (main.run)(&noisy)?;

        if let Some(o) = &mut other {
            let restored_other = (o.run)(&noisy)?;
            let (quat_img, real_img) = if main.is_quaternion() {
                (&restored, &restored_other)
            } else {
                (&restored_other, &restored)
            };
            let psnr_quat = metrics::image_psnr(quat_img, &loaded)?;
            let psnr_real = metrics::image_psnr(real_img, &loaded)?;
            println!("{stem}: real {psnr_real:.2} dB, quat {psnr_quat:.2} dB");
            rows.push(ComparisonRecord {
                image_id: stem.clone(),
                saturation: metrics::mean_saturation(&loaded),
                gray_angle: metrics::mean_gray_angle(&loaded),
                psnr_real,
                psnr_quat,
            });
        } else if args.pre_corrupted {
            println!("{stem}: restored");
        } else {
            let before = metrics::image_psnr(&noisy, &loaded)?;
            let after = metrics::image_psnr(&restored, &loaded)?;
            println!("{stem}: input {before:.2} dB, restored {after:.2} dB");
        }

        if let Some(out) = &args.out {
            save_like(path, out, &stem, "restored", &restored)?;
            if !args.pre_corrupted {
                save_like(path, out, &stem, "noisy", &noisy)?;
            }
        }
    }

    if let Some(csv) = &args.csv {
        metrics::write_comparison_csv(csv, &rows)?;
        let mean_d = rows.iter().map(|r| r.difference()).sum::<f64>() / rows.len().max(1) as f64;
        println!("csv -> {} (mean real-minus-quat = {mean_d:.2} dB)", csv.display());
    }
    if let Some(out) = &args.out {
        println!("images -> {}", out.display());
    }
    Ok(0)
}
