//! The acceptance gate: ten go/no-go checks covering the math core, the
//! gradient machinery, parameter accounting, and desk-scale training runs.
//! Each test prints one pass/fail line (run with --nocapture to see them all)
//! and enforces its own wall-clock budget.

use qcnn_core::data::synth::{write_class_batch, write_texture_corpus};
use qcnn_core::data::{load_labeled, Split};
use qcnn_core::gradcheck;
use qcnn_core::layers::{
    qconv2d_forward, real_conv2d_forward, ConvConfig, Padding, QConvKernel, RealConvKernel,
};
use qcnn_core::metrics;
use qcnn_core::num::Real;
use qcnn_core::qtensor::{QFeatureMap, RealFeatureMap};
use qcnn_core::quat::rotation_coeffs;
use qcnn_core::training::{self, checkpoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

fn verdict(n: usize, what: &str, ok: bool) {
    println!("criterion {n}: {what} ... {}", if ok { "pass" } else { "FAIL" });
    assert!(ok, "criterion {n} ({what}) failed");
}

fn budget(n: usize, started: Instant, limit: Duration) {
    let used = started.elapsed();
    assert!(used <= limit, "criterion {n} took {used:.1?}, budget is {limit:?}");
}

fn qcnn_ok(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_qcnn"))
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "qcnn {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Max absolute difference scaled by the larger max-norm. Per-element
/// relative error blows up near sign changes even when both arrays agree to
/// working precision; this form does not.
fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch {} vs {}", a.len(), b.len());
    let norm = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let scale = norm(a).max(norm(b)).max(1e-30);
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

fn random_qmap<F: Real>(c: usize, h: usize, w: usize, rng: &mut impl Rng) -> QFeatureMap<F> {
    let mut x = QFeatureMap::zeros(c, h, w);
    for v in x.as_mut_slice() {
        *v = F::from_f64(rng.random_range(-1.0..1.0));
    }
    x
}

fn random_kernel<F: Real>(
    out_c: usize,
    in_c: usize,
    l: usize,
    rng: &mut impl Rng,
) -> QConvKernel<F> {
    let n = out_c * in_c * l * l;
    let s = (0..n).map(|_| F::from_f64(rng.random_range(-1.0..1.0))).collect();
    let theta = (0..n)
        .map(|_| F::from_f64(rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)))
        .collect();
    QConvKernel::from_parts(out_c, in_c, l, s, theta).unwrap()
}

#[test]
fn criterion_01_conv_matrix_path_matches_rotation_oracle() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let c = rng.random_range(1..=3);
        let k = rng.random_range(1..=2);
        let l = rng.random_range(1..=3);
        let h = rng.random_range(l..=8);
        let w = rng.random_range(l..=8);
        let cfg = ConvConfig {
            stride: rng.random_range(1..=2),
            padding: if i % 2 == 0 { Padding::Valid } else { Padding::Same },
        };
        let x = random_qmap::<f64>(c, h, w, &mut rng);
        let kernel = random_kernel::<f64>(k, c, l, &mut rng);
        let engine = qconv2d_forward(&x, &kernel, &cfg).unwrap();
        let oracle = gradcheck::qconv_reference(&x, &kernel, &cfg).unwrap();
        worst = worst.max(max_rel(engine.as_slice(), oracle.as_slice()));
    }
    verdict(
        1,
        &format!("matrix convolution matches the per-tap rotation oracle (100 cases, worst {worst:.2e} vs 1e-10)"),
        worst <= 1e-10,
    );
    budget(1, started, Duration::from_secs(10));
}

fn det3(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

#[test]
fn criterion_02_rotation_matrix_properties() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let theta: f64 = rng.random_range(-2.0 * std::f64::consts::PI..2.0 * std::f64::consts::PI);
        let m = rotation_coeffs(theta).rows();
        // Orthogonality: M * M^T = I.
        for r in 0..3 {
            for c in 0..3 {
                let dot: f64 = (0..3).map(|k| m[r][k] * m[c][k]).sum();
                let want = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((dot - want).abs());
            }
        }
        worst = worst.max((det3(m) - 1.0).abs());
        for r in 0..3 {
            // Fixes (1,1,1), which is also the row sum; column sums too.
            let row: f64 = m[r].iter().sum();
            let col: f64 = (0..3).map(|k| m[k][r]).sum();
            worst = worst.max((row - 1.0).abs()).max((col - 1.0).abs());
        }
    }
    verdict(
        2,
        &format!("rotation matrices are special orthogonal and fix the gray axis (1000 angles, worst {worst:.2e} vs 1e-12)"),
        worst <= 1e-12,
    );
    budget(2, started, Duration::from_secs(1));
}

#[test]
fn criterion_03_gradient_suite() {
    let started = Instant::now();
    let reports = gradcheck::run_all(7).unwrap();
    let all_pass = reports.iter().all(|r| r.passed);
    let fd_checks = reports.iter().filter(|r| r.tolerance == gradcheck::TOLERANCE).count();
    for r in &reports {
        assert!(r.passed, "{} failed: max err {:.3e} vs {:.0e}", r.name, r.max_err, r.tolerance);
    }
    verdict(
        3,
        &format!(
            "finite-difference suite passes ({} checks, {fd_checks} at 1e-4, three seeds each)",
            reports.len()
        ),
        all_pass && reports.len() == 10 && fd_checks == 8,
    );
    budget(3, started, Duration::from_secs(120));
}

#[test]
fn criterion_04_grayscale_input_reduces_to_real_convolution() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut worst = 0.0f64;
    for i in 0..20 {
        let c = rng.random_range(1..=3);
        let k = rng.random_range(1..=3);
        let l = if i % 3 == 0 { 1 } else { 3 };
        let h = rng.random_range(5..=9);
        let w = rng.random_range(5..=9);
        let cfg = ConvConfig {
            stride: rng.random_range(1..=2),
            padding: if i % 2 == 0 { Padding::Valid } else { Padding::Same },
        };

        // Channel-equal input: every pixel has r = g = b.
        let mut x = QFeatureMap::<f32>::zeros(c, h, w);
        let mut planes = RealFeatureMap::<f32>::zeros(c, h, w);
        for ci in 0..c {
            for y in 0..h {
                for xi in 0..w {
                    let v: f32 = rng.random_range(0.0..1.0);
                    x.set_pixel(ci, y, xi, [v, v, v]);
                    planes.set(ci, y, xi, v);
                }
            }
        }
        let kernel = random_kernel::<f32>(k, c, l, &mut rng);
        let real_kernel =
            RealConvKernel::from_weights(k, c, l, kernel.s.clone()).unwrap();

        let q_out = qconv2d_forward(&x, &kernel, &cfg).unwrap();
        let r_out = real_conv2d_forward(&planes, &real_kernel, &cfg).unwrap();

        let mut qs = Vec::new();
        let mut rs = Vec::new();
        for ki in 0..k {
            for y in 0..q_out.height() {
                for xi in 0..q_out.width() {
                    let p = q_out.pixel(ki, y, xi);
                    let r = r_out.get(ki, y, xi) as f64;
                    for part in p {
                        qs.push(part as f64);
                        rs.push(r);
                    }
                }
            }
        }
        worst = worst.max(max_rel(&qs, &rs));
    }
    verdict(
        4,
        &format!("gray inputs make quaternion conv equal real conv with the scale weights (worst {worst:.2e} vs 1e-6)"),
        worst <= 1e-6,
    );
    budget(4, started, Duration::from_secs(5));
}

#[test]
fn criterion_05_channel_sums_are_rotation_invariant() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut worst = 0.0f64;
    for i in 0..20 {
        let c = rng.random_range(1..=3);
        let k = rng.random_range(1..=3);
        let l = 3;
        let h = rng.random_range(5..=9);
        let w = rng.random_range(5..=9);
        let cfg = ConvConfig {
            stride: rng.random_range(1..=2),
            padding: if i % 2 == 0 { Padding::Valid } else { Padding::Same },
        };
        let x = random_qmap::<f32>(c, h, w, &mut rng);
        let a = random_kernel::<f32>(k, c, l, &mut rng);
        // Same scales, freshly drawn angles.
        let b = random_kernel::<f32>(k, c, l, &mut rng);
        let b = QConvKernel::from_parts(k, c, l, a.s.clone(), b.theta).unwrap();

        let part_sums = |out: &QFeatureMap<f32>| -> Vec<f64> {
            let mut sums = Vec::new();
            for ki in 0..k {
                for y in 0..out.height() {
                    for xi in 0..out.width() {
                        let p = out.pixel(ki, y, xi);
                        sums.push(p[0] as f64 + p[1] as f64 + p[2] as f64);
                    }
                }
            }
            sums
        };
        let s1 = part_sums(&qconv2d_forward(&x, &a, &cfg).unwrap());
        let s2 = part_sums(&qconv2d_forward(&x, &b, &cfg).unwrap());
        worst = worst.max(max_rel(&s1, &s2));
    }
    verdict(
        5,
        &format!("per-pixel channel sums ignore the rotation angles (worst {worst:.2e} vs 1e-5)"),
        worst <= 1e-5,
    );
    budget(5, started, Duration::from_secs(5));
}

/// Params column of every convolution row in an `audit` table.
fn audit_conv_params(args: &[&str]) -> Vec<u64> {
    let text = qcnn_ok(args);
    text.lines()
        .filter_map(|line| {
            let t: Vec<&str> = line.split_whitespace().collect();
            match t.get(1) {
                Some(&"qconv") | Some(&"conv") => t[t.len() - 2].parse().ok(),
                _ => None,
            }
        })
        .collect()
}

#[test]
fn criterion_06_parameter_accounting() {
    let started = Instant::now();
    // The shallow stack convolves (in, out) channel pairs of these sizes
    // with 3x3 taps.
    let pairs: [(u64, u64); 4] = [(3, 32), (32, 32), (32, 64), (64, 64)];
    let expect_real: Vec<u64> = pairs.iter().map(|(c, k)| k * c * 9).collect();
    let expect_quat: Vec<u64> = expect_real.iter().map(|p| 2 * p).collect();

    let quat = audit_conv_params(&["audit", "--preset", "shallow-cifar", "--quaternion"]);
    let real = audit_conv_params(&["audit", "--preset", "shallow-cifar"]);
    assert_eq!(quat, expect_quat, "quaternion conv rows must be 2KCL^2");
    assert_eq!(real, expect_real, "real conv rows must be KCL^2");
    let quat_total: u64 = quat.iter().sum();
    let real_total: u64 = real.iter().sum();
    assert_eq!(quat_total, 2 * real_total, "equal widths must cost exactly 2x");

    // Scaling the quaternion widths by 1/sqrt(2) lands within 2% of the
    // full-width real network's convolution budget.
    let reduced = audit_conv_params(&[
        "audit",
        "--preset",
        "shallow-cifar",
        "--quaternion",
        "--filter-ratio",
        "0.7071067811865476",
    ]);
    let reduced_total: u64 = reduced.iter().sum();
    let ratio = reduced_total as f64 / real_total as f64;
    verdict(
        6,
        &format!(
            "audit counts are exact (2x at equal widths; ratio-scaled quat/real = {ratio:.5})"
        ),
        (ratio - 1.0).abs() <= 0.02,
    );
    budget(6, started, Duration::from_secs(1));
}

/// (epoch, eval_metric) pairs from a per-epoch CSV.
fn csv_metrics(path: &Path) -> Vec<(usize, f64)> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("epoch,train_loss,eval_metric,wall_secs"), "bad header");
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect()
}

#[test]
fn criterion_07_tiny_subset_overfits() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let batch = dir.path().join("batch.bin");
    write_class_batch(&batch, 7, 101).unwrap();
    let csv = dir.path().join("c7.csv");
    let model = dir.path().join("c7.qcnn");
    qcnn_ok(&[
        "train",
        "--dataset",
        batch.to_str().unwrap(),
        "--quaternion",
        "--subset",
        "64",
        "--epochs",
        "200",
        "--batch-size",
        "4",
        "--seed",
        "0",
        "--stop-accuracy",
        "0.95",
        "--csv",
        csv.to_str().unwrap(),
        "--out",
        model.to_str().unwrap(),
    ]);
    let rows = csv_metrics(&csv);
    let (epochs, final_acc) = *rows.last().unwrap();
    verdict(
        7,
        &format!(
            "64-image subset reaches 95% training accuracy (got {final_acc:.4} at epoch {epochs}, {:.0?})",
            started.elapsed()
        ),
        final_acc >= 0.95 && epochs <= 200,
    );
    budget(7, started, Duration::from_secs(900));
}

#[test]
fn criterion_08_both_flavors_clear_the_classification_bar() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("cifar");
    fs::create_dir_all(&data).unwrap();
    write_class_batch(&data.join("data_batch_1.bin"), 500, 201).unwrap();
    write_class_batch(&data.join("test_batch.bin"), 100, 202).unwrap();

    let mut finals = Vec::new();
    for quaternion in [false, true] {
        let tag = if quaternion { "quat" } else { "real" };
        let csv = dir.path().join(format!("c8_{tag}.csv"));
        let model = dir.path().join(format!("c8_{tag}.qcnn"));
        let mut args = vec![
            "train",
            "--dataset",
            data.to_str().unwrap(),
            "--conv-widths",
            "16,16,32,32",
            "--dense-width",
            "256",
            "--epochs",
            "20",
            "--batch-size",
            "50",
            "--seed",
            "0",
            "--csv",
            csv.to_str().unwrap(),
            "--out",
            model.to_str().unwrap(),
        ];
        if quaternion {
            args.push("--quaternion");
        }
        qcnn_ok(&args);
        let rows = csv_metrics(&csv);
        assert_eq!(rows.len(), 20, "{tag} run must log all 20 epochs");
        finals.push(rows.last().unwrap().1);
    }
    let (real_acc, quat_acc) = (finals[0], finals[1]);
    // The full-scale accuracy gap is not desk-reproducible; direction is
    // informational, the 35% floor is the gate.
    verdict(
        8,
        &format!(
            "5000/1000 runs beat 35% test accuracy (real {real_acc:.4}, quaternion {quat_acc:.4}, {:.0?})",
            started.elapsed()
        ),
        real_acc > 0.35 && quat_acc > 0.35,
    );
    budget(8, started, Duration::from_secs(2700));
}

#[test]
fn criterion_09_denoiser_gains_five_db_over_the_corruption() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("textures");
    write_texture_corpus(&corpus, 208, 128, 301).unwrap();
    let csv = dir.path().join("c9.csv");
    let model = dir.path().join("c9.qcnn");
    let stdout = qcnn_ok(&[
        "train",
        "--preset",
        "denoiser",
        "--quaternion",
        "--dataset",
        corpus.to_str().unwrap(),
        "--base-width",
        "8",
        "--epochs",
        "50",
        "--batch-size",
        "16",
        "--lr",
        "0.001",
        "--holdout",
        "32",
        "--seed",
        "0",
        "--csv",
        csv.to_str().unwrap(),
        "--out",
        model.to_str().unwrap(),
    ]);
    // The run banner reports mean held-out PSNR of the corrupted inputs; the
    // trained model must clear it by 5 dB.
    let baseline: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("corrupted baseline = ")?.split(' ').next()?.parse().ok())
        .expect("baseline line in output");
    let rows = csv_metrics(&csv);
    let final_psnr = rows.last().unwrap().1;
    verdict(
        9,
        &format!(
            "held-out PSNR {final_psnr:.2} dB vs corrupted {baseline:.2} dB (need +5, {:.0?})",
            started.elapsed()
        ),
        final_psnr >= baseline + 5.0,
    );
    budget(9, started, Duration::from_secs(3600));
}

#[test]
fn criterion_10_reruns_and_reloads_are_bitwise_stable() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let batch = dir.path().join("batch.bin");
    write_class_batch(&batch, 10, 401).unwrap();

    let mut outputs = Vec::new();
    for run in 0..2 {
        let csv = dir.path().join(format!("c10_{run}.csv"));
        let model = dir.path().join(format!("c10_{run}.qcnn"));
        qcnn_ok(&[
            "train",
            "--dataset",
            batch.to_str().unwrap(),
            "--conv-widths",
            "8,8,16,16",
            "--dense-width",
            "64",
            "--subset",
            "64",
            "--epochs",
            "2",
            "--batch-size",
            "8",
            "--seed",
            "3",
            "--csv",
            csv.to_str().unwrap(),
            "--out",
            model.to_str().unwrap(),
        ]);
        outputs.push((fs::read(&csv).unwrap(), fs::read(&model).unwrap()));
    }
    let same_csv = outputs[0].0 == outputs[1].0;
    let same_ckpt = outputs[0].1 == outputs[1].1;

    // Reloading the checkpoint reproduces the final training-time evaluation
    // exactly: same subset, same predictions, same accuracy to six digits
    // (with 64 images, one flipped prediction moves the third digit).
    let model = dir.path().join("c10_0.qcnn");
    let mut net = checkpoint::load::<f32>(&model).unwrap().net;
    let mut data = load_labeled(&batch, Split::Train).unwrap();
    data.truncate(64);
    let reloaded_acc = training::evaluate_classifier(&mut net, &data).unwrap();
    let logged = fs::read_to_string(dir.path().join("c10_0.csv")).unwrap();
    let logged_acc = logged.lines().last().unwrap().split(',').nth(2).unwrap().to_string();
    let same_eval = metrics::sig6(reloaded_acc) == logged_acc;

    // And the eval subcommand is stable across invocations.
    let eval_args = [
        "eval",
        "--checkpoint",
        model.to_str().unwrap(),
        "--dataset",
        batch.to_str().unwrap(),
        "--subset",
        "64",
    ];
    let same_cmd = qcnn_ok(&eval_args) == qcnn_ok(&eval_args);

    verdict(
        10,
        &format!("fixed seeds rerun bit-identically and checkpoints reload exactly (csv {same_csv}, checkpoint {same_ckpt}, reload {same_eval}, eval {same_cmd})"),
        same_csv && same_ckpt && same_eval && same_cmd,
    );
    budget(10, started, Duration::from_secs(60));
}
