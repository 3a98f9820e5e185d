//! Whole-pipeline checks through the public API: synthesize a corpus on
//! disk, load it back, train, checkpoint, resume, and verify the numbers
//! line up at every joint.

use qcnn_core::data::{self, synth, NoiseConfig, Split};
use qcnn_core::layers::Padding;
use qcnn_core::metrics;
use qcnn_core::net::{InputKind, LayerSpec, Network, NetworkSpec, SkipLink};
use qcnn_core::presets;
use qcnn_core::training::{self, checkpoint, Optimizer, OptimizerConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn classifier_pipeline_with_checkpoint_resume() {
    let dir = tempfile::tempdir().unwrap();
    let batch = dir.path().join("data_batch_1.bin");
    synth::write_class_batch(&batch, 6, 21).unwrap();
    let data = data::load_labeled(&batch, Split::Train).unwrap();
    assert_eq!(data.images.len(), 60);

    let spec = presets::shallow_classifier(true, [2, 2, 4, 4], 16, 10);
    let mut net = Network::<f32>::build(spec, 3).unwrap();
    let mut opt = Optimizer::new(OptimizerConfig::rmsprop(3e-3), &net);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let first =
        training::train_classifier_epoch(&mut net, &mut opt, &data, 10, false, &mut rng).unwrap();
    let mut last = first;
    for _ in 0..9 {
        last = training::train_classifier_epoch(&mut net, &mut opt, &data, 10, false, &mut rng)
            .unwrap();
    }
    assert!(last < first, "loss should fall: {first} -> {last}");
    let acc = training::evaluate_classifier(&mut net, &data).unwrap();
    assert!(acc > 0.3, "well above 10-class chance, got {acc}");

    // Persist with optimizer state and prove the reload is equivalent.
    let ckpt = dir.path().join("model.qcnn");
    checkpoint::save(&ckpt, &net, Some(&opt), 3, 10).unwrap();
    let loaded = checkpoint::load::<f32>(&ckpt).unwrap();
    let mut net_b = loaded.net;
    let mut opt_b = loaded.optimizer.unwrap();
    assert_eq!(loaded.manifest.epochs_trained, 10);
    assert_eq!(training::evaluate_classifier(&mut net_b, &data).unwrap(), acc);

    // One more epoch along both paths stays bit-for-bit identical.
    let mut rng_a = ChaCha8Rng::seed_from_u64(99);
    let mut rng_b = ChaCha8Rng::seed_from_u64(99);
    let la =
        training::train_classifier_epoch(&mut net, &mut opt, &data, 10, false, &mut rng_a).unwrap();
    let lb = training::train_classifier_epoch(&mut net_b, &mut opt_b, &data, 10, false, &mut rng_b)
        .unwrap();
    assert_eq!(la, lb);
    for (p, q) in net.layer_params().iter().zip(net_b.layer_params()) {
        for (a, b) in p.arrays().iter().zip(q.arrays()) {
            assert_eq!(a.as_slice(), b.as_slice());
        }
    }
}

#[test]
fn denoiser_with_skip_beats_the_corruption() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let clean: Vec<_> = (0..4)
        .map(|i| synth::texture_image(24, 0.2 + 0.2 * i as f32, &mut rng))
        .collect();
    let pairs = data::corrupt_pairs(&clean, &NoiseConfig::default(), &mut rng);
    let baseline = pairs
        .iter()
        .map(|(n, c)| metrics::image_psnr(n, c).unwrap())
        .sum::<f64>()
        / pairs.len() as f64;

    // Downsample, restore, and patch detail back in through a skip.
    let spec = NetworkSpec {
        input: InputKind::Quaternion { replicate: 1 },
        input_h: 24,
        input_w: 24,
        layers: vec![
            LayerSpec::QConv { out_channels: 4, ksize: 3, stride: 1, padding: Padding::Same },
            LayerSpec::Relu,
            LayerSpec::AvgPool { window: 2 },
            LayerSpec::QConv { out_channels: 4, ksize: 3, stride: 1, padding: Padding::Same },
            LayerSpec::Relu,
            LayerSpec::QConvTranspose { out_channels: 4, ksize: 3, stride: 2, padding: Padding::Same },
            LayerSpec::Relu,
            LayerSpec::QConv { out_channels: 1, ksize: 3, stride: 1, padding: Padding::Same },
            LayerSpec::Tanh,
        ],
        skips: vec![SkipLink { from: 1, to: 6 }],
    };
    let mut net = Network::<f32>::build(spec, 11).unwrap();
    let mut opt = Optimizer::new(OptimizerConfig::adam(3e-3), &net);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let first = training::train_denoiser_epoch(&mut net, &mut opt, &pairs, 2, &mut rng).unwrap();
    let mut last = first;
    for _ in 0..99 {
        last = training::train_denoiser_epoch(&mut net, &mut opt, &pairs, 2, &mut rng).unwrap();
    }
    assert!(last < first, "mse should fall: {first} -> {last}");

    let restored = training::evaluate_denoiser(&mut net, &pairs).unwrap();
    assert!(
        restored > baseline,
        "restoration should beat the corrupted input: {restored} vs {baseline}"
    );
    let out = training::denoise_image(&mut net, &pairs[0].0).unwrap();
    assert_eq!((out.height, out.width), (24, 24));
    assert!(out.data.iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn texture_corpus_round_trips_with_saturation_sweep() {
    let dir = tempfile::tempdir().unwrap();
    synth::write_texture_corpus(dir.path(), 6, 24, 17).unwrap();
    let images = data::load_image_folder(dir.path(), 24).unwrap();
    assert_eq!(images.len(), 6);
    assert!(images.iter().all(|i| i.height == 24 && i.width == 24));

    // The corpus sweeps chroma upward so color metrics spread out.
    let first = metrics::mean_saturation(&images[0]);
    let last = metrics::mean_saturation(&images[5]);
    assert!(
        last > first + 0.1,
        "saturation sweep should spread: {first} .. {last}"
    );
    let a_first = metrics::mean_gray_angle(&images[0]);
    let a_last = metrics::mean_gray_angle(&images[5]);
    assert!(a_last > a_first, "gray angle should widen with chroma: {a_first} .. {a_last}");
}

#[test]
fn audits_agree_with_built_networks() {
    for spec in [
        presets::shallow_classifier_scaled(true, 10),
        presets::shallow_classifier(false, presets::SHALLOW_CONV_WIDTHS, presets::SHALLOW_DENSE_WIDTH, 10),
        presets::denoiser(true, 4),
    ] {
        let rows = qcnn_core::net::audit(&spec).unwrap();
        let total: u64 = rows.iter().map(|r| r.params).sum();
        let net = Network::<f32>::build_zeroed(spec).unwrap();
        assert_eq!(total as usize, net.num_params());
    }
}
