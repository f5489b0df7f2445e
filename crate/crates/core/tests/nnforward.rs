mod common;

use lowlight::imagecore::{Frame, Tensor};
use lowlight::nnforward::testing::{passthrough_weights, random_weights};
use lowlight::nnforward::*;
use lowlight::patchwork::PatchConfig;
use proptest::prelude::*;
use rand::Rng;

fn small_arch() -> GeneratorArch {
    GeneratorArch {
        base_filters: 4,
        n_resnet_blocks: 2,
        ..GeneratorArch::default()
    }
}

#[test]
fn conv_matches_naive_reference() {
    let mut rng = common::rng(11);
    for _ in 0..40 {
        let k = [1usize, 3, 5][rng.random_range(0..3)];
        let stride = rng.random_range(1..=2);
        let pad = rng.random_range(0..=k / 2);
        let (c, o) = (rng.random_range(1..6), rng.random_range(1..6));
        let (h, w) = (
            rng.random_range(k.max(2)..20),
            rng.random_range(k.max(2)..20),
        );
        let x = common::random_tensor(c, h, w, &mut rng);
        let conv = common::random_conv(o, c, k, &mut rng);
        let fast = conv2d(&x, &conv, stride, pad).unwrap();
        let slow = common::naive_conv(&x, &conv, stride, pad);
        assert_eq!(fast.shape(), slow.shape());
        assert!(fast.max_abs_diff(&slow) < 1e-5);
    }
}

#[test]
fn resnet_block_matches_composed_primitives() {
    let mut rng = common::rng(5);
    let ch = 5;
    let block = ResnetBlock {
        conv1: common::random_conv(ch, ch, 3, &mut rng),
        norm1: Norm {
            gamma: (0..ch).map(|_| rng.random_range(0.5..1.5)).collect(),
            beta: (0..ch).map(|_| rng.random_range(-0.2..0.2)).collect(),
        },
        conv2: common::random_conv(ch, ch, 3, &mut rng),
        norm2: Norm {
            gamma: (0..ch).map(|_| rng.random_range(0.5..1.5)).collect(),
            beta: (0..ch).map(|_| rng.random_range(-0.2..0.2)).collect(),
        },
    };
    let x = common::random_tensor(ch, 9, 12, &mut rng);

    // Independent composition: naive conv, population-variance norm in f64.
    let norm = |t: &Tensor, n: &Norm| {
        let (c, h, w) = t.shape();
        let mut out = Tensor::zeros(c, h, w);
        for k in 0..c {
            let p = t.plane(k);
            let mean = p.iter().map(|&v| v as f64).sum::<f64>() / p.len() as f64;
            let var = p.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / p.len() as f64;
            for (i, &v) in p.iter().enumerate() {
                let y =
                    (v as f64 - mean) / (var + 1e-5).sqrt() * n.gamma[k] as f64 + n.beta[k] as f64;
                out.set(k, i / w, i % w, y as f32);
            }
        }
        out
    };
    let h = norm(&common::naive_conv(&x, &block.conv1, 1, 1), &block.norm1).map(|v| v.max(0.0));
    let h = norm(&common::naive_conv(&h, &block.conv2, 1, 1), &block.norm2);
    let expected = Tensor::new(
        ch,
        9,
        12,
        x.data().iter().zip(h.data()).map(|(a, b)| a + b).collect(),
    )
    .unwrap();

    let got = resnet_block(&x, &block).unwrap();
    assert!(got.max_abs_diff(&expected) < 1e-4);
}

#[test]
fn forward_shapes_for_every_local_size() {
    let w = random_weights(small_arch(), 3, 0.2);
    let mut rng = common::rng(3);
    for n in [8usize, 16, 24, 32] {
        let x = common::random_tensor(6, n, n, &mut rng);
        let y = generator_forward(&x, &w).unwrap();
        assert_eq!(y.shape(), (6, n, n));
        assert!(y.data().iter().all(|v| v.is_finite() && v.abs() < 1.0));
    }
}

#[test]
fn forward_rejects_bad_input() {
    let w = random_weights(small_arch(), 3, 0.2);
    let mut rng = common::rng(4);
    assert!(matches!(
        generator_forward(&common::random_tensor(3, 16, 16, &mut rng), &w),
        Err(NnError::ChannelMismatch { .. })
    ));
    assert!(matches!(
        generator_forward(&common::random_tensor(6, 12, 16, &mut rng), &w),
        Err(NnError::IndivisibleSize { .. })
    ));
}

#[test]
fn enhance_is_schedule_independent() {
    let w = random_weights(small_arch(), 9, 0.2);
    let frame = common::uniform_frame(90, 70, &mut common::rng(9));
    let cfg = PatchConfig::new(32, 64).unwrap();
    let (serial, stats) = enhance_frame_with(&frame, &w, &cfg, Execution::Serial).unwrap();
    let (parallel, _) = enhance_frame_with(&frame, &w, &cfg, Execution::Parallel).unwrap();
    assert_eq!(stats.tiles, 20);
    assert_eq!(serial, parallel);
}

#[test]
fn enhance_rejects_local_size_not_divisible_by_eight() {
    let w = random_weights(small_arch(), 1, 0.2);
    let frame = Frame::filled(64, 64, 0.5).unwrap();
    let cfg = PatchConfig::new(20, 40).unwrap();
    assert!(matches!(
        enhance_frame(&frame, &w, &cfg),
        Err(EnhanceError::LocalSize { .. })
    ));
}

#[test]
fn passthrough_reproduces_smooth_frames() {
    let w = passthrough_weights(small_arch());
    let frame = common::smooth_frame(96, 96, &mut common::rng(2));
    let cfg = PatchConfig::new(96, 200).unwrap();
    let out = enhance_frame(&frame, &w, &cfg).unwrap();
    let mae = out
        .data()
        .iter()
        .zip(frame.data())
        .map(|(a, b)| (a - b).abs())
        .sum::<f32>()
        / frame.data().len() as f32;
    assert!(mae < 0.02, "mae {mae}");
}

#[test]
fn weights_round_trip_through_a_file() {
    let w = random_weights(small_arch(), 21, 0.3);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.llgw");
    w.save(&path).unwrap();
    assert_eq!(GeneratorWeights::load(&path).unwrap(), w);
    assert!(!dir.path().join("g.llgw.tmp").exists());
}

#[test]
fn malformed_files_are_rejected_distinctly() {
    let bytes = random_weights(small_arch(), 1, 0.1).to_bytes();

    let mut magic = bytes.clone();
    magic[0] = b'X';
    assert!(matches!(
        GeneratorWeights::from_bytes(&magic),
        Err(WeightsError::BadMagic(_))
    ));

    let mut version = bytes.clone();
    version[4..8].copy_from_slice(&2u32.to_le_bytes());
    assert!(matches!(
        GeneratorWeights::from_bytes(&version),
        Err(WeightsError::UnsupportedVersion(2))
    ));

    let shape = common::rewrite_header(&bytes, |h| {
        h["tensors"][5]["shape"] = serde_json::json!([7])
    });
    match GeneratorWeights::from_bytes(&shape) {
        Err(WeightsError::ShapeMismatch { name, .. }) => assert_eq!(name, "enc.1.conv.weight"),
        other => panic!("{other:?}"),
    }

    let mut nan = bytes.clone();
    let at = common::blob_start(&bytes) + 8;
    nan[at..at + 4].copy_from_slice(&f32::NAN.to_le_bytes());
    assert!(matches!(
        GeneratorWeights::from_bytes(&nan),
        Err(WeightsError::NonFinite { index: 2, .. })
    ));

    let missing = common::rewrite_header(&bytes, |h| {
        h["tensors"].as_array_mut().unwrap().pop();
    });
    assert!(matches!(
        GeneratorWeights::from_bytes(&missing),
        Err(WeightsError::MissingTensor(_))
    ));

    let extra = common::rewrite_header(&bytes, |h| {
        let first = h["tensors"][0].clone();
        h["tensors"].as_array_mut().unwrap().push(first);
    });
    assert!(matches!(
        GeneratorWeights::from_bytes(&extra),
        Err(WeightsError::DuplicateTensor(_))
    ));

    let misaligned =
        common::rewrite_header(&bytes, |h| h["tensors"][0]["offset"] = serde_json::json!(2));
    assert!(matches!(
        GeneratorWeights::from_bytes(&misaligned),
        Err(WeightsError::Misaligned { .. })
    ));

    let dtype = common::rewrite_header(&bytes, |h| {
        h["tensors"][0]["dtype"] = serde_json::json!("f16")
    });
    assert!(matches!(
        GeneratorWeights::from_bytes(&dtype),
        Err(WeightsError::Dtype { .. })
    ));

    assert!(matches!(
        GeneratorWeights::from_bytes(&bytes[..bytes.len() - 4]),
        Err(WeightsError::OutOfBounds { .. })
    ));
    assert!(matches!(
        GeneratorWeights::from_bytes(&bytes[..10]),
        Err(WeightsError::Truncated(_))
    ));
    assert!(matches!(
        GeneratorWeights::from_bytes(b"LLGW\x01\0\0\0\x02\0\0\0{]"),
        Err(WeightsError::Header(_))
    ));

    let arch = common::rewrite_header(&bytes, |h| {
        h["arch"]["n_decoder_blocks"] = serde_json::json!(2)
    });
    assert!(matches!(
        GeneratorWeights::from_bytes(&arch),
        Err(WeightsError::InvalidArch(_))
    ));
}

#[test]
fn negative_shrink_thresholds_are_clamped_on_load() {
    let mut w = random_weights(small_arch(), 1, 0.1);
    w.encoder[0].shrink[0] = -0.3;
    let back = GeneratorWeights::from_bytes(&w.to_bytes()).unwrap();
    assert_eq!(back.encoder[0].shrink[0], 0.0);
}

#[test]
fn default_manifest_has_nine_resnet_blocks() {
    let arch = GeneratorArch::default();
    let manifest = arch.manifest();
    assert_eq!(manifest.len(), 101);
    assert!(manifest.iter().any(|(n, _)| n == "res.8.conv2.weight"));
    assert!(!manifest.iter().any(|(n, _)| n == "res.9.conv1.weight"));
    assert_eq!(
        manifest.last().unwrap(),
        &("head.conv.bias".to_string(), vec![6])
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softshrink_never_grows_magnitude(v in prop::collection::vec(-5.0f32..5.0, 1..64), lambda in 0.0f32..2.0) {
        let x = Tensor::new(1, 1, v.len(), v.clone()).unwrap();
        let y = softshrink(&x, &[lambda]).unwrap();
        for (a, b) in v.iter().zip(y.data()) {
            prop_assert!(b.abs() <= a.abs());
            prop_assert!((a.abs() - b.abs() - lambda.min(a.abs())).abs() < 1e-6);
        }
    }

    #[test]
    fn softshrink_preserves_sign(v in prop::collection::vec(-5.0f32..5.0, 1..64), lambda in 0.0f32..2.0) {
        let x = Tensor::new(1, 1, v.len(), v.clone()).unwrap();
        let y = softshrink(&x, &[lambda]).unwrap();
        prop_assert!(v.iter().zip(y.data()).all(|(a, b)| a * b >= 0.0));
    }

    #[test]
    fn instance_norm_ignores_constant_shift(seed in any::<u64>(), shift in -10.0f32..10.0) {
        let mut rng = common::rng(seed);
        let x = common::random_tensor(3, 7, 9, &mut rng);
        let norm = Norm {
            gamma: vec![1.5, 0.5, 2.0],
            beta: vec![0.1, -0.2, 0.0],
        };
        let a = instance_norm(&x, &norm, NORM_EPS).unwrap();
        let b = instance_norm(&x.map(|v| v + shift), &norm, NORM_EPS).unwrap();
        prop_assert!(a.max_abs_diff(&b) < 1e-5 * (1.0 + shift.abs()));
    }

    #[test]
    fn instance_norm_output_is_standardised(v in prop::collection::vec(-3.0f32..3.0, 16..64)) {
        let n = v.len();
        let x = Tensor::new(1, 1, n, v).unwrap();
        let y = instance_norm(&x, &Norm::identity(1), NORM_EPS).unwrap();
        let mean = y.data().iter().map(|&v| v as f64).sum::<f64>() / n as f64;
        prop_assert!(mean.abs() < 1e-4);
        let var = y.data().iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n as f64;
        prop_assert!(var <= 1.0 + 1e-4);
    }

    #[test]
    fn upsample_then_stride_two_pick_is_identity(c in 1usize..4, h in 1usize..10, w in 1usize..10, seed in any::<u64>()) {
        let x = common::random_tensor(c, h, w, &mut common::rng(seed));
        let up = upsample_nearest2x(&x);
        prop_assert_eq!(up.shape(), (c, 2 * h, 2 * w));
        for k in 0..c {
            for y in 0..h {
                for xx in 0..w {
                    prop_assert_eq!(up.get(k, 2 * y + 1, 2 * xx + 1), x.get(k, y, xx));
                }
            }
        }
    }
}
