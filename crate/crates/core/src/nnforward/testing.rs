//! Synthetic weight sets for exercising the engine without a trained model.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::ops::{Conv, NORM_EPS};
use super::weights::{GeneratorArch, GeneratorWeights};

/// Convolution weights and biases from `N(0, std^2)`, identity norms,
/// shrink thresholds 0.05.
pub fn random_weights(arch: GeneratorArch, seed: u64, std: f32) -> GeneratorWeights {
    let mut w = GeneratorWeights::zeros(arch).expect("valid architecture");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0f32, std).expect("finite std");
    for (name, data) in w.named_tensors_mut() {
        if name.ends_with(".weight") || name.ends_with(".bias") {
            data.iter_mut().for_each(|v| *v = normal.sample(&mut rng));
        } else if name.ends_with(".lambda") {
            data.iter_mut().for_each(|v| *v = 0.05);
        }
    }
    w
}

/// Convolution gain that keeps every normalised channel's variance far below
/// `NORM_EPS`, so instance norm acts as a fixed linear rescale.
const TINY: f32 = 1e-4;
/// Offset added before each decoder ReLU so it never clips.
const LIFT: f32 = 2.0;

/// A weight set that approximately reproduces the local RGB input.
///
/// Channels 0-2 travel through the network alone: the encoder averages 2x2
/// blocks, residual branches are zero, and each decoder block's nearest
/// upsample followed by a `[1 2 1]` kernel is exact bilinear interpolation.
/// Instance norm still removes each channel's mean, so the output is
/// `tanh(x - mean(x))` per tile channel; inputs whose tile means sit at 0 in
/// the model domain (0.5 in pixels) come back almost unchanged.
pub fn passthrough_weights(arch: GeneratorArch) -> GeneratorWeights {
    assert!(
        arch.base_filters >= 3 && arch.in_channels >= 3 && arch.out_channels >= 3,
        "pass-through needs at least three channels throughout"
    );
    let mut w = GeneratorWeights::zeros(arch).expect("valid architecture");
    let unit_gamma = NORM_EPS.sqrt() / TINY;

    let set = |conv: &mut Conv, c: usize, taps: &[(usize, usize, f32)], scale: f32| {
        for &(ky, kx, v) in taps {
            let i = conv.index(c, c, ky, kx);
            conv.weight[i] = v * scale;
        }
    };
    let block_mean = [(1, 1, 0.25), (1, 2, 0.25), (2, 1, 0.25), (2, 2, 0.25)];
    let mut bilinear = Vec::with_capacity(9);
    for (ky, wy) in [1.0, 2.0, 1.0].into_iter().enumerate() {
        for (kx, wx) in [1.0, 2.0, 1.0].into_iter().enumerate() {
            bilinear.push((ky, kx, wy * wx / 16.0));
        }
    }

    for blk in &mut w.encoder {
        blk.norm.gamma.iter_mut().for_each(|g| *g = 0.0);
        for c in 0..3 {
            set(&mut blk.conv, c, &block_mean, TINY);
            blk.norm.gamma[c] = unit_gamma;
        }
    }
    for blk in &mut w.resnet {
        blk.norm1.gamma.iter_mut().for_each(|g| *g = 0.0);
        blk.norm2.gamma.iter_mut().for_each(|g| *g = 0.0);
    }
    for blk in &mut w.decoder {
        blk.norm.gamma.iter_mut().for_each(|g| *g = 0.0);
        for c in 0..3 {
            set(&mut blk.conv, c, &bilinear, TINY);
            blk.norm.gamma[c] = unit_gamma;
            blk.norm.beta[c] = LIFT;
        }
    }
    for c in 0..arch.out_channels.min(6) {
        let src = c % 3;
        let i = w.head.index(c, src, 1, 1);
        w.head.weight[i] = 1.0;
        w.head.bias[c] = -LIFT;
    }
    w
}
