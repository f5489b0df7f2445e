use crate::imagecore::Tensor;

use super::ops::{conv2d, instance_norm, relu, softshrink, tanh, upsample_nearest2x, NORM_EPS};
use super::weights::{GeneratorWeights, ResnetBlock};
use super::NnError;

/// `x + IN(conv(ReLU(IN(conv(x)))))`, both convs 3x3 reflection-padded.
pub fn resnet_block(x: &Tensor, block: &ResnetBlock) -> Result<Tensor, NnError> {
    let mut out = residual_branch(x, block)?;
    for (o, &v) in out.data_mut().iter_mut().zip(x.data()) {
        *o += v;
    }
    Ok(out)
}

/// The residual branch alone, without the skip connection.
pub fn residual_branch(x: &Tensor, block: &ResnetBlock) -> Result<Tensor, NnError> {
    let h = conv2d(x, &block.conv1, 1, 1)?;
    let h = relu(&instance_norm(&h, &block.norm1, NORM_EPS)?);
    let h = conv2d(&h, &block.conv2, 1, 1)?;
    instance_norm(&h, &block.norm2, NORM_EPS)
}

/// Checks every parameter vector against the architecture manifest.
pub fn check_weights(weights: &GeneratorWeights) -> Result<(), NnError> {
    weights
        .arch
        .validate()
        .map_err(|e| NnError::Weights(e.to_string()))?;
    for ((name, shape), (_, data)) in weights.arch.manifest().iter().zip(weights.named_tensors()) {
        if shape.iter().product::<usize>() != data.len() {
            return Err(NnError::Weights(format!(
                "{name} holds {} values, shape {shape:?} needs {}",
                data.len(),
                shape.iter().product::<usize>()
            )));
        }
    }
    Ok(())
}

/// Full generator pass on a model-domain input of shape `(in, H, W)`.
///
/// Encoder: `n` x (3x3 stride-2 conv, IN, softshrink). Bottleneck: resnet
/// blocks. Decoder: `n` x (nearest 2x upsample, 3x3 conv, IN, ReLU). Head: 3x3
/// conv to the output channels, then tanh.
pub fn generator_forward(x: &Tensor, weights: &GeneratorWeights) -> Result<Tensor, NnError> {
    let arch = &weights.arch;
    let (c, h, w) = x.shape();
    if c != arch.in_channels {
        return Err(NnError::ChannelMismatch {
            expected: arch.in_channels,
            found: c,
        });
    }
    let multiple = arch.size_multiple();
    if h == 0 || w == 0 || h % multiple != 0 || w % multiple != 0 {
        return Err(NnError::IndivisibleSize {
            height: h,
            width: w,
            multiple,
        });
    }
    check_weights(weights)?;

    let mut t = x.clone();
    for blk in &weights.encoder {
        t = conv2d(&t, &blk.conv, 2, 1)?;
        t = instance_norm(&t, &blk.norm, NORM_EPS)?;
        t = softshrink(&t, &blk.shrink)?;
    }
    for blk in &weights.resnet {
        t = resnet_block(&t, blk)?;
    }
    for blk in &weights.decoder {
        t = upsample_nearest2x(&t);
        t = conv2d(&t, &blk.conv, 1, 1)?;
        t = relu(&instance_norm(&t, &blk.norm, NORM_EPS)?);
    }
    t = conv2d(&t, &weights.head, 1, 1)?;
    Ok(tanh(&t))
}
