//! Forward-only inference of the patch generator.
//!
//! The network is a reflection-padded encoder / resnet / decoder stack:
//! three stride-2 convolutions with instance norm and learnable soft
//! shrinkage, nine residual blocks, three upsample-conv-norm-ReLU blocks and
//! a tanh-bounded 3x3 head producing six channels. Inputs and outputs live
//! in `[-1, 1]`.

mod enhance;
mod generator;
pub mod ops;
pub mod testing;
mod weights;

pub use enhance::{enhance_frame, enhance_frame_with, EnhanceError, EnhanceStats, Execution};
pub use generator::{check_weights, generator_forward, residual_branch, resnet_block};
pub use ops::{
    conv2d, instance_norm, relu, softshrink, tanh, upsample_nearest2x, Conv, Norm, NORM_EPS,
};
pub use weights::{
    DecoderBlock, EncoderBlock, GeneratorArch, GeneratorWeights, ResnetBlock, WeightsError,
    WEIGHTS_MAGIC, WEIGHTS_VERSION,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("expected {expected} channels, found {found}")]
    ChannelMismatch { expected: usize, found: usize },
    #[error("{height}x{width} input is too small for a {kernel}x{kernel} kernel")]
    TooSmall {
        height: usize,
        width: usize,
        kernel: usize,
    },
    #[error("input {height}x{width} is not divisible by {multiple}")]
    IndivisibleSize {
        height: usize,
        width: usize,
        multiple: usize,
    },
    #[error("weights do not match the architecture: {0}")]
    Weights(String),
}
