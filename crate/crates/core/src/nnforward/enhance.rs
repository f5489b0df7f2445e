use rayon::prelude::*;
use thiserror::Error;

use crate::imagecore::{from_model_domain, to_model_domain, Frame, ShapeError, Tensor};
use crate::patchwork::{
    compute_layout, extract_pair, gaussian_weights, PatchConfig, PatchError, TileAccumulator,
};

use super::generator::{check_weights, generator_forward};
use super::weights::GeneratorWeights;
use super::NnError;

#[derive(Debug, Error)]
pub enum EnhanceError {
    #[error("local patch size {local} is not a multiple of {multiple}")]
    LocalSize { local: usize, multiple: usize },
    #[error(
        "generator maps {input} channels to {output}; tiled enhancement needs 6 -> at least 3"
    )]
    Channels { input: usize, output: usize },
    #[error(transparent)]
    Patch(#[from] PatchError),
    #[error(transparent)]
    Network(#[from] NnError),
    #[error(transparent)]
    Shape(#[from] ShapeError),
}

/// How tiles within one row of the layout are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnhanceStats {
    pub tiles: usize,
}

fn enhance_tile(
    frame: &Frame,
    origin: (usize, usize),
    weights: &GeneratorWeights,
    cfg: &PatchConfig,
) -> Result<Tensor, EnhanceError> {
    let pair = extract_pair(frame, origin, cfg)?;
    let out = generator_forward(&to_model_domain(&pair.tensor), weights)?;
    Ok(from_model_domain(&out.select_channels(0..3)))
}

/// Enhances every tile of the layout and blends the local outputs back.
///
/// Tiles of one layout row run concurrently under [`Execution::Parallel`],
/// but are always accumulated in layout order, so the result does not depend
/// on the schedule.
pub fn enhance_frame_with(
    frame: &Frame,
    weights: &GeneratorWeights,
    cfg: &PatchConfig,
    execution: Execution,
) -> Result<(Frame, EnhanceStats), EnhanceError> {
    let multiple = weights.arch.size_multiple();
    if !cfg.local().is_multiple_of(multiple) {
        return Err(EnhanceError::LocalSize {
            local: cfg.local(),
            multiple,
        });
    }
    if weights.arch.in_channels != 6 || weights.arch.out_channels < 3 {
        return Err(EnhanceError::Channels {
            input: weights.arch.in_channels,
            output: weights.arch.out_channels,
        });
    }
    check_weights(weights)?;
    let layout = compute_layout(frame.width(), frame.height(), cfg)?;
    let mut acc =
        TileAccumulator::new(frame.width(), frame.height(), gaussian_weights(cfg.local()));

    for &y in layout.ys() {
        let row: Vec<Tensor> = match execution {
            Execution::Serial => layout
                .xs()
                .iter()
                .map(|&x| enhance_tile(frame, (x, y), weights, cfg))
                .collect::<Result<_, _>>()?,
            Execution::Parallel => layout
                .xs()
                .par_iter()
                .map(|&x| enhance_tile(frame, (x, y), weights, cfg))
                .collect::<Result<_, _>>()?,
        };
        for (&x, tile) in layout.xs().iter().zip(&row) {
            acc.add((x, y), tile)?;
        }
    }
    Ok((
        acc.finish()?,
        EnhanceStats {
            tiles: layout.len(),
        },
    ))
}

pub fn enhance_frame(
    frame: &Frame,
    weights: &GeneratorWeights,
    cfg: &PatchConfig,
) -> Result<Frame, EnhanceError> {
    enhance_frame_with(frame, weights, cfg, Execution::Parallel).map(|(f, _)| f)
}
