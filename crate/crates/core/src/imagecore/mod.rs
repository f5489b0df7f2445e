//! Image and tensor containers shared by every stage of the pipeline.
//!
//! Frames are planar RGB with samples in `[0, 1]`. Tensors are planar
//! `(channels, height, width)` buffers with no range restriction beyond
//! finiteness. The generator runs in `[-1, 1]`; [`to_model_domain`] and
//! [`from_model_domain`] convert between the two conventions.

mod io;
mod resize;

pub use io::{
    load_frame, load_frame_detect, load_raw, save_frame, save_raw, BitDepth, FrameFormat,
    FrameIoError, SequencePattern, RAW_MAGIC,
};
pub use resize::{resize_area, ResizeError};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ShapeError {
    #[error("dimensions must be non-zero, got {width}x{height}")]
    ZeroSized { width: usize, height: usize },
    #[error("expected {expected} samples, got {found}")]
    Length { expected: usize, found: usize },
    #[error("sample {index} is not finite")]
    NonFinite { index: usize },
    #[error("sample {index} = {value} lies outside [0, 1]")]
    OutOfRange { index: usize, value: f32 },
}

/// One RGB image, planar, row-major, samples in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl Frame {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self, ShapeError> {
        if width == 0 || height == 0 {
            return Err(ShapeError::ZeroSized { width, height });
        }
        let expected = 3 * width * height;
        if data.len() != expected {
            return Err(ShapeError::Length {
                expected,
                found: data.len(),
            });
        }
        for (index, &value) in data.iter().enumerate() {
            if !value.is_finite() {
                return Err(ShapeError::NonFinite { index });
            }
            if !(0.0..=1.0).contains(&value) {
                return Err(ShapeError::OutOfRange { index, value });
            }
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Builds a frame, clamping every sample into `[0, 1]`. Non-finite samples are
    /// still rejected.
    pub fn from_clamped(
        width: usize,
        height: usize,
        mut data: Vec<f32>,
    ) -> Result<Self, ShapeError> {
        for (index, v) in data.iter_mut().enumerate() {
            if !v.is_finite() {
                return Err(ShapeError::NonFinite { index });
            }
            *v = v.clamp(0.0, 1.0);
        }
        Self::new(width, height, data)
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Result<Self, ShapeError> {
        Self::new(width, height, vec![value; 3 * width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn plane(&self, channel: usize) -> &[f32] {
        let n = self.width * self.height;
        &self.data[channel * n..(channel + 1) * n]
    }

    #[inline]
    pub fn get(&self, channel: usize, y: usize, x: usize) -> f32 {
        self.data[(channel * self.height + y) * self.width + x]
    }

    pub fn same_size(&self, other: &Frame) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Rec. 601 luma plane.
    pub fn luma(&self) -> Vec<f32> {
        let (r, g, b) = (self.plane(0), self.plane(1), self.plane(2));
        r.iter()
            .zip(g)
            .zip(b)
            .map(|((&r, &g), &b)| 0.299 * r + 0.587 * g + 0.114 * b)
            .collect()
    }

    /// Copies the frame into a 3-channel tensor.
    pub fn to_tensor(&self) -> Tensor {
        Tensor {
            channels: 3,
            height: self.height,
            width: self.width,
            data: self.data.clone(),
        }
    }

    /// Snaps every sample to the nearest level representable at `depth`, exactly
    /// as a save/load round trip through an integer file would.
    pub fn quantized(&self, depth: BitDepth) -> Frame {
        let data = self
            .data
            .iter()
            .map(|&v| depth.decode(depth.encode(v)))
            .collect();
        Frame {
            width: self.width,
            height: self.height,
            data,
        }
    }
}

/// Planar `(channels, height, width)` buffer of finite floats.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(
        channels: usize,
        height: usize,
        width: usize,
        data: Vec<f32>,
    ) -> Result<Self, ShapeError> {
        let expected = channels * height * width;
        if data.len() != expected {
            return Err(ShapeError::Length {
                expected,
                found: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(ShapeError::NonFinite { index });
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f32) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![value; channels * height * width],
        }
    }

    /// Builds a tensor without the finiteness scan. Callers guarantee the
    /// length matches the shape.
    pub(crate) fn from_raw(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), channels * height * width);
        Self {
            channels,
            height,
            width,
            data,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn plane(&self, channel: usize) -> &[f32] {
        let n = self.width * self.height;
        &self.data[channel * n..(channel + 1) * n]
    }

    pub fn plane_mut(&mut self, channel: usize) -> &mut [f32] {
        let n = self.width * self.height;
        &mut self.data[channel * n..(channel + 1) * n]
    }

    #[inline]
    pub fn get(&self, channel: usize, y: usize, x: usize) -> f32 {
        self.data[(channel * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, channel: usize, y: usize, x: usize, value: f32) {
        self.data[(channel * self.height + y) * self.width + x] = value;
    }

    /// Keeps channels `range.start..range.end`.
    pub fn select_channels(&self, range: std::ops::Range<usize>) -> Tensor {
        let n = self.width * self.height;
        let data = self.data[range.start * n..range.end * n].to_vec();
        Tensor::from_raw(range.len(), self.height, self.width, data)
    }

    /// Stacks tensors of identical spatial size along the channel axis.
    pub fn concat_channels(parts: &[&Tensor]) -> Tensor {
        let (h, w) = (parts[0].height, parts[0].width);
        assert!(
            parts.iter().all(|t| t.height == h && t.width == w),
            "concat_channels: spatial size mismatch"
        );
        let channels = parts.iter().map(|t| t.channels).sum();
        let mut data = Vec::with_capacity(channels * h * w);
        for t in parts {
            data.extend_from_slice(&t.data);
        }
        Tensor::from_raw(channels, h, w, data)
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Tensor {
        Tensor::from_raw(
            self.channels,
            self.height,
            self.width,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f32 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max)
    }
}

/// Maps `[0, 1]` samples to the generator's `[-1, 1]` domain.
pub fn to_model_domain(x: &Tensor) -> Tensor {
    x.map(|v| 2.0 * v - 1.0)
}

/// Maps generator output back to `[0, 1]`, clamping anything outside.
pub fn from_model_domain(x: &Tensor) -> Tensor {
    x.map(|v| ((v + 1.0) * 0.5).clamp(0.0, 1.0))
}
