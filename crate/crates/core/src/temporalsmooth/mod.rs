//! Motion-compensated temporal smoothing.
//!
//! Each neighbour in the window is globally pre-aligned to the centre frame,
//! refined by coarse-to-fine block matching on Haar approximation bands, and
//! bilinearly warped onto the centre. Pixels then average over a half-window
//! that shrinks as their motion grows.

mod haar;
mod motion;
mod prealign;
mod smooth;
mod warp;

use thiserror::Error;

use crate::imagecore::Frame;

pub use haar::{dwt2, idwt2, Subbands, WaveletPyramid};
pub use motion::{
    default_levels, estimate_motion, estimate_motion_seeded, MotionField, BLOCK_SIZE, SEARCH_RADIUS,
};
pub use prealign::{prealign, GlobalShift};
pub use smooth::{blend, compensate, smooth_sequence, smooth_window, Compensated};
pub use warp::warp;

#[derive(Debug, Error, PartialEq)]
pub enum MotionError {
    #[error("empty plane")]
    EmptyPlane,
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("window centre {center} outside a window of {len} frames")]
    CenterOutOfRange { center: usize, len: usize },
    #[error("invalid smoothing config: {0}")]
    Config(&'static str),
}

/// Single-channel sample plane, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl Plane {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_luma(frame: &Frame) -> Self {
        Self {
            width: frame.width(),
            height: frame.height(),
            data: frame.luma(),
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    /// Bilinear sample with edge clamping.
    pub fn sample(&self, fx: f64, fy: f64) -> f32 {
        let fx = fx.clamp(0.0, (self.width - 1) as f64);
        let fy = fy.clamp(0.0, (self.height - 1) as f64);
        let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(self.width - 1), (y0 + 1).min(self.height - 1));
        let (tx, ty) = ((fx - x0 as f64) as f32, (fy - y0 as f64) as f32);
        let top = self.get(x0, y0) + tx * (self.get(x1, y0) - self.get(x0, y0));
        let bottom = self.get(x0, y1) + tx * (self.get(x1, y1) - self.get(x0, y1));
        top + ty * (bottom - top)
    }

    /// Central-difference gradients `(d/dx, d/dy)`, one-sided at the borders.
    pub fn gradients(&self) -> (Plane, Plane) {
        let (w, h) = (self.width, self.height);
        let mut gx = Plane::zeros(w, h);
        let mut gy = Plane::zeros(w, h);
        for y in 0..h {
            for x in 0..w {
                let (xl, xr) = (x.saturating_sub(1), (x + 1).min(w - 1));
                let (yu, yd) = (y.saturating_sub(1), (y + 1).min(h - 1));
                if xr > xl {
                    gx.data[y * w + x] = (self.get(xr, y) - self.get(xl, y)) / (xr - xl) as f32;
                }
                if yd > yu {
                    gy.data[y * w + x] = (self.get(x, yd) - self.get(x, yu)) / (yd - yu) as f32;
                }
            }
        }
        (gx, gy)
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|&v| (v as f64) * (v as f64)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SmoothingConfig {
    /// Largest half-window, in frames.
    pub n_max: usize,
    /// Motion magnitude in pixels at and beyond which no neighbours are used.
    pub motion_cutoff: f32,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self {
            n_max: 6,
            motion_cutoff: 256.0,
        }
    }
}

impl SmoothingConfig {
    pub fn validate(&self) -> Result<(), MotionError> {
        if !(self.motion_cutoff.is_finite() && self.motion_cutoff > 0.0) {
            return Err(MotionError::Config("motion cutoff must be positive"));
        }
        Ok(())
    }
}

/// `floor(n_max * max(0, 1 - m / cutoff))`.
pub fn adaptive_halfwindow(motion: f32, cfg: &SmoothingConfig) -> usize {
    let m = motion as f64;
    if m.is_nan() {
        return 0;
    }
    let frac = (1.0 - m.max(0.0) / cfg.motion_cutoff as f64).max(0.0);
    (cfg.n_max as f64 * frac).floor() as usize
}
