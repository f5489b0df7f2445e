//! Forward-only tensor primitives: reflection-padded convolution, instance
//! normalisation, and the activations used by the generator.

use crate::imagecore::Tensor;

use super::NnError;

/// Output values of one im2col band are capped at roughly this many floats.
const IM2COL_BUDGET: usize = 1 << 22;

/// Convolution kernel of shape `(out, in, k, k)` with a per-output bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv {
    pub out_channels: usize,
    pub in_channels: usize,
    pub size: usize,
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

impl Conv {
    pub fn zeros(out_channels: usize, in_channels: usize, size: usize) -> Self {
        Self {
            out_channels,
            in_channels,
            size,
            weight: vec![0.0; out_channels * in_channels * size * size],
            bias: vec![0.0; out_channels],
        }
    }

    #[inline]
    pub fn index(&self, o: usize, i: usize, ky: usize, kx: usize) -> usize {
        ((o * self.in_channels + i) * self.size + ky) * self.size + kx
    }
}

/// Affine parameters of an instance-norm layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Norm {
    pub gamma: Vec<f32>,
    pub beta: Vec<f32>,
}

impl Norm {
    pub fn identity(channels: usize) -> Self {
        Self {
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
        }
    }
}

/// Mirror index into `[0, dim)` without repeating the edge sample. A
/// single-sample axis maps everything to 0; pads wider than the axis keep
/// bouncing.
#[inline]
pub(crate) fn reflect_index(i: isize, dim: usize) -> usize {
    if dim == 1 {
        return 0;
    }
    let period = 2 * (dim as isize - 1);
    let m = i.rem_euclid(period);
    if m >= dim as isize {
        (period - m) as usize
    } else {
        m as usize
    }
}

pub fn conv_output_size(input: usize, size: usize, stride: usize, pad: usize) -> Option<usize> {
    let padded = input + 2 * pad;
    if padded < size || stride == 0 {
        return None;
    }
    Some((padded - size) / stride + 1)
}

/// Cross-correlation with reflection padding, lowered to im2col bands and a
/// single-precision GEMM.
pub fn conv2d(x: &Tensor, conv: &Conv, stride: usize, pad: usize) -> Result<Tensor, NnError> {
    let (cin, h, w) = x.shape();
    if cin != conv.in_channels {
        return Err(NnError::ChannelMismatch {
            expected: conv.in_channels,
            found: cin,
        });
    }
    let k = conv.size;
    let (Some(oh), Some(ow)) = (
        conv_output_size(h, k, stride, pad),
        conv_output_size(w, k, stride, pad),
    ) else {
        return Err(NnError::TooSmall {
            height: h,
            width: w,
            kernel: k,
        });
    };

    let rows: Vec<usize> = (0..oh)
        .flat_map(|oy| (0..k).map(move |ky| (oy, ky)))
        .map(|(oy, ky)| reflect_index((oy * stride + ky) as isize - pad as isize, h))
        .collect();
    let cols: Vec<usize> = (0..ow)
        .flat_map(|ox| (0..k).map(move |kx| (ox, kx)))
        .map(|(ox, kx)| reflect_index((ox * stride + kx) as isize - pad as isize, w))
        .collect();

    let depth = cin * k * k;
    let npix = oh * ow;
    let band_rows = (IM2COL_BUDGET / (depth * ow).max(1)).clamp(1, oh);
    let mut out = vec![0.0f32; conv.out_channels * npix];
    let mut patches = vec![0.0f32; depth * band_rows * ow];

    for band_start in (0..oh).step_by(band_rows) {
        let band_end = (band_start + band_rows).min(oh);
        let n = (band_end - band_start) * ow;
        for ci in 0..cin {
            let plane = x.plane(ci);
            for ky in 0..k {
                for kx in 0..k {
                    let r = (ci * k + ky) * k + kx;
                    let dst = &mut patches[r * n..(r + 1) * n];
                    for (bi, oy) in (band_start..band_end).enumerate() {
                        let src = &plane[rows[oy * k + ky] * w..][..w];
                        let drow = &mut dst[bi * ow..(bi + 1) * ow];
                        for (ox, d) in drow.iter_mut().enumerate() {
                            *d = src[cols[ox * k + kx]];
                        }
                    }
                }
            }
        }
        // SAFETY: every pointer/stride pair addresses memory inside the
        // corresponding buffer: weight is (out x depth) row-major, patches is
        // (depth x n) with row stride n, and the output band starts at
        // `band_start * ow` inside each (out x npix) row.
        unsafe {
            matrixmultiply::sgemm(
                conv.out_channels,
                depth,
                n,
                1.0,
                conv.weight.as_ptr(),
                depth as isize,
                1,
                patches.as_ptr(),
                n as isize,
                1,
                0.0,
                out.as_mut_ptr().add(band_start * ow),
                npix as isize,
                1,
            );
        }
    }

    for (o, &b) in conv.bias.iter().enumerate() {
        if b != 0.0 {
            out[o * npix..(o + 1) * npix]
                .iter_mut()
                .for_each(|v| *v += b);
        }
    }
    Ok(Tensor::from_raw(conv.out_channels, oh, ow, out))
}

pub const NORM_EPS: f32 = 1e-5;

/// Per-channel normalisation over the spatial plane, population variance.
pub fn instance_norm(x: &Tensor, norm: &Norm, eps: f32) -> Result<Tensor, NnError> {
    let (c, h, w) = x.shape();
    if norm.gamma.len() != c || norm.beta.len() != c {
        return Err(NnError::ChannelMismatch {
            expected: norm.gamma.len(),
            found: c,
        });
    }
    let n = (h * w) as f64;
    let mut out = x.clone();
    for ch in 0..c {
        let plane = out.plane_mut(ch);
        let mean = plane.iter().map(|&v| v as f64).sum::<f64>() / n;
        let var = plane
            .iter()
            .map(|&v| {
                let d = v as f64 - mean;
                d * d
            })
            .sum::<f64>()
            / n;
        let scale = norm.gamma[ch] as f64 / (var + eps as f64).sqrt();
        let shift = norm.beta[ch] as f64;
        for v in plane.iter_mut() {
            *v = ((*v as f64 - mean) * scale + shift) as f32;
        }
    }
    Ok(out)
}

/// `sign(v) * max(|v| - lambda_c, 0)` with one threshold per channel.
pub fn softshrink(x: &Tensor, lambdas: &[f32]) -> Result<Tensor, NnError> {
    if lambdas.len() != x.channels() {
        return Err(NnError::ChannelMismatch {
            expected: lambdas.len(),
            found: x.channels(),
        });
    }
    let mut out = x.clone();
    for (ch, &lambda) in lambdas.iter().enumerate() {
        for v in out.plane_mut(ch) {
            let mag = (v.abs() - lambda).max(0.0);
            *v = mag.copysign(*v);
        }
    }
    Ok(out)
}

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

pub fn tanh(x: &Tensor) -> Tensor {
    x.map(f32::tanh)
}

/// Replicates each sample into a 2x2 block.
pub fn upsample_nearest2x(x: &Tensor) -> Tensor {
    let (c, h, w) = x.shape();
    let (oh, ow) = (2 * h, 2 * w);
    let mut data = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        let plane = x.plane(ch);
        for y in 0..oh {
            let row = &plane[(y / 2) * w..][..w];
            for &v in row {
                data.push(v);
                data.push(v);
            }
        }
    }
    Tensor::from_raw(c, oh, ow, data)
}
