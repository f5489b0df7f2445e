#![allow(dead_code)]

use lowlight::imagecore::{Frame, Tensor};
use lowlight::nnforward::Conv;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_frame(w: usize, h: usize, rng: &mut impl Rng) -> Frame {
    let data = (0..3 * w * h).map(|_| rng.random::<f32>()).collect();
    Frame::new(w, h, data).unwrap()
}

/// Sum of random low-frequency cosines per channel, shifted so each channel
/// mean is exactly 0.5 and every value stays inside [0.2, 0.8].
pub fn smooth_frame(w: usize, h: usize, rng: &mut impl Rng) -> Frame {
    let n = w * h;
    let mut data = vec![0.0f32; 3 * n];
    for c in 0..3 {
        let plane = &mut data[c * n..(c + 1) * n];
        for _ in 0..4 {
            let amp = rng.random_range(0.01..0.07f64);
            let fx = rng.random_range(0.002..0.02f64);
            let fy = rng.random_range(0.002..0.02f64);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            for y in 0..h {
                for x in 0..w {
                    plane[y * w + x] +=
                        (amp * (fx * x as f64 + fy * y as f64 + phase).cos()) as f32;
                }
            }
        }
        let mean = plane.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
        plane
            .iter_mut()
            .for_each(|v| *v = (*v as f64 - mean + 0.5) as f32);
    }
    Frame::new(w, h, data).unwrap()
}

/// Box-blurred noise, luma texture at every scale a 16 px block sees.
pub fn textured_frame(w: usize, h: usize, seed: u64) -> Frame {
    let mut rng = rng(seed);
    let raw: Vec<f32> = (0..w * h).map(|_| rng.random::<f32>()).collect();
    let mut blurred = vec![0.0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for j in -2isize..=2 {
                for i in -2isize..=2 {
                    let sx = (x as isize + i).clamp(0, w as isize - 1) as usize;
                    let sy = (y as isize + j).clamp(0, h as isize - 1) as usize;
                    acc += raw[sy * w + sx];
                }
            }
            blurred[y * w + x] = acc / 25.0;
        }
    }
    let mut data = Vec::with_capacity(3 * w * h);
    for c in 0..3 {
        data.extend(blurred.iter().map(|v| 0.3 + 0.4 * v + 0.02 * c as f32));
    }
    Frame::new(w, h, data).unwrap()
}

fn mirror(v: f64, n: usize) -> f64 {
    let period = 2.0 * (n as f64 - 1.0);
    let m = v.rem_euclid(period);
    if m <= n as f64 - 1.0 {
        m
    } else {
        period - m
    }
}

/// `out(p + d) = frame(p)` for fractional `d`, bilinear, mirror-extended.
pub fn translated(frame: &Frame, dx: f64, dy: f64) -> Frame {
    let (w, h) = (frame.width(), frame.height());
    let mut data = Vec::with_capacity(3 * w * h);
    for c in 0..3 {
        for y in 0..h {
            for x in 0..w {
                let sx = mirror(x as f64 - dx, w);
                let sy = mirror(y as f64 - dy, h);
                let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
                let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
                let (tx, ty) = (sx - x0 as f64, sy - y0 as f64);
                let g = |yy, xx| frame.get(c, yy, xx) as f64;
                let v = (1.0 - ty) * ((1.0 - tx) * g(y0, x0) + tx * g(y0, x1))
                    + ty * ((1.0 - tx) * g(y1, x0) + tx * g(y1, x1));
                data.push(v as f32);
            }
        }
    }
    Frame::new(w, h, data).unwrap()
}

pub fn random_tensor(c: usize, h: usize, w: usize, rng: &mut impl Rng) -> Tensor {
    let data = (0..c * h * w)
        .map(|_| rng.random_range(-1.0..1.0f32))
        .collect();
    Tensor::new(c, h, w, data).unwrap()
}

pub fn random_conv(out_c: usize, in_c: usize, k: usize, rng: &mut impl Rng) -> Conv {
    let scale = 1.0 / ((in_c * k * k) as f32).sqrt();
    let mut conv = Conv::zeros(out_c, in_c, k);
    conv.weight
        .iter_mut()
        .for_each(|v| *v = rng.random_range(-1.0..1.0f32) * scale);
    conv.bias
        .iter_mut()
        .for_each(|v| *v = rng.random_range(-0.5..0.5f32));
    conv
}

fn reflect(mut i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    while i < 0 || i >= n {
        i = if i < 0 { -i } else { 2 * (n - 1) - i };
    }
    i as usize
}

/// Direct reflection-padded convolution, accumulated in f64.
pub fn naive_conv(x: &Tensor, conv: &Conv, stride: usize, pad: usize) -> Tensor {
    let (c, h, w) = x.shape();
    let k = conv.size;
    let oh = (h + 2 * pad - k) / stride + 1;
    let ow = (w + 2 * pad - k) / stride + 1;
    let mut out = Tensor::zeros(conv.out_channels, oh, ow);
    for o in 0..conv.out_channels {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = conv.bias[o] as f64;
                for i in 0..c {
                    for ky in 0..k {
                        for kx in 0..k {
                            let iy = reflect((oy * stride + ky) as isize - pad as isize, h);
                            let ix = reflect((ox * stride + kx) as isize - pad as isize, w);
                            acc += conv.weight[conv.index(o, i, ky, kx)] as f64
                                * x.get(i, iy, ix) as f64;
                        }
                    }
                }
                out.set(o, oy, ox, acc as f32);
            }
        }
    }
    out
}

/// Rebuilds an `LLGW` file around an edited JSON header, keeping the blob.
pub fn rewrite_header(bytes: &[u8], edit: impl FnOnce(&mut serde_json::Value)) -> Vec<u8> {
    let len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let mut header: serde_json::Value = serde_json::from_slice(&bytes[12..12 + len]).unwrap();
    edit(&mut header);
    let mut json = serde_json::to_vec(&header).unwrap();
    while !(12 + json.len()).is_multiple_of(4) {
        json.push(b' ');
    }
    let mut out = bytes[..8].to_vec();
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&bytes[12 + len..]);
    out
}

/// Byte offset of the blob in an `LLGW` file.
pub fn blob_start(bytes: &[u8]) -> usize {
    12 + u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize
}
