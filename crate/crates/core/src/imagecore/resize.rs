use thiserror::Error;

use super::Tensor;

#[derive(Debug, Error, PartialEq)]
pub enum ResizeError {
    #[error("output dimensions must be non-zero, got {height}x{width}")]
    ZeroOutput { height: usize, width: usize },
    #[error("area resize only downsamples: {src_h}x{src_w} -> {height}x{width}")]
    Upsampling {
        src_h: usize,
        src_w: usize,
        height: usize,
        width: usize,
    },
}

/// Source taps for one destination sample along one axis.
struct Footprint {
    first: usize,
    weights: Vec<f64>,
}

/// Destination sample `i` integrates source interval `[i*s, (i+1)*s)` with
/// `s = src/dst`; partial pixels at either end contribute their covered fraction.
fn footprints(src: usize, dst: usize) -> Vec<Footprint> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let lo = i as f64 * scale;
            let hi = ((i + 1) as f64 * scale).min(src as f64);
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(src).max(first + 1);
            let weights = (first..last)
                .map(|j| {
                    let overlap = (hi.min(j as f64 + 1.0) - lo.max(j as f64)).max(0.0);
                    overlap / scale
                })
                .collect();
            Footprint { first, weights }
        })
        .collect()
}

/// Area-averaging downsample of every channel to `out_h x out_w`.
pub fn resize_area(src: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor, ResizeError> {
    if out_h == 0 || out_w == 0 {
        return Err(ResizeError::ZeroOutput {
            height: out_h,
            width: out_w,
        });
    }
    let (channels, h, w) = src.shape();
    if out_h > h || out_w > w {
        return Err(ResizeError::Upsampling {
            src_h: h,
            src_w: w,
            height: out_h,
            width: out_w,
        });
    }
    if out_h == h && out_w == w {
        return Ok(src.clone());
    }

    let xs = footprints(w, out_w);
    let ys = footprints(h, out_h);
    let mut out = Vec::with_capacity(channels * out_h * out_w);
    let mut rows = vec![0.0f64; h * out_w];
    for c in 0..channels {
        let plane = src.plane(c);
        for y in 0..h {
            let row = &plane[y * w..(y + 1) * w];
            for (ox, fp) in xs.iter().enumerate() {
                rows[y * out_w + ox] = fp
                    .weights
                    .iter()
                    .enumerate()
                    .map(|(k, wt)| wt * row[fp.first + k] as f64)
                    .sum();
            }
        }
        for fp in &ys {
            for ox in 0..out_w {
                let v: f64 = fp
                    .weights
                    .iter()
                    .enumerate()
                    .map(|(k, wt)| wt * rows[(fp.first + k) * out_w + ox])
                    .sum();
                out.push(v as f32);
            }
        }
    }
    Ok(Tensor::from_raw(channels, out_h, out_w, out))
}
