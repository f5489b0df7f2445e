use crate::imagecore::{resize_area, Frame, Tensor};

use super::{PatchConfig, PatchError};

/// A local crop stacked with its downsampled context window.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchPair {
    pub origin: (usize, usize),
    /// `(6, N_l, N_l)`: channels 0-2 local RGB, 3-5 region RGB.
    pub tensor: Tensor,
}

impl PatchPair {
    pub fn local(&self) -> Tensor {
        self.tensor.select_channels(0..3)
    }

    pub fn region(&self) -> Tensor {
        self.tensor.select_channels(3..6)
    }
}

/// Start of the region window along one axis, in frame coordinates.
///
/// The window is centred on the local patch and then slid inward so it lies
/// inside the frame. When the frame is narrower than the window the frame is
/// reflect-padded symmetrically, so the start is negative.
pub fn region_window(local_origin: usize, local: usize, region: usize, dim: usize) -> isize {
    if dim >= region {
        let center = (local_origin + local / 2) as isize;
        (center - (region / 2) as isize).clamp(0, (dim - region) as isize)
    } else {
        -(((region - dim) / 2) as isize)
    }
}

/// Mirror an out-of-range coordinate back into `[0, dim)` without repeating
/// the edge sample.
#[inline]
fn reflect(i: isize, dim: usize) -> usize {
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

pub fn extract_pair(
    frame: &Frame,
    origin: (usize, usize),
    cfg: &PatchConfig,
) -> Result<PatchPair, PatchError> {
    let (w, h) = (frame.width(), frame.height());
    let (x0, y0) = origin;
    let local = cfg.local();
    let region = cfg.region();
    if x0 + local > w || y0 + local > h {
        return Err(PatchError::OriginOutOfBounds {
            x: x0,
            y: y0,
            local,
            width: w,
            height: h,
        });
    }

    let mut data = Vec::with_capacity(6 * local * local);
    for c in 0..3 {
        let plane = frame.plane(c);
        for y in y0..y0 + local {
            data.extend_from_slice(&plane[y * w + x0..y * w + x0 + local]);
        }
    }

    let rx = region_window(x0, local, region, w);
    let ry = region_window(y0, local, region, h);
    let cols: Vec<usize> = (0..region as isize).map(|i| reflect(rx + i, w)).collect();
    let mut crop = Vec::with_capacity(3 * region * region);
    for c in 0..3 {
        let plane = frame.plane(c);
        for i in 0..region as isize {
            let row = &plane[reflect(ry + i, h) * w..][..w];
            crop.extend(cols.iter().map(|&x| row[x]));
        }
    }
    let region_small = resize_area(&Tensor::from_raw(3, region, region, crop), local, local)
        .expect("region is larger than local by construction");
    data.extend_from_slice(region_small.data());

    Ok(PatchPair {
        origin,
        tensor: Tensor::from_raw(6, local, local, data),
    })
}
