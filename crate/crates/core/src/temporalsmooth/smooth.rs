use rayon::prelude::*;

use crate::imagecore::Frame;

use super::motion::{default_levels, estimate_motion_seeded};
use super::prealign::prealign;
use super::warp::warp;
use super::{adaptive_halfwindow, MotionError, SmoothingConfig};

/// A neighbour registered onto the centre frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Compensated {
    /// Signed temporal offset from the centre.
    pub offset: isize,
    pub frame: Frame,
    pub valid: Vec<bool>,
    /// Per-pixel magnitude of the total displacement, in pixels.
    pub magnitude: Vec<f32>,
}

/// Pre-aligns, estimates motion and warps `neighbor` onto `center`.
pub fn compensate(
    center: &Frame,
    neighbor: &Frame,
    offset: isize,
    levels: usize,
) -> Result<Compensated, MotionError> {
    let shift = prealign(center, neighbor, levels + 1)?;
    let field = estimate_motion_seeded(center, neighbor, levels, (shift.dx, shift.dy))?;
    let (frame, valid) = warp(neighbor, &field)?;
    let magnitude = (0..field.dx.len()).map(|i| field.magnitude(i)).collect();
    Ok(Compensated {
        offset,
        frame,
        valid,
        magnitude,
    })
}

/// Per-pixel adaptive average of the centre and its compensated neighbours.
///
/// Neighbours join in order of increasing `|offset|`. Offset `d` is admitted
/// while `d <= k(m)`, where `m` is the largest motion magnitude among the
/// neighbours admitted so far together with those at `d`. Pixels that admit
/// nothing keep the centre value exactly.
pub fn blend(
    center: &Frame,
    neighbors: &[Compensated],
    cfg: &SmoothingConfig,
) -> Result<Frame, MotionError> {
    cfg.validate()?;
    let (w, h) = (center.width(), center.height());
    let n = w * h;
    for nb in neighbors {
        if !nb.frame.same_size(center) || nb.valid.len() != n || nb.magnitude.len() != n {
            return Err(MotionError::DimensionMismatch {
                expected: (w, h),
                found: (nb.frame.width(), nb.frame.height()),
            });
        }
    }
    let mut order: Vec<&Compensated> = neighbors.iter().filter(|nb| nb.offset != 0).collect();
    order.sort_by_key(|nb| (nb.offset.unsigned_abs(), nb.offset));

    let src = center.data();
    let mut out = src.to_vec();
    let (r, rest) = out.split_at_mut(n);
    let (g, b) = rest.split_at_mut(n);
    r.par_chunks_mut(w)
        .zip(g.par_chunks_mut(w))
        .zip(b.par_chunks_mut(w))
        .enumerate()
        .for_each(|(y, ((r, g), b))| {
            let mut used: Vec<&Compensated> = Vec::with_capacity(order.len());
            for x in 0..w {
                let i = y * w + x;
                used.clear();
                let mut m = 0.0f32;
                let mut pos = 0;
                while pos < order.len() {
                    let d = order[pos].offset.unsigned_abs();
                    let end = pos
                        + order[pos..]
                            .iter()
                            .take_while(|nb| nb.offset.unsigned_abs() == d)
                            .count();
                    let group = order[pos..end].iter().filter(|nb| nb.valid[i]);
                    let candidate = group.clone().fold(m, |acc, nb| acc.max(nb.magnitude[i]));
                    if group.clone().next().is_some() {
                        if d > adaptive_halfwindow(candidate, cfg) {
                            break;
                        }
                        m = candidate;
                        used.extend(group);
                    }
                    pos = end;
                }
                if used.is_empty() {
                    continue;
                }
                let count = (used.len() + 1) as f64;
                for (c, dst) in [&mut r[x], &mut g[x], &mut b[x]].into_iter().enumerate() {
                    let sum: f64 = src[c * n + i] as f64
                        + used
                            .iter()
                            .map(|nb| nb.frame.data()[c * n + i] as f64)
                            .sum::<f64>();
                    *dst = (sum / count) as f32;
                }
            }
        });
    Ok(Frame::from_clamped(w, h, out).expect("averages of valid samples are finite"))
}

/// Smooths `window[center]` using the other frames of the window, which are
/// assumed consecutive in time. Frames farther than `n_max` from the centre
/// are ignored.
pub fn smooth_window(
    window: &[Frame],
    center: usize,
    cfg: &SmoothingConfig,
) -> Result<Frame, MotionError> {
    cfg.validate()?;
    let Some(c) = window.get(center) else {
        return Err(MotionError::CenterOutOfRange {
            center,
            len: window.len(),
        });
    };
    for f in window {
        if !f.same_size(c) {
            return Err(MotionError::DimensionMismatch {
                expected: (c.width(), c.height()),
                found: (f.width(), f.height()),
            });
        }
    }
    let levels = default_levels(c.width(), c.height());
    let lo = center.saturating_sub(cfg.n_max);
    let hi = (center + cfg.n_max).min(window.len() - 1);
    let neighbors = (lo..=hi)
        .filter(|&j| j != center)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|j| compensate(c, &window[j], j as isize - center as isize, levels))
        .collect::<Result<Vec<_>, _>>()?;
    blend(c, &neighbors, cfg)
}

/// Smooths every frame of a sequence with a truncated window at the ends.
pub fn smooth_sequence(frames: &[Frame], cfg: &SmoothingConfig) -> Result<Vec<Frame>, MotionError> {
    (0..frames.len())
        .map(|t| {
            let lo = t.saturating_sub(cfg.n_max);
            let hi = (t + cfg.n_max + 1).min(frames.len());
            smooth_window(&frames[lo..hi], t - lo, cfg)
        })
        .collect()
}
