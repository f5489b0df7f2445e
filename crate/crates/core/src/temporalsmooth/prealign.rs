//! Global translation estimate used to remove large displacements before
//! block matching: integer search on the coarsest level of a 2x box
//! pyramid, then Gauss-Newton refinement from coarse to fine.

use crate::imagecore::Frame;

use super::{MotionError, Plane};

const MIN_PYRAMID_SIDE: usize = 16;
const COARSE_SEARCH: isize = 8;
const MAX_ITERATIONS: usize = 25;
const MAX_STEP: f64 = 2.0;
/// t statistic a non-zero shift must reach against staying put.
const SHIFT_SIGNIFICANCE: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalShift {
    pub dx: f32,
    pub dy: f32,
    /// False when the images carry too little gradient to pin a translation.
    pub confident: bool,
}

impl GlobalShift {
    pub const ZERO: GlobalShift = GlobalShift {
        dx: 0.0,
        dy: 0.0,
        confident: false,
    };
}

fn downsample(p: &Plane) -> Plane {
    let (w, h) = (p.width.div_ceil(2), p.height.div_ceil(2));
    let mut out = Plane::zeros(w, h);
    for y in 0..h {
        let (y0, y1) = (2 * y, (2 * y + 1).min(p.height - 1));
        for x in 0..w {
            let (x0, x1) = (2 * x, (2 * x + 1).min(p.width - 1));
            out.data[y * w + x] =
                0.25 * (p.get(x0, y0) + p.get(x1, y0) + p.get(x0, y1) + p.get(x1, y1));
        }
    }
    out
}

fn pyramid(p: Plane, levels: usize) -> Vec<Plane> {
    let mut out = vec![p];
    while out.len() < levels {
        let last = out.last().unwrap();
        if last.width / 2 < MIN_PYRAMID_SIDE || last.height / 2 < MIN_PYRAMID_SIDE {
            break;
        }
        out.push(downsample(last));
    }
    out
}

/// Mean squared difference between `reference(p)` and `target(p + d)` over
/// the overlap, for integer `d`.
fn overlap_mse(reference: &Plane, target: &Plane, dx: isize, dy: isize) -> Option<f64> {
    let (w, h) = (reference.width as isize, reference.height as isize);
    let (x0, x1) = (0.max(-dx), w.min(w - dx));
    let (y0, y1) = (0.max(-dy), h.min(h - dy));
    if x1 - x0 < w / 2 || y1 - y0 < h / 2 {
        return None;
    }
    let mut acc = 0.0f64;
    for y in y0..y1 {
        for x in x0..x1 {
            let d = target.get((x + dx) as usize, (y + dy) as usize)
                - reference.get(x as usize, y as usize);
            acc += (d as f64) * (d as f64);
        }
    }
    Some(acc / ((x1 - x0) * (y1 - y0)) as f64)
}

/// Gauss-Newton on `sum (T(p + d) - R(p))^2`. Returns the refined shift and
/// whether the normal equations were well conditioned.
fn refine(reference: &Plane, target: &Plane, mut d: (f64, f64)) -> ((f64, f64), bool) {
    let (gx, gy) = target.gradients();
    let (w, h) = (reference.width as f64, reference.height as f64);
    let mut conditioned = false;
    for _ in 0..MAX_ITERATIONS {
        let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0f64, 0.0, 0.0, 0.0, 0.0);
        let mut count = 0usize;
        for y in 0..reference.height {
            let sy = y as f64 + d.1;
            if sy < 0.0 || sy > h - 1.0 {
                continue;
            }
            for x in 0..reference.width {
                let sx = x as f64 + d.0;
                if sx < 0.0 || sx > w - 1.0 {
                    continue;
                }
                let r = target.sample(sx, sy) as f64 - reference.get(x, y) as f64;
                let jx = gx.sample(sx, sy) as f64;
                let jy = gy.sample(sx, sy) as f64;
                a11 += jx * jx;
                a12 += jx * jy;
                a22 += jy * jy;
                b1 += jx * r;
                b2 += jy * r;
                count += 1;
            }
        }
        if count == 0 {
            break;
        }
        let det = a11 * a22 - a12 * a12;
        let trace = a11 + a22;
        // Smallest eigenvalue of the 2x2 normal matrix, per sample.
        let min_eig = 0.5 * (trace - ((a11 - a22).powi(2) + 4.0 * a12 * a12).sqrt());
        if min_eig / (count as f64) < 1e-9 || det <= 0.0 {
            conditioned = false;
            break;
        }
        conditioned = true;
        let step_x = -(a22 * b1 - a12 * b2) / det;
        let step_y = -(a11 * b2 - a12 * b1) / det;
        let step_x = step_x.clamp(-MAX_STEP, MAX_STEP);
        let step_y = step_y.clamp(-MAX_STEP, MAX_STEP);
        d = (d.0 + step_x, d.1 + step_y);
        if step_x.abs() < 1e-4 && step_y.abs() < 1e-4 {
            break;
        }
    }
    (d, conditioned)
}

/// Paired t-test: do squared residuals at integer shift `d` beat those at
/// zero shift by more than noise would explain?
fn significant_improvement(reference: &Plane, target: &Plane, d: (isize, isize)) -> bool {
    let (w, h) = (reference.width as isize, reference.height as isize);
    let (mut n, mut sum, mut sum_sq) = (0usize, 0.0f64, 0.0f64);
    for y in 0.max(-d.1)..h.min(h - d.1) {
        for x in 0.max(-d.0)..w.min(w - d.0) {
            let r = reference.get(x as usize, y as usize) as f64;
            let at_zero = target.get(x as usize, y as usize) as f64 - r;
            let at_d = target.get((x + d.0) as usize, (y + d.1) as usize) as f64 - r;
            let diff = at_zero * at_zero - at_d * at_d;
            n += 1;
            sum += diff;
            sum_sq += diff * diff;
        }
    }
    if n < 3 {
        return false;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = (sum_sq / nf - mean * mean).max(0.0) * nf / (nf - 1.0);
    mean > 0.0 && mean * mean * nf > SHIFT_SIGNIFICANCE * SHIFT_SIGNIFICANCE * var
}

/// Estimates `d` such that `tgt(p + d) ~ ref(p)` on luma. A shift that does
/// not beat zero significantly is reported as [`GlobalShift::ZERO`].
pub fn prealign(
    reference: &Frame,
    target: &Frame,
    levels: usize,
) -> Result<GlobalShift, MotionError> {
    if !reference.same_size(target) {
        return Err(MotionError::DimensionMismatch {
            expected: (reference.width(), reference.height()),
            found: (target.width(), target.height()),
        });
    }
    let (w, h) = (reference.width(), reference.height());
    let refs = pyramid(Plane::from_luma(reference), levels.max(1));
    let tgts = pyramid(Plane::from_luma(target), refs.len());

    let coarsest = refs.len() - 1;
    let (cr, ct) = (&refs[coarsest], &tgts[coarsest]);
    let mut best = (0isize, 0isize);
    let mut best_cost = overlap_mse(cr, ct, 0, 0).unwrap_or(f64::INFINITY);
    for dy in -COARSE_SEARCH..=COARSE_SEARCH {
        for dx in -COARSE_SEARCH..=COARSE_SEARCH {
            if let Some(cost) = overlap_mse(cr, ct, dx, dy) {
                if cost < best_cost {
                    best_cost = cost;
                    best = (dx, dy);
                }
            }
        }
    }

    let mut d = (best.0 as f64, best.1 as f64);
    let mut confident = false;
    for level in (0..=coarsest).rev() {
        if level != coarsest {
            d = (2.0 * d.0, 2.0 * d.1);
        }
        let (refined, ok) = refine(&refs[level], &tgts[level], d);
        if ok {
            d = refined;
        }
        confident = ok;
    }
    if !confident {
        return Ok(GlobalShift::ZERO);
    }
    let rounded = (d.0.round() as isize, d.1.round() as isize);
    if rounded != (0, 0) && !significant_improvement(&refs[0], &tgts[0], rounded) {
        return Ok(GlobalShift::ZERO);
    }
    Ok(GlobalShift {
        dx: d.0.clamp(-(w as f64), w as f64) as f32,
        dy: d.1.clamp(-(h as f64), h as f64) as f32,
        confident,
    })
}
