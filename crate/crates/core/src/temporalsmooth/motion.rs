//! Dense motion from coarse-to-fine block matching on Haar LL planes.
//!
//! Matching starts on the coarsest approximation band, where a +-4 search
//! covers large displacements, and each finer level inherits the doubled,
//! interpolated vectors before refining them with its own +-4 search. On the
//! finest level the integer vectors get a parabolic sub-pixel update. The
//! final block vectors are bilinearly interpolated between block centres.

use rayon::prelude::*;

use crate::imagecore::Frame;

use super::haar::WaveletPyramid;
use super::{MotionError, Plane};

pub const BLOCK_SIZE: usize = 16;
pub const SEARCH_RADIUS: isize = 4;
/// Cost per pixel of deviation from the predicted vector, in mean-absolute
/// luma units. Keeps flat or noisy blocks on their predictor.
const VECTOR_PENALTY: f32 = 2e-3;
/// A candidate must keep at least this fraction of its block inside the image.
const MIN_OVERLAP: f32 = 0.5;
/// t statistic by which a search candidate must beat the predicted vector.
const MATCH_SIGNIFICANCE: f64 = 3.0;
/// t statistic the cost asymmetry must exceed before a sub-pixel offset is
/// applied.
const SUBPIXEL_SIGNIFICANCE: f64 = 3.0;

/// Per-pixel displacement `(dx, dy)` such that `target(p + d) ~ reference(p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionField {
    pub width: usize,
    pub height: usize,
    pub dx: Vec<f32>,
    pub dy: Vec<f32>,
    pub valid: Vec<bool>,
}

impl MotionField {
    pub fn zero(width: usize, height: usize) -> Self {
        Self::uniform(width, height, 0.0, 0.0)
    }

    pub fn uniform(width: usize, height: usize, dx: f32, dy: f32) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            dx: vec![dx; n],
            dy: vec![dy; n],
            valid: vec![true; n],
        }
    }

    #[inline]
    pub fn magnitude(&self, i: usize) -> f32 {
        self.dx[i].hypot(self.dy[i])
    }
}

/// Default decomposition depth: `min(4, floor(log2(min(W, H) / 32)))`.
pub fn default_levels(width: usize, height: usize) -> usize {
    let side = width.min(height) / 32;
    if side == 0 {
        0
    } else {
        (side.ilog2() as usize).min(4)
    }
}

#[derive(Debug, Clone, Copy)]
struct BlockVector {
    dx: f32,
    dy: f32,
    valid: bool,
}

struct BlockGrid {
    cols: usize,
    rows: usize,
    vectors: Vec<BlockVector>,
}

impl BlockGrid {
    /// Bilinear interpolation of block vectors at plane coordinate `(x, y)`.
    fn interpolate(&self, x: f32, y: f32) -> (f32, f32) {
        let u = (x / BLOCK_SIZE as f32 - 0.5).clamp(0.0, (self.cols - 1) as f32);
        let v = (y / BLOCK_SIZE as f32 - 0.5).clamp(0.0, (self.rows - 1) as f32);
        let (c0, r0) = (u.floor() as usize, v.floor() as usize);
        let (c1, r1) = ((c0 + 1).min(self.cols - 1), (r0 + 1).min(self.rows - 1));
        let (fu, fv) = (u - c0 as f32, v - r0 as f32);
        let at = |c: usize, r: usize| {
            let b = self.vectors[r * self.cols + c];
            (b.dx, b.dy)
        };
        let lerp2 =
            |a: (f32, f32), b: (f32, f32), t: f32| (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1));
        let top = lerp2(at(c0, r0), at(c1, r0), fu);
        let bottom = lerp2(at(c0, r1), at(c1, r1), fu);
        lerp2(top, bottom, fv)
    }

    fn nearest_valid(&self, x: f32, y: f32) -> bool {
        let c = ((x / BLOCK_SIZE as f32) as usize).min(self.cols - 1);
        let r = ((y / BLOCK_SIZE as f32) as usize).min(self.rows - 1);
        self.vectors[r * self.cols + c].valid
    }
}

/// Mean absolute difference over the in-bounds part of the displaced block,
/// or `None` when too little of it remains inside the target.
fn block_cost(
    reference: &Plane,
    target: &Plane,
    (bx, by, bw, bh): (usize, usize, usize, usize),
    dx: i32,
    dy: i32,
) -> Option<f32> {
    let (w, h) = (target.width as i64, target.height as i64);
    let mut acc = 0.0f32;
    let mut count = 0usize;
    for y in by..by + bh {
        let ty = y as i64 + dy as i64;
        if ty < 0 || ty >= h {
            continue;
        }
        let rrow = &reference.data[y * reference.width..];
        let trow = &target.data[ty as usize * target.width..];
        let x_lo = (bx as i64).max(-(dx as i64));
        let x_hi = ((bx + bw) as i64).min(w - dx as i64);
        for x in x_lo..x_hi {
            acc += (trow[(x + dx as i64) as usize] - rrow[x as usize]).abs();
            count += 1;
        }
    }
    if (count as f32) < MIN_OVERLAP * (bw * bh) as f32 {
        return None;
    }
    Some(acc / count as f32)
}

/// Per-pixel squared residuals of the block at integer displacement `d`,
/// `None` where the displaced pixel leaves the target.
fn residuals(
    reference: &Plane,
    target: &Plane,
    (bx, by, bw, bh): (usize, usize, usize, usize),
    dx: i32,
    dy: i32,
) -> Vec<Option<f64>> {
    let (w, h) = (target.width as i64, target.height as i64);
    let mut out = Vec::with_capacity(bw * bh);
    for y in by..by + bh {
        for x in bx..bx + bw {
            let (tx, ty) = (x as i64 + dx as i64, y as i64 + dy as i64);
            out.push((tx >= 0 && ty >= 0 && tx < w && ty < h).then(|| {
                let r = target.get(tx as usize, ty as usize) as f64 - reference.get(x, y) as f64;
                r * r
            }));
        }
    }
    out
}

/// Parabola vertex through costs at -1, 0, +1, or 0 when the asymmetry
/// between the outer costs is not significant under a paired t-test.
fn axis_offset(lo: &[Option<f64>], mid: &[Option<f64>], hi: &[Option<f64>]) -> f32 {
    let (mut n, mut s_lo, mut s_mid, mut s_hi, mut s_dd) = (0usize, 0.0f64, 0.0, 0.0, 0.0);
    for ((a, b), c) in lo.iter().zip(mid).zip(hi) {
        if let (Some(a), Some(b), Some(c)) = (a, b, c) {
            n += 1;
            s_lo += a;
            s_mid += b;
            s_hi += c;
            s_dd += (a - c) * (a - c);
        }
    }
    if (n as f64) < MIN_OVERLAP as f64 * lo.len() as f64 || n < 3 {
        return 0.0;
    }
    let nf = n as f64;
    let (lo, mid, hi) = (s_lo / nf, s_mid / nf, s_hi / nf);
    let diff = lo - hi;
    let var = (s_dd / nf - diff * diff).max(0.0) / (nf - 1.0);
    let curvature = lo - 2.0 * mid + hi;
    if curvature <= 0.0 || diff.abs() <= SUBPIXEL_SIGNIFICANCE * var.sqrt() {
        return 0.0;
    }
    (0.5 * diff / curvature).clamp(-0.5, 0.5) as f32
}

/// Sub-pixel vector from a parabola through the integer costs on each axis.
/// Costs at integer offsets share the same noise statistics, so the fit is
/// not pulled toward half-pixel positions the way interpolated costs are.
/// An exact match, or an asymmetry within the noise, keeps the integer vector.
fn refine_subpixel(
    reference: &Plane,
    target: &Plane,
    block: (usize, usize, usize, usize),
    (dx, dy): (i32, i32),
) -> (f32, f32) {
    let r = |i: i32, j: i32| residuals(reference, target, block, dx + i, dy + j);
    let mid = r(0, 0);
    if mid.iter().all(|v| v.is_none_or(|v| v == 0.0)) {
        return (dx as f32, dy as f32);
    }
    (
        dx as f32 + axis_offset(&r(-1, 0), &mid, &r(1, 0)),
        dy as f32 + axis_offset(&r(0, -1), &mid, &r(0, 1)),
    )
}

/// Paired t-test on per-pixel absolute residuals: does `cand` match the
/// block better than `base` by more than noise would explain?
fn significantly_better(
    reference: &Plane,
    target: &Plane,
    block: (usize, usize, usize, usize),
    base: (i32, i32),
    cand: (i32, i32),
) -> bool {
    let a = residuals(reference, target, block, base.0, base.1);
    let b = residuals(reference, target, block, cand.0, cand.1);
    let diffs: Vec<f64> = a
        .iter()
        .zip(&b)
        .filter_map(|(a, b)| Some(a.as_ref()?.sqrt() - b.as_ref()?.sqrt()))
        .collect();
    if diffs.len() < 3 {
        return true;
    }
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    mean > 0.0 && mean * mean * n > MATCH_SIGNIFICANCE * MATCH_SIGNIFICANCE * var
}

fn match_level(
    reference: &Plane,
    target: &Plane,
    subpixel: bool,
    predictors: impl Fn(usize, usize) -> (i32, i32) + Sync,
) -> BlockGrid {
    let cols = reference.width.div_ceil(BLOCK_SIZE);
    let rows = reference.height.div_ceil(BLOCK_SIZE);
    // Candidates ordered by distance from the predictor so ties keep the nearest.
    let mut offsets: Vec<(i32, i32)> = (-SEARCH_RADIUS..=SEARCH_RADIUS)
        .flat_map(|j| (-SEARCH_RADIUS..=SEARCH_RADIUS).map(move |i| (i as i32, j as i32)))
        .collect();
    offsets.sort_by_key(|&(i, j)| (i.abs() + j.abs(), i.abs().max(j.abs())));

    let vectors = (0..rows * cols)
        .into_par_iter()
        .map(|b| {
            let (c, r) = (b % cols, b / cols);
            let (bx, by) = (c * BLOCK_SIZE, r * BLOCK_SIZE);
            let bw = BLOCK_SIZE.min(reference.width - bx);
            let bh = BLOCK_SIZE.min(reference.height - by);
            let (px, py) = predictors(c, r);
            // A block whose predicted match mostly leaves the image cannot be trusted.
            if block_cost(reference, target, (bx, by, bw, bh), px, py).is_none() {
                return BlockVector {
                    dx: px as f32,
                    dy: py as f32,
                    valid: false,
                };
            }
            let mut best: Option<(f32, i32, i32)> = None;
            for &(i, j) in &offsets {
                let (dx, dy) = (px + i, py + j);
                let Some(cost) = block_cost(reference, target, (bx, by, bw, bh), dx, dy) else {
                    continue;
                };
                let cost = cost + VECTOR_PENALTY * (i.abs() + j.abs()) as f32;
                if best.is_none_or(|(bc, _, _)| cost < bc) {
                    best = Some((cost, dx, dy));
                }
            }
            // Leave the predictor only for a match that is clearly better.
            let best = best.map(|(cost, dx, dy)| {
                let block = (bx, by, bw, bh);
                if (dx, dy) == (px, py)
                    || significantly_better(reference, target, block, (px, py), (dx, dy))
                {
                    (cost, dx, dy)
                } else {
                    (cost, px, py)
                }
            });
            match best {
                Some((_, dx, dy)) => {
                    let (dx, dy) = if subpixel {
                        refine_subpixel(reference, target, (bx, by, bw, bh), (dx, dy))
                    } else {
                        (dx as f32, dy as f32)
                    };
                    BlockVector {
                        dx,
                        dy,
                        valid: true,
                    }
                }
                None => BlockVector {
                    dx: px as f32,
                    dy: py as f32,
                    valid: false,
                },
            }
        })
        .collect();
    BlockGrid {
        cols,
        rows,
        vectors,
    }
}

pub fn estimate_motion(
    reference: &Frame,
    target: &Frame,
    levels: usize,
) -> Result<MotionField, MotionError> {
    estimate_motion_seeded(reference, target, levels, (0.0, 0.0))
}

/// Block matching seeded with a global displacement (typically from
/// [`prealign`](super::prealign)); the seed is rounded to whole pixels.
pub fn estimate_motion_seeded(
    reference: &Frame,
    target: &Frame,
    levels: usize,
    seed: (f32, f32),
) -> Result<MotionField, MotionError> {
    if !reference.same_size(target) {
        return Err(MotionError::DimensionMismatch {
            expected: (reference.width(), reference.height()),
            found: (target.width(), target.height()),
        });
    }
    let (w, h) = (reference.width(), reference.height());
    let ref_luma = Plane::from_luma(reference);
    let tgt_luma = Plane::from_luma(target);

    // Never go so deep that the coarsest band is narrower than one block.
    let mut depth = levels;
    while depth > 0 && (w >> depth < BLOCK_SIZE || h >> depth < BLOCK_SIZE) {
        depth -= 1;
    }
    let ref_pyr = WaveletPyramid::build(&ref_luma, depth)?;
    let tgt_pyr = WaveletPyramid::build(&tgt_luma, depth)?;

    let scale = (1u32 << depth) as f32;
    let seed_px = (
        (seed.0 / scale).round() as i32,
        (seed.1 / scale).round() as i32,
    );
    let mut grid: Option<BlockGrid> = None;
    for level in (0..=depth).rev() {
        let r = ref_pyr.approximation(&ref_luma, level);
        let t = tgt_pyr.approximation(&tgt_luma, level);
        let coarse = grid.take();
        grid = Some(match coarse {
            None => match_level(&r, &t, level == 0, |_, _| seed_px),
            Some(coarse) => match_level(&r, &t, level == 0, |c, row| {
                // Block centre on this level, mapped to the coarser plane.
                let cx = (c * BLOCK_SIZE) as f32 + BLOCK_SIZE as f32 / 2.0;
                let cy = (row * BLOCK_SIZE) as f32 + BLOCK_SIZE as f32 / 2.0;
                let (dx, dy) = coarse.interpolate(cx / 2.0, cy / 2.0);
                ((2.0 * dx).round() as i32, (2.0 * dy).round() as i32)
            }),
        });
    }
    let grid = grid.expect("at least one level");

    let mut field = MotionField::zero(w, h);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let (dx, dy) = grid.interpolate(x as f32 + 0.5, y as f32 + 0.5);
            let (sx, sy) = (x as f32 + dx, y as f32 + dy);
            field.dx[i] = dx;
            field.dy[i] = dy;
            field.valid[i] = grid.nearest_valid(x as f32, y as f32)
                && sx >= 0.0
                && sy >= 0.0
                && sx <= (w - 1) as f32
                && sy <= (h - 1) as f32;
        }
    }
    Ok(field)
}
