use crate::imagecore::Frame;

use super::motion::MotionField;
use super::MotionError;

/// Backward warp: `out(p) = frame(p + field(p))`, bilinear.
///
/// Returns the warped frame and a validity mask. Pixels whose field entry is
/// invalid or whose sample position leaves the image are marked invalid and
/// set to 0.
pub fn warp(frame: &Frame, field: &MotionField) -> Result<(Frame, Vec<bool>), MotionError> {
    let (w, h) = (frame.width(), frame.height());
    if field.width != w || field.height != h {
        return Err(MotionError::DimensionMismatch {
            expected: (w, h),
            found: (field.width, field.height),
        });
    }
    let n = w * h;
    let mut data = vec![0.0f32; 3 * n];
    let mut mask = vec![false; n];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !field.valid[i] {
                continue;
            }
            let sx = x as f32 + field.dx[i];
            let sy = y as f32 + field.dy[i];
            if !(sx >= 0.0 && sy >= 0.0 && sx <= (w - 1) as f32 && sy <= (h - 1) as f32) {
                continue;
            }
            let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
            let (fx, fy) = (sx - x0 as f32, sy - y0 as f32);
            for c in 0..3 {
                let a = frame.get(c, y0, x0);
                let b = frame.get(c, y0, x1);
                let cc = frame.get(c, y1, x0);
                let d = frame.get(c, y1, x1);
                let top = a + fx * (b - a);
                let bottom = cc + fx * (d - cc);
                data[c * n + i] = top + fy * (bottom - top);
            }
            mask[i] = true;
        }
    }
    Ok((
        Frame::from_clamped(w, h, data).expect("bilinear samples are finite"),
        mask,
    ))
}
