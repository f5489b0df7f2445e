use super::{MotionError, Plane};

/// One level of the orthonormal 2-D Haar transform.
///
/// For each 2x2 block `[[a, b], [c, d]]`:
/// `LL = (a+b+c+d)/2`, `LH = (a-b+c-d)/2` (horizontal detail),
/// `HL = (a+b-c-d)/2` (vertical detail), `HH = (a-b-c+d)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Subbands {
    pub ll: Plane,
    pub lh: Plane,
    pub hl: Plane,
    pub hh: Plane,
    /// Size of the analysed plane before any odd-edge padding.
    pub source_width: usize,
    pub source_height: usize,
}

/// Odd dimensions are padded by repeating the last row/column.
pub fn dwt2(plane: &Plane) -> Result<Subbands, MotionError> {
    let (w, h) = (plane.width, plane.height);
    if w == 0 || h == 0 {
        return Err(MotionError::EmptyPlane);
    }
    let (hw, hh_) = (w.div_ceil(2), h.div_ceil(2));
    let mut ll = Vec::with_capacity(hw * hh_);
    let mut lh = Vec::with_capacity(hw * hh_);
    let mut hl = Vec::with_capacity(hw * hh_);
    let mut hh = Vec::with_capacity(hw * hh_);
    for y in 0..hh_ {
        let (y0, y1) = (2 * y, (2 * y + 1).min(h - 1));
        for x in 0..hw {
            let (x0, x1) = (2 * x, (2 * x + 1).min(w - 1));
            let a = plane.get(x0, y0);
            let b = plane.get(x1, y0);
            let c = plane.get(x0, y1);
            let d = plane.get(x1, y1);
            ll.push((a + b + c + d) * 0.5);
            lh.push((a - b + c - d) * 0.5);
            hl.push((a + b - c - d) * 0.5);
            hh.push((a - b - c + d) * 0.5);
        }
    }
    let mk = |data| Plane {
        width: hw,
        height: hh_,
        data,
    };
    Ok(Subbands {
        ll: mk(ll),
        lh: mk(lh),
        hl: mk(hl),
        hh: mk(hh),
        source_width: w,
        source_height: h,
    })
}

/// Inverse of [`dwt2`], cropped back to the source size.
pub fn idwt2(bands: &Subbands) -> Plane {
    let (w, h) = (bands.source_width, bands.source_height);
    let bw = bands.ll.width;
    let mut out = Plane::zeros(w, h);
    for y in 0..bands.ll.height {
        for x in 0..bw {
            let i = y * bw + x;
            let (s, dx, dy, dd) = (
                bands.ll.data[i],
                bands.lh.data[i],
                bands.hl.data[i],
                bands.hh.data[i],
            );
            let block = [
                (0, 0, (s + dx + dy + dd) * 0.5),
                (1, 0, (s - dx + dy - dd) * 0.5),
                (0, 1, (s + dx - dy - dd) * 0.5),
                (1, 1, (s - dx - dy + dd) * 0.5),
            ];
            for (ox, oy, v) in block {
                let (px, py) = (2 * x + ox, 2 * y + oy);
                if px < w && py < h {
                    out.data[py * w + px] = v;
                }
            }
        }
    }
    out
}

/// Repeated analysis of the LL band. `levels[0]` is the finest decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletPyramid {
    pub levels: Vec<Subbands>,
}

impl WaveletPyramid {
    pub fn build(plane: &Plane, depth: usize) -> Result<Self, MotionError> {
        let mut levels: Vec<Subbands> = Vec::with_capacity(depth);
        for _ in 0..depth {
            let next = dwt2(levels.last().map(|b| &b.ll).unwrap_or(plane))?;
            levels.push(next);
        }
        Ok(Self { levels })
    }

    /// LL plane at `level` (0 = the input itself) rescaled to the input's
    /// intensity range: each orthonormal level multiplies means by 2.
    pub fn approximation(&self, plane: &Plane, level: usize) -> Plane {
        if level == 0 {
            return plane.clone();
        }
        let ll = &self.levels[level - 1].ll;
        let scale = 1.0 / (1u32 << level) as f32;
        Plane {
            width: ll.width,
            height: ll.height,
            data: ll.data.iter().map(|v| v * scale).collect(),
        }
    }
}
