//! Overlapping tile layouts, local/region patch pairs and Gaussian-weighted
//! reassembly.
//!
//! Tiles are `N_l x N_l` and step by `N_l / 2`; the last tile on each axis is
//! pinned to `dim - N_l` so the layout always covers the frame. Every tile
//! carries a concentric `N_r x N_r` context window that is area-downsampled
//! to `N_l` and stacked behind the local crop, giving a 6-channel input.

mod extract;
mod merge;

pub use extract::{extract_pair, region_window, PatchPair};
pub use merge::{gaussian_weights, merge, TileAccumulator, WeightMap};

use thiserror::Error;

use crate::imagecore::ShapeError;

#[derive(Debug, Error, PartialEq)]
pub enum PatchError {
    #[error("local patch size {0} must be even and at least 2")]
    OddLocal(usize),
    #[error("region size {region} must exceed local size {local}")]
    RegionTooSmall { local: usize, region: usize },
    #[error("frame {width}x{height} is smaller than the {local}px local patch")]
    FrameTooSmall {
        width: usize,
        height: usize,
        local: usize,
    },
    #[error("tile origin ({x}, {y}) does not fit a {local}px patch inside {width}x{height}")]
    OriginOutOfBounds {
        x: usize,
        y: usize,
        local: usize,
        width: usize,
        height: usize,
    },
    #[error("tile has shape {found:?}, expected (3, {size}, {size})")]
    TileShape {
        found: (usize, usize, usize),
        size: usize,
    },
    #[error("pixel ({x}, {y}) is not covered by any tile")]
    Uncovered { x: usize, y: usize },
    #[error(transparent)]
    Shape(#[from] ShapeError),
}

/// Local (`N_l`) and region (`N_r`) patch sides in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchConfig {
    local: usize,
    region: usize,
}

impl PatchConfig {
    pub fn new(local: usize, region: usize) -> Result<Self, PatchError> {
        if local < 2 || !local.is_multiple_of(2) {
            return Err(PatchError::OddLocal(local));
        }
        if region <= local {
            return Err(PatchError::RegionTooSmall { local, region });
        }
        Ok(Self { local, region })
    }

    pub fn local(&self) -> usize {
        self.local
    }

    pub fn region(&self) -> usize {
        self.region
    }

    pub fn stride(&self) -> usize {
        self.local / 2
    }
}

/// Tile origins covering a frame, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileLayout {
    width: usize,
    height: usize,
    local: usize,
    xs: Vec<usize>,
    ys: Vec<usize>,
}

impl TileLayout {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn local(&self) -> usize {
        self.local
    }

    /// Origins along x; the same set is used for every tile row.
    pub fn xs(&self) -> &[usize] {
        &self.xs
    }

    pub fn ys(&self) -> &[usize] {
        &self.ys
    }

    pub fn len(&self) -> usize {
        self.xs.len() * self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(x, y)` origins, rows top to bottom, left to right within a row.
    pub fn origins(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.ys
            .iter()
            .flat_map(move |&y| self.xs.iter().map(move |&x| (x, y)))
    }
}

fn axis_origins(dim: usize, local: usize) -> Vec<usize> {
    let stride = local / 2;
    let last = dim - local;
    let mut origins = vec![0];
    let mut o = 0;
    while o < last {
        o = (o + stride).min(last);
        origins.push(o);
    }
    origins
}

pub fn compute_layout(
    width: usize,
    height: usize,
    cfg: &PatchConfig,
) -> Result<TileLayout, PatchError> {
    let local = cfg.local();
    if width < local || height < local {
        return Err(PatchError::FrameTooSmall {
            width,
            height,
            local,
        });
    }
    Ok(TileLayout {
        width,
        height,
        local,
        xs: axis_origins(width, local),
        ys: axis_origins(height, local),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(local: usize) -> PatchConfig {
        PatchConfig::new(local, local * 2).unwrap()
    }

    #[test]
    fn config_validation() {
        assert_eq!(PatchConfig::new(7, 20), Err(PatchError::OddLocal(7)));
        assert_eq!(PatchConfig::new(0, 20), Err(PatchError::OddLocal(0)));
        assert!(matches!(
            PatchConfig::new(360, 360),
            Err(PatchError::RegionTooSmall { .. })
        ));
        assert_eq!(PatchConfig::new(360, 1000).unwrap().stride(), 180);
    }

    #[test]
    fn layout_examples() {
        let l = compute_layout(720, 720, &cfg(360)).unwrap();
        assert_eq!(l.xs(), &[0, 180, 360]);
        assert_eq!(l.len(), 9);
        let l = compute_layout(500, 500, &cfg(360)).unwrap();
        assert_eq!(l.xs(), &[0, 140]);
        assert_eq!(l.len(), 4);
        let l = compute_layout(360, 360, &cfg(360)).unwrap();
        assert_eq!(l.origins().collect::<Vec<_>>(), vec![(0, 0)]);
    }

    #[test]
    fn layout_rejects_small_frames() {
        assert!(matches!(
            compute_layout(359, 800, &cfg(360)),
            Err(PatchError::FrameTooSmall { .. })
        ));
    }

    #[test]
    fn origins_are_row_major() {
        let l = compute_layout(20, 12, &cfg(8)).unwrap();
        let o: Vec<_> = l.origins().collect();
        assert_eq!(o[0], (0, 0));
        assert_eq!(o[1], (4, 0));
        assert_eq!(o[l.xs().len()], (0, 4));
        let mut sorted = o.clone();
        sorted.sort_by_key(|&(x, y)| (y, x));
        assert_eq!(o, sorted);
    }

    #[test]
    fn exhaustive_covering() {
        for local in [4, 8, 16] {
            for w in local..=3 * local {
                let origins = axis_origins(w, local);
                let mut covered = vec![false; w];
                for (i, &o) in origins.iter().enumerate() {
                    assert!(o + local <= w);
                    if i + 2 < origins.len() {
                        assert_eq!(origins[i + 1] - o, local / 2);
                    }
                    if i + 1 == origins.len() {
                        assert_eq!(o, w - local);
                    }
                    covered[o..o + local].iter_mut().for_each(|c| *c = true);
                }
                assert!(covered.iter().all(|&c| c), "gap at local={local} w={w}");
            }
        }
    }
}
