use crate::imagecore::{Frame, Tensor};

use super::PatchError;

/// Unnormalised Gaussian blending mask for an `N_l x N_l` tile.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMap {
    size: usize,
    data: Vec<f64>,
}

impl WeightMap {
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.size + x]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Gaussian with mean `N_l/2` and standard deviation `N_l/6`, sampled at pixel
/// centres `(x + 0.5, y + 0.5)`.
pub fn gaussian_weights(size: usize) -> WeightMap {
    assert!(size >= 2, "gaussian_weights: size must be at least 2");
    let mu = size as f64 / 2.0;
    let sigma = size as f64 / 6.0;
    let denom = 2.0 * sigma * sigma;
    let axis: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 + 0.5 - mu;
            d * d
        })
        .collect();
    let mut data = Vec::with_capacity(size * size);
    for dy in &axis {
        for dx in &axis {
            data.push((-(dx + dy) / denom).exp());
        }
    }
    WeightMap { size, data }
}

/// Running weighted sum of tiles. Tiles can be added in any order; adding them
/// in a fixed order gives bit-identical output.
#[derive(Debug, Clone)]
pub struct TileAccumulator {
    width: usize,
    height: usize,
    weights: WeightMap,
    sum: Vec<f64>,
    weight_sum: Vec<f64>,
}

impl TileAccumulator {
    pub fn new(width: usize, height: usize, weights: WeightMap) -> Self {
        Self {
            width,
            height,
            weights,
            sum: vec![0.0; 3 * width * height],
            weight_sum: vec![0.0; width * height],
        }
    }

    pub fn add(&mut self, origin: (usize, usize), tile: &Tensor) -> Result<(), PatchError> {
        let n = self.weights.size();
        if tile.shape() != (3, n, n) {
            return Err(PatchError::TileShape {
                found: tile.shape(),
                size: n,
            });
        }
        let (x0, y0) = origin;
        if x0 + n > self.width || y0 + n > self.height {
            return Err(PatchError::OriginOutOfBounds {
                x: x0,
                y: y0,
                local: n,
                width: self.width,
                height: self.height,
            });
        }
        let plane = self.width * self.height;
        for y in 0..n {
            let row = (y0 + y) * self.width + x0;
            let wrow = &self.weights.data[y * n..(y + 1) * n];
            for (x, &wt) in wrow.iter().enumerate() {
                self.weight_sum[row + x] += wt;
            }
            for c in 0..3 {
                let src = &tile.plane(c)[y * n..(y + 1) * n];
                let dst = &mut self.sum[c * plane + row..c * plane + row + n];
                for ((d, &s), &wt) in dst.iter_mut().zip(src).zip(wrow) {
                    *d += wt * s as f64;
                }
            }
        }
        Ok(())
    }

    /// Normalises by the accumulated weight. Fails on the first uncovered pixel.
    pub fn finish(self) -> Result<Frame, PatchError> {
        let plane = self.width * self.height;
        if let Some(i) = self.weight_sum.iter().position(|&w| w <= 0.0) {
            return Err(PatchError::Uncovered {
                x: i % self.width,
                y: i / self.width,
            });
        }
        let data = self
            .sum
            .iter()
            .enumerate()
            .map(|(i, &s)| (s / self.weight_sum[i % plane]) as f32)
            .collect();
        Ok(Frame::from_clamped(self.width, self.height, data)?)
    }
}

/// Weighted-mean reassembly of `(origin, 3 x N_l x N_l)` tiles.
pub fn merge(
    tiles: &[((usize, usize), Tensor)],
    width: usize,
    height: usize,
    weights: &WeightMap,
) -> Result<Frame, PatchError> {
    let mut acc = TileAccumulator::new(width, height, weights.clone());
    for (origin, tile) in tiles {
        acc.add(*origin, tile)?;
    }
    acc.finish()
}
