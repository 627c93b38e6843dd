//! Feature grids and the synthetic feature generator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::bilinear_cells;
use crate::geometry::{BBox, Point2};
use crate::raster::MaskGrid;

pub const DEFAULT_FEATURE_DIM: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureGridError {
    #[error("feature grid must be at least 1x1 with one channel, got {0}x{1}x{2}")]
    Empty(usize, usize, usize),
    #[error("feature grid expects {expected} values, got {got}")]
    ValueCount { expected: usize, got: usize },
    #[error("non-finite feature value at index {0}")]
    NonFinite(usize),
}

/// Dense per-cell feature vectors, row-major with channels innermost.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureGrid {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl<'de> Deserialize<'de> for FeatureGrid {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            width: usize,
            height: usize,
            channels: usize,
            data: Vec<f64>,
        }
        let r = Raw::deserialize(d)?;
        FeatureGrid::new(r.width, r.height, r.channels, r.data).map_err(serde::de::Error::custom)
    }
}

impl FeatureGrid {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self, FeatureGridError> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(FeatureGridError::Empty(width, height, channels));
        }
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(FeatureGridError::ValueCount { expected, got: data.len() });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(FeatureGridError::NonFinite(i));
        }
        Ok(Self { width, height, channels, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn cell(&self, col: usize, row: usize) -> &[f64] {
        let start = (row * self.width + col) * self.channels;
        &self.data[start..start + self.channels]
    }

    /// Bilinear feature vector at `q`, clamped at the border.
    pub fn sample(&self, q: Point2) -> Vec<f64> {
        let (i0, i1, tx, j0, j1, ty) = bilinear_cells(q, self.width, self.height);
        let (a, b, c, d) = (self.cell(i0, j0), self.cell(i1, j0), self.cell(i0, j1), self.cell(i1, j1));
        (0..self.channels)
            .map(|k| {
                let top = (1.0 - tx) * a[k] + tx * b[k];
                let bottom = (1.0 - tx) * c[k] + tx * d[k];
                (1.0 - ty) * top + ty * bottom
            })
            .collect()
    }

    /// Copy whose cell `(c + dc, r + dr)` equals this grid's cell `(c, r)`;
    /// cells with no source take the nearest source cell.
    pub fn shifted(&self, dc: isize, dr: isize) -> FeatureGrid {
        let mut data = Vec::with_capacity(self.data.len());
        for r in 0..self.height as isize {
            for c in 0..self.width as isize {
                let sc = (c - dc).clamp(0, self.width as isize - 1) as usize;
                let sr = (r - dr).clamp(0, self.height as isize - 1) as usize;
                data.extend_from_slice(self.cell(sc, sr));
            }
        }
        FeatureGrid { data, ..*self }
    }

    /// Instance embedding: per-channel mean followed by per-channel standard
    /// deviation over the cells whose centers fall inside `bbox`.
    pub fn box_embedding(&self, bbox: &BBox) -> Vec<f64> {
        let mut sum = vec![0.0; self.channels];
        let mut sq = vec![0.0; self.channels];
        let mut n = 0usize;
        for r in 0..self.height {
            for c in 0..self.width {
                let p = MaskGrid::cell_center(c, r);
                if p.x < bbox.min.x || p.x > bbox.max.x || p.y < bbox.min.y || p.y > bbox.max.y {
                    continue;
                }
                n += 1;
                for (k, v) in self.cell(c, r).iter().enumerate() {
                    sum[k] += v;
                    sq[k] += v * v;
                }
            }
        }
        let n = n.max(1) as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std = sq.iter().zip(&mean).map(|(s, m)| (s / n - m * m).max(0.0).sqrt());
        mean.iter().copied().chain(std).collect()
    }
}

/// Parameters of [`synthetic_features`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticFeatureConfig {
    pub channels: usize,
    /// Gaussian sigmas (px) of the two blurred copies of the label map.
    pub blur_sigmas: [f64; 2],
    /// Standard deviation of the noise channels.
    pub noise_std: f64,
}

impl Default for SyntheticFeatureConfig {
    fn default() -> Self {
        Self { channels: DEFAULT_FEATURE_DIM, blur_sigmas: [1.0, 3.0], noise_std: 0.05 }
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as isize;
    let mut k: Vec<f64> = (-radius..=radius).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable Gaussian blur with zero padding outside the grid.
fn blur(values: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return values.to_vec();
    }
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, kv) in k.iter().enumerate() {
                let sx = x as isize + i as isize - r;
                if sx >= 0 && (sx as usize) < w {
                    acc += kv * values[y * w + sx as usize];
                }
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, kv) in k.iter().enumerate() {
                let sy = y as isize + i as isize - r;
                if sy >= 0 && (sy as usize) < h {
                    acc += kv * tmp[sy as usize * w + x];
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Builds a feature grid standing in for backbone features.
///
/// `label` is a label map in `[0, 1]`: a binary mask for one instance, or
/// distinct levels per instance for multi-instance scenes. Channels:
///
/// 0. label blurred at `blur_sigmas[0]`
/// 1. label blurred at `blur_sigmas[1]`
/// 2. |d/dx| of channel 0
/// 3. |d/dy| of channel 0
/// 4. cell-center x divided by the image diagonal
/// 5. cell-center y (downward) divided by the image diagonal
/// 6. and up: seeded Gaussian noise
pub fn synthetic_features(label: &MaskGrid, cfg: &SyntheticFeatureConfig, seed: u64) -> FeatureGrid {
    let (w, h) = (label.width(), label.height());
    let f = cfg.channels.max(1);
    let fine = blur(label.values(), w, h, cfg.blur_sigmas[0]);
    let coarse = blur(label.values(), w, h, cfg.blur_sigmas[1]);
    let at = |x: isize, y: isize| fine[y.clamp(0, h as isize - 1) as usize * w + x.clamp(0, w as isize - 1) as usize];
    let diag = (w as f64).hypot(h as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, cfg.noise_std.max(0.0)).expect("valid noise std");
    let mut data = Vec::with_capacity(w * h * f);
    for y in 0..h {
        for x in 0..w {
            let (xi, yi) = (x as isize, y as isize);
            let gx = 0.5 * (at(xi + 1, yi) - at(xi - 1, yi));
            let gy = 0.5 * (at(xi, yi + 1) - at(xi, yi - 1));
            let base = [
                fine[y * w + x],
                coarse[y * w + x],
                gx.abs(),
                gy.abs(),
                (x as f64 + 0.5) / diag,
                (y as f64 + 0.5) / diag,
            ];
            for k in 0..f {
                data.push(if k < base.len() { base[k] } else { noise.sample(&mut rng) });
            }
        }
    }
    FeatureGrid::new(w, h, f, data).expect("generated grid is well formed")
}
