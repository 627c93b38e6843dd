//! Mask grids, polygon rasterization, mask-to-contour extraction and PGM I/O.
//!
//! Grids are stored row-major with row 0 at the top of the image. Cell
//! `(col, row)` has its center at image coordinates `(col + 0.5, row + 0.5)`,
//! which is math-frame point `(col + 0.5, -(row + 0.5))`.

mod contours;
pub mod pgm;

pub use contours::{mask_to_contours, mask_to_contours_at, MIN_RING_DIAGONAL, MIN_RING_VERTICES};
pub use pgm::{decode_pgm, encode_pgm, read_pgm, write_pgm, PgmError, PgmFormat};

use crate::geometry::{Point2, Polygon};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RasterError {
    #[error("grid dimensions must be at least 1x1, got {0}x{1}")]
    EmptyGrid(usize, usize),
    #[error("grid expects {expected} values, got {got}")]
    ValueCount { expected: usize, got: usize },
    #[error("value {value} at index {index} is outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("grid dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
}

/// Raster of scalars in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskGrid {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl MaskGrid {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::EmptyGrid(width, height));
        }
        if values.len() != width * height {
            return Err(RasterError::ValueCount { expected: width * height, got: values.len() });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(RasterError::OutOfRange { index, value });
        }
        Ok(Self { width, height, values })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self, RasterError> {
        Self::new(width, height, vec![0.0; width * height])
    }

    /// Builds a grid from rows listed top to bottom.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, RasterError> {
        let height = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(RasterError::ValueCount { expected: width * height, got: rows.iter().map(Vec::len).sum() });
        }
        Self::new(width, height, rows.concat())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn set(&mut self, col: usize, row: usize, v: f64) {
        assert!((0.0..=1.0).contains(&v), "mask value {v} out of range");
        self.values[row * self.width + col] = v;
    }

    /// Math-frame center of cell `(col, row)`.
    pub fn cell_center(col: usize, row: usize) -> Point2 {
        Point2::new(col as f64 + 0.5, -(row as f64 + 0.5))
    }

    /// Cells with value above 0.5.
    pub fn foreground(&self) -> Vec<bool> {
        self.values.iter().map(|&v| v > 0.5).collect()
    }

    pub fn foreground_count(&self) -> usize {
        self.values.iter().filter(|&&v| v > 0.5).count()
    }

    pub fn same_dims(&self, other: &MaskGrid) -> Result<(), RasterError> {
        if self.width != other.width || self.height != other.height {
            return Err(RasterError::DimensionMismatch(self.width, self.height, other.width, other.height));
        }
        Ok(())
    }

    /// Element-wise `1 - v`.
    pub fn inverted(&self) -> MaskGrid {
        MaskGrid { width: self.width, height: self.height, values: self.values.iter().map(|v| 1.0 - v).collect() }
    }
}

/// Even-odd scanline fill of `rings` sampled at cell centers.
pub fn rasterize(rings: &[Polygon], width: usize, height: usize) -> MaskGrid {
    assert!(width >= 1 && height >= 1, "raster needs positive dimensions");
    let mut values = vec![0.0; width * height];
    let mut xs = Vec::new();
    for row in 0..height {
        let y = -(row as f64 + 0.5);
        xs.clear();
        for ring in rings {
            for (a, b) in ring.edges() {
                if (a.y > y) != (b.y > y) {
                    xs.push(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
                }
            }
        }
        xs.sort_by(f64::total_cmp);
        for pair in xs.chunks_exact(2) {
            // Cells whose center x satisfies pair[0] <= cx < pair[1]; matches
            // the strict `q.x < x` crossing rule used for containment.
            let start = (pair[0] - 0.5).ceil().max(0.0);
            let end = (pair[1] - 0.5).ceil().min(width as f64);
            let (start, end) = (start as usize, end.max(0.0) as usize);
            for c in start..end.max(start) {
                values[row * width + c] = 1.0;
            }
        }
    }
    MaskGrid { width, height, values }
}
