//! Probability fields: maps from a point to the probability of lying
//! outside the object.
//!
//! Three realizations are provided: [`AnalyticOracle`] (logistic of the
//! signed distance to a known shape), [`GridField`] (bilinear interpolation
//! of a raster) and [`InstanceField`] (the per-instance point classifier
//! evaluated on a feature grid).

mod features;
mod ipc;

pub use features::{synthetic_features, FeatureGrid, FeatureGridError, SyntheticFeatureConfig, DEFAULT_FEATURE_DIM};
pub use ipc::{ipc_forward, relative_coords, InstanceContext, InstanceField, IpcParams, DEFAULT_HIDDEN};

use crate::geometry::{Point2, Region};
use crate::raster::MaskGrid;

/// A read-only map from a point to an outside-probability in `[0, 1]`.
///
/// Implementations must be deterministic and free of side effects.
pub trait ProbabilityField: Sync {
    fn evaluate(&self, q: Point2) -> f64;
}

impl<F: ProbabilityField + ?Sized> ProbabilityField for &F {
    fn evaluate(&self, q: Point2) -> f64 {
        (**self).evaluate(q)
    }
}

impl<F: ProbabilityField + ?Sized> ProbabilityField for Box<F> {
    fn evaluate(&self, q: Point2) -> f64 {
        (**self).evaluate(q)
    }
}

pub fn logistic(z: f64) -> f64 {
    crate::nn::sigmoid(z)
}

/// `logistic(signed_distance / tau)`; `tau == 0` gives the hard indicator
/// (1 outside, 0 inside, exactly 0.5 on the boundary).
#[derive(Debug, Clone)]
pub struct AnalyticOracle {
    shape: Region,
    tau: f64,
}

impl AnalyticOracle {
    pub fn new(shape: impl Into<Region>, tau: f64) -> Self {
        assert!(tau >= 0.0 && tau.is_finite(), "sharpness must be finite and non-negative");
        Self { shape: shape.into(), tau }
    }

    pub fn hard(shape: impl Into<Region>) -> Self {
        Self::new(shape, 0.0)
    }

    pub fn shape(&self) -> &Region {
        &self.shape
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

impl ProbabilityField for AnalyticOracle {
    fn evaluate(&self, q: Point2) -> f64 {
        let sd = self.shape.signed_distance(q);
        if sd == 0.0 {
            return 0.5;
        }
        if self.tau == 0.0 {
            if sd > 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            logistic(sd / self.tau)
        }
    }
}

/// Continuous cell coordinates for bilinear lookup: `(i0, i1, tx, j0, j1, ty)`
/// with clamping to the border cells.
pub(crate) fn bilinear_cells(q: Point2, width: usize, height: usize) -> (usize, usize, f64, usize, usize, f64) {
    let (u, v) = q.to_image();
    let fx = (u - 0.5).clamp(0.0, (width - 1) as f64);
    let fy = (v - 0.5).clamp(0.0, (height - 1) as f64);
    let (fx, fy) = (if fx.is_nan() { 0.0 } else { fx }, if fy.is_nan() { 0.0 } else { fy });
    let i0 = fx.floor() as usize;
    let j0 = fy.floor() as usize;
    let i1 = (i0 + 1).min(width - 1);
    let j1 = (j0 + 1).min(height - 1);
    (i0, i1, fx - i0 as f64, j0, j1, fy - j0 as f64)
}

/// Bilinear interpolation of a probability raster, sampled at cell centers
/// and clamped to the nearest border cell outside the grid.
#[derive(Debug, Clone)]
pub struct GridField<'a> {
    grid: &'a MaskGrid,
    invert: bool,
}

impl<'a> GridField<'a> {
    /// Raster values are outside-probabilities.
    pub fn new(grid: &'a MaskGrid) -> Self {
        Self { grid, invert: false }
    }

    /// Raster values are foreground (inside) probabilities; the field is
    /// `1 - value`.
    pub fn foreground(grid: &'a MaskGrid) -> Self {
        Self { grid, invert: true }
    }

    fn raw(&self, q: Point2) -> f64 {
        let g = self.grid;
        let (i0, i1, tx, j0, j1, ty) = bilinear_cells(q, g.width(), g.height());
        let top = (1.0 - tx) * g.get(i0, j0) + tx * g.get(i1, j0);
        let bottom = (1.0 - tx) * g.get(i0, j1) + tx * g.get(i1, j1);
        ((1.0 - ty) * top + ty * bottom).clamp(0.0, 1.0)
    }
}

impl ProbabilityField for GridField<'_> {
    fn evaluate(&self, q: Point2) -> f64 {
        let v = self.raw(q);
        if self.invert {
            1.0 - v
        } else {
            v
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::regular_polygon;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn circle() -> AnalyticOracle {
        AnalyticOracle::hard(regular_polygon(Point2::ZERO, 50.0, 360, 0.0))
    }

    #[test]
    fn hard_oracle_examples() {
        let f = circle();
        assert_eq!(f.evaluate(Point2::new(60.0, 0.0)), 1.0);
        assert_eq!(f.evaluate(Point2::new(10.0, 0.0)), 0.0);
        assert_eq!(f.evaluate(Point2::new(50.0, 0.0)), 0.5);
    }

    #[test]
    fn soft_oracle_is_logistic() {
        let f = AnalyticOracle::new(regular_polygon(Point2::ZERO, 50.0, 360, 0.0), 2.0);
        let v = f.evaluate(Point2::new(60.0, 0.0));
        assert!((v - 1.0 / (1.0 + (-5.0f64).exp())).abs() < 1e-12);
        assert!((v - 0.9933).abs() < 1e-4);
        let poly = f.shape().outer().clone();
        for (a, b) in poly.edges().take(20) {
            assert!((f.evaluate(a.lerp(b, 0.37)) - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn oracle_antisymmetry_about_boundary() {
        let f = AnalyticOracle::new(regular_polygon(Point2::ZERO, 50.0, 360, 0.0), 1.5);
        // Along the perpendicular through an edge midpoint the polygon's
        // distance is exactly symmetric.
        let half = std::f64::consts::PI / 360.0;
        let dir = Point2::new(half.cos(), half.sin());
        let mid = dir * (50.0 * half.cos());
        for d in [0.1, 0.5, 1.0, 3.0] {
            let out = f.evaluate(mid + dir * d);
            let inside = f.evaluate(mid - dir * d);
            assert!((out + inside - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn oracle_monotone_along_outward_ray() {
        let f = AnalyticOracle::new(regular_polygon(Point2::ZERO, 50.0, 128, 0.1), 2.0);
        let dir = Point2::new(0.6, 0.8);
        let mut prev = -1.0;
        for k in 0..200 {
            let v = f.evaluate(dir * (40.0 + 0.1 * k as f64));
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn grid_field_examples() {
        let g = MaskGrid::from_rows(&[vec![0.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let f = GridField::new(&g);
        assert_eq!(f.evaluate(MaskGrid::cell_center(0, 0)), 0.0);
        let mid = MaskGrid::cell_center(0, 0).lerp(MaskGrid::cell_center(1, 0), 0.5);
        assert_eq!(f.evaluate(mid), 0.5);
        // Outside the grid: clamped to the border cell.
        assert_eq!(f.evaluate(Point2::from_image(-5.0, 0.5)), 0.0);
        assert_eq!(f.evaluate(Point2::from_image(9.0, 9.0)), 1.0);
        assert_eq!(GridField::foreground(&g).evaluate(MaskGrid::cell_center(0, 0)), 1.0);
    }

    /// Textbook bilinear formula on image coordinates, written independently.
    fn reference_bilinear(g: &MaskGrid, u: f64, v: f64) -> f64 {
        let x = (u - 0.5).max(0.0).min(g.width() as f64 - 1.0);
        let y = (v - 0.5).max(0.0).min(g.height() as f64 - 1.0);
        let x1 = x.floor();
        let y1 = y.floor();
        let x2 = (x1 + 1.0).min(g.width() as f64 - 1.0);
        let y2 = (y1 + 1.0).min(g.height() as f64 - 1.0);
        let q = |a: f64, b: f64| g.get(a as usize, b as usize);
        let wx = x - x1;
        let wy = y - y1;
        q(x1, y1) * (1.0 - wx) * (1.0 - wy) + q(x2, y1) * wx * (1.0 - wy) + q(x1, y2) * (1.0 - wx) * wy + q(x2, y2) * wx * wy
    }

    #[test]
    fn grid_field_matches_reference_bilinear() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let vals = (0..256).map(|_| rng.random::<f64>()).collect();
        let g = MaskGrid::new(16, 16, vals).unwrap();
        let f = GridField::new(&g);
        for _ in 0..100 {
            let (u, v) = (rng.random_range(-1.0..17.0), rng.random_range(-1.0..17.0));
            let got = f.evaluate(Point2::from_image(u, v));
            assert!((got - reference_bilinear(&g, u, v)).abs() < 1e-9);
        }
        for r in 0..16 {
            for c in 0..16 {
                assert_eq!(f.evaluate(MaskGrid::cell_center(c, r)), g.get(c, r));
            }
        }
    }

    #[test]
    fn all_fields_stay_in_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let vals = (0..64).map(|_| rng.random::<f64>()).collect();
        let g = MaskGrid::new(8, 8, vals).unwrap();
        let grid = GridField::new(&g);
        let oracle = AnalyticOracle::new(regular_polygon(Point2::new(4.0, -4.0), 3.0, 32, 0.0), 0.7);
        let features = synthetic_features(&g, &SyntheticFeatureConfig::default(), 3);
        let params = IpcParams::random(DEFAULT_FEATURE_DIM, DEFAULT_HIDDEN, &mut rng);
        let ctx = InstanceContext::new(crate::geometry::BBox { min: Point2::new(0.0, -8.0), max: Point2::new(8.0, 0.0) }, params).unwrap();
        let ipc = InstanceField::new(&features, &ctx).unwrap();
        let fields: [&dyn ProbabilityField; 3] = [&grid, &oracle, &ipc];
        for _ in 0..10_000 {
            let q = Point2::new(rng.random_range(-20.0..30.0), rng.random_range(-30.0..20.0));
            for f in fields {
                let v = f.evaluate(q);
                assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
