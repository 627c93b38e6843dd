//! Boundary-quality metrics.
//!
//! Boundary IoU uses the band of each mask that lies within Chebyshev
//! distance `d` of the background (cells outside the grid count as
//! background), i.e. the mask minus its erosion by a `(2d+1)` square.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self_intersection_count, Point2, Polygon};
use crate::raster::{MaskGrid, RasterError};

/// Points per ring for the Hausdorff estimate.
pub const HAUSDORFF_SAMPLES: usize = 1024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error("band width must be >= 1, got {0}")]
    BandWidth(usize),
    #[error("no corners given")]
    NoCorners,
    #[error("no rings given")]
    NoRings,
}

fn iou_counts(a: impl Iterator<Item = bool>, b: impl Iterator<Item = bool>) -> f64 {
    let (mut inter, mut union) = (0usize, 0usize);
    for (x, y) in a.zip(b) {
        inter += usize::from(x && y);
        union += usize::from(x || y);
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Intersection over union of the foregrounds (`value >= 0.5`); 1.0 when
/// both are empty.
pub fn mask_iou(a: &MaskGrid, b: &MaskGrid) -> Result<f64, RasterError> {
    a.same_dims(b)?;
    Ok(iou_counts(a.foreground().into_iter(), b.foreground().into_iter()))
}

/// `max(1, round(2% of the image diagonal))`.
pub fn default_band_width(width: usize, height: usize) -> usize {
    ((0.02 * (width as f64).hypot(height as f64)).round() as usize).max(1)
}

/// Foreground cells within Chebyshev distance `d` of a background cell.
pub fn boundary_band(m: &MaskGrid, d: usize) -> Vec<bool> {
    let (w, h) = (m.width(), m.height());
    let fg = m.foreground();
    // Summed-area table of foreground counts.
    let mut sat = vec![0usize; (w + 1) * (h + 1)];
    for r in 0..h {
        let mut row = 0;
        for c in 0..w {
            row += usize::from(fg[r * w + c]);
            sat[(r + 1) * (w + 1) + c + 1] = sat[r * (w + 1) + c + 1] + row;
        }
    }
    let full = (2 * d + 1) * (2 * d + 1);
    let mut band = vec![false; w * h];
    for r in 0..h {
        for c in 0..w {
            if !fg[r * w + c] {
                continue;
            }
            let interior = r >= d && c >= d && r + d < h && c + d < w && {
                let (r0, r1, c0, c1) = (r - d, r + d + 1, c - d, c + d + 1);
                sat[r1 * (w + 1) + c1] + sat[r0 * (w + 1) + c0] - sat[r0 * (w + 1) + c1] - sat[r1 * (w + 1) + c0] == full
            };
            band[r * w + c] = !interior;
        }
    }
    band
}

/// IoU of the two boundary bands of width `d`.
pub fn boundary_iou(a: &MaskGrid, b: &MaskGrid, d: usize) -> Result<f64, MetricsError> {
    a.same_dims(b)?;
    if d < 1 {
        return Err(MetricsError::BandWidth(d));
    }
    Ok(iou_counts(boundary_band(a, d).into_iter(), boundary_band(b, d).into_iter()))
}

fn distance_to_rings(q: Point2, rings: &[Polygon]) -> f64 {
    rings.iter().map(|r| r.boundary_distance(q)).fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceStats {
    pub mean: f64,
    pub median: f64,
    pub max: f64,
    /// Symmetric Hausdorff distance from dense boundary sampling.
    pub hausdorff: f64,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn directed_hausdorff(from: &[Polygon], to: &[Polygon]) -> f64 {
    from.iter()
        .flat_map(|r| r.resample(HAUSDORFF_SAMPLES).map(Polygon::into_vertices).unwrap_or_else(|_| r.vertices().to_vec()))
        .map(|q| distance_to_rings(q, to))
        .fold(0.0, f64::max)
}

/// Distance from every predicted vertex to the nearest ground-truth
/// boundary, plus the symmetric Hausdorff distance.
pub fn boundary_distance_stats(pred: &[Polygon], gt: &[Polygon]) -> Result<DistanceStats, MetricsError> {
    if pred.is_empty() || gt.is_empty() {
        return Err(MetricsError::NoRings);
    }
    let mut d: Vec<f64> = pred.iter().flat_map(|r| r.vertices()).map(|v| distance_to_rings(*v, gt)).collect();
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    let max = d.iter().copied().fold(0.0, f64::max);
    let median = median(&mut d);
    let hausdorff = directed_hausdorff(pred, gt).max(directed_hausdorff(gt, pred));
    Ok(DistanceStats { mean, median, max, hausdorff })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CornerStats {
    pub mean: f64,
    pub max: f64,
}

/// Distances from each ground-truth corner to the nearest point of the
/// predicted polyline.
pub fn corner_distances(pred: &[Polygon], corners: &[Point2]) -> Vec<f64> {
    corners.iter().map(|c| distance_to_rings(*c, pred)).collect()
}

pub fn corner_error(pred: &[Polygon], corners: &[Point2]) -> Result<CornerStats, MetricsError> {
    if corners.is_empty() {
        return Err(MetricsError::NoCorners);
    }
    if pred.is_empty() {
        return Err(MetricsError::NoRings);
    }
    let d = corner_distances(pred, corners);
    Ok(CornerStats { mean: d.iter().sum::<f64>() / d.len() as f64, max: d.iter().copied().fold(0.0, f64::max) })
}

/// Metrics of one refined instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mask_iou: f64,
    pub boundary_iou: f64,
    pub mean_distance: f64,
    pub median_distance: f64,
    pub max_distance: f64,
    pub hausdorff: f64,
    pub corner_error_mean: Option<f64>,
    pub corner_error_max: Option<f64>,
    pub frozen_fraction: f64,
    pub self_intersections: usize,
    /// Wall-clock time of the refinement; kept out of the main CSV so that
    /// reports stay byte-reproducible.
    #[serde(skip)]
    pub runtime_ms: f64,
}

/// Everything needed to score one prediction.
#[derive(Debug, Clone, Copy)]
pub struct EvalInput<'a> {
    pub pred: &'a [Polygon],
    pub gt: &'a [Polygon],
    pub corners: &'a [Point2],
    pub width: usize,
    pub height: usize,
    pub frozen_fraction: f64,
    pub runtime_ms: f64,
}

pub fn evaluate(input: EvalInput<'_>) -> Result<MetricsReport, MetricsError> {
    let pm = crate::raster::rasterize(input.pred, input.width, input.height);
    let gm = crate::raster::rasterize(input.gt, input.width, input.height);
    let d = default_band_width(input.width, input.height);
    let dist = boundary_distance_stats(input.pred, input.gt)?;
    let corners = if input.corners.is_empty() { None } else { Some(corner_error(input.pred, input.corners)?) };
    Ok(MetricsReport {
        mask_iou: mask_iou(&pm, &gm)?,
        boundary_iou: boundary_iou(&pm, &gm, d)?,
        mean_distance: dist.mean,
        median_distance: dist.median,
        max_distance: dist.max,
        hausdorff: dist.hausdorff,
        corner_error_mean: corners.map(|c| c.mean),
        corner_error_max: corners.map(|c| c.max),
        frozen_fraction: input.frozen_fraction,
        self_intersections: input.pred.iter().map(self_intersection_count).sum(),
        runtime_ms: input.runtime_ms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{rectangle, regular_polygon};
    use crate::raster::rasterize;
    use proptest::prelude::*;

    fn square_mask(w: usize, h: usize, c0: usize, r0: usize, side: usize) -> MaskGrid {
        let mut m = MaskGrid::zeros(w, h).unwrap();
        for r in r0..r0 + side {
            for c in c0..c0 + side {
                m.set(c, r, 1.0);
            }
        }
        m
    }

    /// Band by definition: foreground cell with some cell at Chebyshev
    /// distance <= d that is background or off-grid.
    fn brute_band(m: &MaskGrid, d: usize) -> Vec<bool> {
        let (w, h) = (m.width() as isize, m.height() as isize);
        let d = d as isize;
        let mut out = Vec::new();
        for r in 0..h {
            for c in 0..w {
                let fg = m.get(c as usize, r as usize) >= 0.5;
                let mut near_bg = false;
                for dr in -d..=d {
                    for dc in -d..=d {
                        let (rr, cc) = (r + dr, c + dc);
                        if rr < 0 || cc < 0 || rr >= h || cc >= w || m.get(cc as usize, rr as usize) < 0.5 {
                            near_bg = true;
                        }
                    }
                }
                out.push(fg && near_bg);
            }
        }
        out
    }

    fn brute_iou(a: &[bool], b: &[bool]) -> f64 {
        let i = a.iter().zip(b).filter(|(x, y)| **x && **y).count();
        let u = a.iter().zip(b).filter(|(x, y)| **x || **y).count();
        if u == 0 {
            1.0
        } else {
            i as f64 / u as f64
        }
    }

    #[test]
    fn mask_iou_examples() {
        let a = square_mask(40, 40, 5, 5, 10);
        assert_eq!(mask_iou(&a, &a).unwrap(), 1.0);
        assert_eq!(mask_iou(&a, &square_mask(40, 40, 25, 25, 10)).unwrap(), 0.0);
        let half = square_mask(40, 40, 10, 5, 10);
        assert!((mask_iou(&a, &half).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let e = MaskGrid::zeros(3, 3).unwrap();
        assert_eq!(mask_iou(&e, &e).unwrap(), 1.0);
        assert!(mask_iou(&a, &e).is_err());
    }

    #[test]
    fn boundary_iou_brute_force_shifted_square() {
        let a = square_mask(140, 140, 20, 20, 100);
        let b = square_mask(140, 140, 22, 20, 100);
        let got = boundary_iou(&a, &b, 3).unwrap();
        let expected = brute_iou(&brute_band(&a, 3), &brute_band(&b, 3));
        assert_eq!(got, expected);
        assert_eq!(boundary_iou(&a, &a, 3).unwrap(), 1.0);
        assert!(boundary_iou(&a, &b, 0).is_err());
    }

    #[test]
    fn wide_band_approaches_mask_iou() {
        let a = square_mask(80, 80, 10, 10, 40);
        let eroded = square_mask(80, 80, 11, 11, 38);
        let wide = boundary_iou(&a, &eroded, 25).unwrap();
        assert!((wide - mask_iou(&a, &eroded).unwrap()).abs() < 1e-12);
        assert!(wide > boundary_iou(&a, &eroded, 2).unwrap());
    }

    #[test]
    fn default_band() {
        assert_eq!(default_band_width(10, 10), 1);
        assert_eq!(default_band_width(300, 400), 10);
    }

    #[test]
    fn distance_stats_examples() {
        let gt = regular_polygon(Point2::ZERO, 50.0, 720, 0.0);
        let zero = boundary_distance_stats(std::slice::from_ref(&gt), std::slice::from_ref(&gt)).unwrap();
        assert_eq!((zero.mean, zero.median, zero.max), (0.0, 0.0, 0.0));
        assert!(zero.hausdorff < 1e-9);
        let pred = regular_polygon(Point2::ZERO, 52.0, 720, 0.0);
        let s = boundary_distance_stats(std::slice::from_ref(&pred), std::slice::from_ref(&gt)).unwrap();
        assert!((s.mean - 2.0).abs() < 0.05);
        assert!((s.hausdorff - 2.0).abs() < 0.05);
        let t = Point2::new(13.5, -7.25);
        let moved = boundary_distance_stats(&[pred.translated(t)], &[gt.translated(t)]).unwrap();
        assert!((moved.mean - s.mean).abs() < 1e-9 && (moved.max - s.max).abs() < 1e-9);
    }

    fn star(k: usize, ro: f64, ri: f64) -> Polygon {
        let pts = (0..2 * k)
            .map(|i| {
                let a = std::f64::consts::PI * i as f64 / k as f64 + std::f64::consts::FRAC_PI_2;
                let r = if i % 2 == 0 { ro } else { ri };
                Point2::new(a.cos() * r, a.sin() * r)
            })
            .collect();
        Polygon::new(pts).unwrap()
    }

    #[test]
    fn corner_error_examples() {
        let s = star(5, 50.0, 22.5);
        let tips: Vec<Point2> = s.vertices().iter().step_by(2).copied().collect();
        assert_eq!(corner_error(std::slice::from_ref(&s), &tips).unwrap().max, 0.0);
        assert!(corner_error(std::slice::from_ref(&s), &[]).is_err());
        // The star's tips are its convex hull; the inner vertices sit at
        // distance r_o cos(pi/k) - r_i from the hull edge.
        let hull = Polygon::new(tips.clone()).unwrap();
        let inner: Vec<Point2> = s.vertices().iter().skip(1).step_by(2).copied().collect();
        let expected = 50.0 * (std::f64::consts::PI / 5.0).cos() - 22.5;
        for d in corner_distances(std::slice::from_ref(&hull), &inner) {
            assert!((d - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn smoothing_does_not_reduce_corner_error() {
        let s = star(5, 50.0, 22.5).resample(200).unwrap();
        let tips: Vec<Point2> = star(5, 50.0, 22.5).vertices().to_vec();
        let v = s.vertices();
        let n = v.len();
        let smoothed = Polygon::new((0..n).map(|i| v[(i + n - 1) % n] * 0.25 + v[i] * 0.5 + v[(i + 1) % n] * 0.25).collect()).unwrap();
        let before: f64 = corner_distances(std::slice::from_ref(&s), &tips).iter().sum();
        let after: f64 = corner_distances(std::slice::from_ref(&smoothed), &tips).iter().sum();
        assert!(after >= before);
    }

    #[test]
    fn evaluate_identity() {
        let gt = rectangle(Point2::from_image(10.0, 50.0), Point2::from_image(50.0, 10.0));
        let rings = [gt.resample(128).unwrap()];
        let r = evaluate(EvalInput { pred: &rings, gt: &[gt], corners: &[], width: 64, height: 64, frozen_fraction: 1.0, runtime_ms: 0.0 }).unwrap();
        assert_eq!(r.mask_iou, 1.0);
        assert_eq!(r.boundary_iou, 1.0);
        assert!(r.mean_distance < 1e-9);
        assert_eq!(r.corner_error_mean, None);
        assert_eq!(r.self_intersections, 0);
    }

    proptest! {
        #[test]
        fn band_matches_brute_force(seed in 0u64..500, d in 1usize..4) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let vals = (0..12 * 9).map(|_| if rng.random_bool(0.6) { 1.0 } else { 0.0 }).collect();
            let a = MaskGrid::new(12, 9, vals).unwrap();
            prop_assert_eq!(boundary_band(&a, d), brute_band(&a, d));
        }

        #[test]
        fn ious_symmetric_and_bounded(seed in 0u64..300) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let c = Point2::from_image(rng.random_range(20.0..40.0), rng.random_range(20.0..40.0));
            let a = rasterize(&[regular_polygon(c, rng.random_range(5.0..18.0), 40, 0.0)], 60, 60);
            let b = rasterize(&[regular_polygon(c + Point2::new(rng.random_range(-4.0..4.0), 0.0), rng.random_range(5.0..18.0), 40, 0.3)], 60, 60);
            let d = rng.random_range(1..6);
            let ab = boundary_iou(&a, &b, d).unwrap();
            prop_assert_eq!(ab, boundary_iou(&b, &a, d).unwrap());
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(mask_iou(&a, &b).unwrap(), mask_iou(&b, &a).unwrap());
            prop_assert_eq!(boundary_iou(&a, &a, d).unwrap(), 1.0);
        }
    }
}
