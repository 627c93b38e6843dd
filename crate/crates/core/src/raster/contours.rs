//! Marching-squares isocontours over cell-center samples.

use std::collections::HashMap;

use super::MaskGrid;
use crate::geometry::{Point2, Polygon, COINCIDENT_EPS};

/// Rings with fewer vertices than this are dropped.
pub const MIN_RING_VERTICES: usize = 8;
/// Rings whose bounding-box diagonal is below this (px) are dropped.
pub const MIN_RING_DIAGONAL: f64 = 4.0;

/// Contours at the 0.5 level.
pub fn mask_to_contours(m: &MaskGrid) -> Vec<Polygon> {
    mask_to_contours_at(m, 0.5)
}

/// Closed isocontours of `m` at `threshold`, in the math frame.
///
/// Samples above the threshold are inside. The grid is padded with a ring of
/// zeros so every contour closes. Outer rings come out CCW and hole rings CW;
/// saddle cells are resolved by the mean of their four corners.
pub fn mask_to_contours_at(m: &MaskGrid, threshold: f64) -> Vec<Polygon> {
    // Padded sample lattice: index (i, j) for i in 0..w+2, j in 0..h+2 maps to
    // grid cell (i - 1, j - 1); the border is zero.
    let (w, h) = (m.width() as i64, m.height() as i64);
    let pw = w + 2;
    let ph = h + 2;
    let sample = |i: i64, j: i64| -> f64 {
        if i < 1 || j < 1 || i > w || j > h {
            0.0
        } else {
            m.get((i - 1) as usize, (j - 1) as usize)
        }
    };
    let position = |i: i64, j: i64| Point2::new(i as f64 - 0.5, -(j as f64 - 0.5));

    // Edge keys: horizontal edge (i,j)-(i+1,j) and vertical edge (i,j)-(i,j+1).
    let h_key = |i: i64, j: i64| (j * pw + i) as u64 * 2;
    let v_key = |i: i64, j: i64| (j * pw + i) as u64 * 2 + 1;

    let mut crossing_points: HashMap<u64, Point2> = HashMap::new();
    let mut crossing = |key: u64, a: (i64, i64), b: (i64, i64)| -> Point2 {
        *crossing_points.entry(key).or_insert_with(|| {
            let (va, vb) = (sample(a.0, a.1), sample(b.0, b.1));
            let t = (threshold - va) / (vb - va);
            position(a.0, a.1).lerp(position(b.0, b.1), t)
        })
    };

    // segments[k] = (from_key, to_key); next_of maps from_key -> segment index.
    let mut segments: Vec<(u64, u64)> = Vec::new();
    let mut next_of: HashMap<u64, usize> = HashMap::new();

    for j in 0..ph - 1 {
        for i in 0..pw - 1 {
            // Corners in math-frame CCW order: bottom-left, bottom-right,
            // top-right, top-left (image rows grow downward).
            let corners = [(i, j + 1), (i + 1, j + 1), (i + 1, j), (i, j)];
            let vals = corners.map(|(a, b)| sample(a, b));
            let inside = vals.map(|v| v > threshold);
            let code = inside.iter().enumerate().fold(0u8, |acc, (k, &b)| acc | ((b as u8) << k));
            if code == 0 || code == 15 {
                continue;
            }
            // Edge k joins corner k and corner k+1.
            let edge_key = |k: usize| -> u64 {
                match k {
                    0 => h_key(i, j + 1),
                    1 => v_key(i + 1, j),
                    2 => h_key(i, j),
                    _ => v_key(i, j),
                }
            };
            let edge_ends = |k: usize| -> ((i64, i64), (i64, i64)) {
                // Canonical order (smaller lattice index first) so both
                // adjacent cells compute bit-identical crossing points.
                let (a, b) = (corners[k], corners[(k + 1) % 4]);
                if (a.1, a.0) <= (b.1, b.0) {
                    (a, b)
                } else {
                    (b, a)
                }
            };
            let cut: Vec<usize> = (0..4).filter(|&k| inside[k] != inside[(k + 1) % 4]).collect();
            let mut pairs: Vec<(usize, usize, usize)> = Vec::with_capacity(2);
            if cut.len() == 2 {
                pairs.push((cut[0], cut[1], usize::MAX));
            } else {
                // Saddle: corners 0 and 2 share a state, 1 and 3 the other.
                let center = vals.iter().sum::<f64>() / 4.0;
                let center_inside = center > threshold;
                // Isolate the two corners whose state differs from the center.
                for c in 0..4 {
                    if inside[c] != center_inside {
                        let before = (c + 3) % 4;
                        pairs.push((before, c, c));
                    }
                }
            }
            for (ea, eb, isolated) in pairs {
                let (a0, a1) = edge_ends(ea);
                let (b0, b1) = edge_ends(eb);
                let (ka, kb) = (edge_key(ea), edge_key(eb));
                let pa = crossing(ka, a0, a1);
                let pb = crossing(kb, b0, b1);
                // Orient so the inside lies to the left of travel.
                let (reference, want_left) = if isolated == usize::MAX {
                    let pts: Vec<Point2> = (0..4).filter(|&k| inside[k]).map(|k| position(corners[k].0, corners[k].1)).collect();
                    let c = pts.iter().fold(Point2::ZERO, |acc, p| acc + *p) * (1.0 / pts.len() as f64);
                    (c, true)
                } else {
                    (position(corners[isolated].0, corners[isolated].1), inside[isolated])
                };
                let left = (pb - pa).cross(reference - pa) > 0.0;
                let (from, to) = if left == want_left { (ka, kb) } else { (kb, ka) };
                next_of.insert(from, segments.len());
                segments.push((from, to));
            }
        }
    }

    let mut used = vec![false; segments.len()];
    let mut rings = Vec::new();
    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        let mut pts: Vec<Point2> = Vec::new();
        let mut cur = start;
        loop {
            used[cur] = true;
            let (from, to) = segments[cur];
            let p = crossing_points[&from];
            if pts.last().is_none_or(|q: &Point2| q.distance(p) > COINCIDENT_EPS) {
                pts.push(p);
            }
            match next_of.get(&to) {
                Some(&nxt) if !used[nxt] => cur = nxt,
                _ => break,
            }
        }
        while pts.len() > 1 && pts[0].distance(*pts.last().unwrap()) <= COINCIDENT_EPS {
            pts.pop();
        }
        if pts.len() < MIN_RING_VERTICES {
            continue;
        }
        let Ok(poly) = Polygon::new(pts) else { continue };
        if poly.bbox().diagonal() < MIN_RING_DIAGONAL {
            continue;
        }
        rings.push(poly);
    }
    rings
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{GridField, ProbabilityField};
    use crate::geometry::{regular_polygon, Orientation};
    use crate::metrics::mask_iou;
    use crate::raster::rasterize;

    fn filled_square(size: usize, lo: usize, hi: usize) -> MaskGrid {
        let mut m = MaskGrid::zeros(size, size).unwrap();
        for r in lo..hi {
            for c in lo..hi {
                m.set(c, r, 1.0);
            }
        }
        m
    }

    #[test]
    fn empty_mask_has_no_contours() {
        assert!(mask_to_contours(&MaskGrid::zeros(16, 16).unwrap()).is_empty());
    }

    #[test]
    fn square_round_trip() {
        let m = filled_square(64, 22, 42);
        let rings = mask_to_contours(&m);
        assert_eq!(rings.len(), 1);
        assert_eq!(rings[0].orientation(), Orientation::Ccw);
        let back = rasterize(&rings, 64, 64);
        assert!(mask_iou(&m, &back).unwrap() >= 0.98);
    }

    #[test]
    fn annulus_gives_outer_and_hole() {
        let mut m = MaskGrid::zeros(64, 64).unwrap();
        for r in 0..64 {
            for c in 0..64 {
                let d = MaskGrid::cell_center(c, r).distance(Point2::new(32.0, -32.0));
                if (10.0..24.0).contains(&d) {
                    m.set(c, r, 1.0);
                }
            }
        }
        let rings = mask_to_contours(&m);
        assert_eq!(rings.len(), 2);
        let ccw = rings.iter().filter(|r| r.orientation() == Orientation::Ccw).count();
        assert_eq!(ccw, 1);
        let outer = rings.iter().find(|r| r.orientation() == Orientation::Ccw).unwrap();
        let hole = rings.iter().find(|r| r.orientation() == Orientation::Cw).unwrap();
        assert!(outer.area() > hole.area());
    }

    #[test]
    fn vertices_lie_on_bilinear_isolevel() {
        let mut m = MaskGrid::zeros(40, 30).unwrap();
        for r in 0..30 {
            for c in 0..40 {
                let d = MaskGrid::cell_center(c, r).distance(Point2::new(20.0, -15.0));
                m.set(c, r, (1.0 - d / 12.0).clamp(0.0, 1.0));
            }
        }
        let field = GridField::new(&m);
        let rings = mask_to_contours(&m);
        assert_eq!(rings.len(), 1);
        for v in rings[0].vertices() {
            assert!((field.evaluate(*v) - 0.5).abs() < 1e-6);
        }
    }

    #[test]
    fn saddle_resolved_by_center() {
        // Two diagonal blobs touching at a corner: resolution by center mean.
        let mut m = MaskGrid::zeros(24, 24).unwrap();
        for r in 2..12 {
            for c in 2..12 {
                m.set(c, r, 1.0);
            }
        }
        for r in 12..22 {
            for c in 12..22 {
                m.set(c, r, 1.0);
            }
        }
        // Center of the saddle cell averages to 0.5, which is not inside:
        // two separate rings.
        let rings = mask_to_contours(&m);
        assert_eq!(rings.len(), 2);
        assert!(rings.iter().all(|r| r.orientation() == Orientation::Ccw));
    }

    #[test]
    fn tiny_rings_discarded() {
        let m = filled_square(16, 7, 8);
        assert!(mask_to_contours(&m).is_empty());
    }

    #[test]
    fn disc_round_trip() {
        let c = Point2::new(50.0, -50.0);
        let disc = regular_polygon(c, 35.0, 256, 0.0);
        let m = rasterize(std::slice::from_ref(&disc), 100, 100);
        let rings = mask_to_contours(&m);
        assert_eq!(rings.len(), 1);
        let resampled = rings[0].resample(128).unwrap();
        let back = rasterize(&[resampled], 100, 100);
        assert!(mask_iou(&m, &back).unwrap() >= 0.98);
    }
}
