//! Synthetic ground-truth shapes and the standard corpus.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use super::HarnessError;
use crate::geometry::{self_intersection_count, Orientation, Point2, Polygon, Region};

/// Master seed of the standard corpus.
pub const STANDARD_SEED: u64 = 20220314;
/// Minimum vertex count of generated rings.
pub const MIN_SHAPE_VERTICES: usize = 64;
const CURVE_VERTICES: usize = 256;
const MAX_RESEEDS: u64 = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeKind {
    /// `points` tips on radius `scale / 2`, inner vertices at `ratio` times that.
    Star { points: usize, ratio: f64 },
    /// Radius `scale / 2 * (1 + sum_h a_h cos(h t + phi_h))` with harmonics
    /// `h = 2, 3, ...` in order.
    Blob { amplitudes: Vec<f64>, phases: Vec<f64> },
    /// Long side `scale`, `aspect = width / height`, corner radius as a
    /// fraction of the short side.
    RoundedRect { aspect: f64, corner_radius: f64 },
    /// Outer radius `scale / 2`, hole radius `ratio` times that.
    Annulus { ratio: f64 },
}

impl ShapeKind {
    pub fn name(&self) -> &'static str {
        match self {
            ShapeKind::Star { .. } => "star",
            ShapeKind::Blob { .. } => "blob",
            ShapeKind::RoundedRect { .. } => "rounded_rect",
            ShapeKind::Annulus { .. } => "annulus",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    #[serde(flatten)]
    pub kind: ShapeKind,
    /// Characteristic size in px (diameter or long side).
    pub scale: f64,
    /// Position of the shape's origin, math coordinates.
    pub center: Point2,
    /// Rotation in radians about the origin, applied before translation.
    pub rotation: f64,
    /// Seed for redrawing blob phases when a draw self-intersects.
    pub seed: u64,
}

/// Ground truth produced by [`gen_shape`]: outer ring CCW, holes CW, and the
/// points where the boundary has a corner (empty for smooth shapes).
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticShape {
    pub region: Region,
    pub corners: Vec<Point2>,
    pub convex: bool,
}

fn polar(r: f64, a: f64) -> Point2 {
    Point2::new(a.cos() * r, a.sin() * r)
}

fn densify(corners: &[Point2], per_edge: usize) -> Vec<Point2> {
    let n = corners.len();
    let mut out = Vec::with_capacity(n * per_edge);
    for i in 0..n {
        let (a, b) = (corners[i], corners[(i + 1) % n]);
        for s in 0..per_edge {
            out.push(a.lerp(b, s as f64 / per_edge as f64));
        }
    }
    out
}

fn check(cond: bool, msg: &str) -> Result<(), HarnessError> {
    if cond {
        Ok(())
    } else {
        Err(HarnessError::InvalidShape(msg.to_string()))
    }
}

fn star(points: usize, ratio: f64, scale: f64) -> Result<(Vec<Point2>, Vec<Point2>), HarnessError> {
    check(points >= 3, "star needs at least 3 points")?;
    check(ratio > 0.0 && ratio < 1.0, "star ratio must be in (0, 1)")?;
    let ro = 0.5 * scale;
    let corners: Vec<Point2> = (0..2 * points)
        .map(|i| polar(if i % 2 == 0 { ro } else { ratio * ro }, PI * i as f64 / points as f64 + 0.5 * PI))
        .collect();
    let per_edge = MIN_SHAPE_VERTICES.div_ceil(2 * points).max(8);
    Ok((densify(&corners, per_edge), corners))
}

fn blob(amplitudes: &[f64], phases: &[f64], scale: f64) -> Vec<Point2> {
    (0..CURVE_VERTICES)
        .map(|k| {
            let t = TAU * k as f64 / CURVE_VERTICES as f64;
            let wobble: f64 = amplitudes.iter().zip(phases).enumerate().map(|(h, (a, p))| a * ((h + 2) as f64 * t + p).cos()).sum();
            polar(0.5 * scale * (1.0 + wobble), t)
        })
        .collect()
}

fn rounded_rect(aspect: f64, corner_radius: f64, scale: f64) -> Result<(Vec<Point2>, Vec<Point2>), HarnessError> {
    check((0.25..=4.0).contains(&aspect), "aspect must be in [0.25, 4]")?;
    check((0.0..=0.5).contains(&corner_radius), "corner_radius must be in [0, 0.5]")?;
    let (w, h) = if aspect >= 1.0 { (scale, scale / aspect) } else { (scale * aspect, scale) };
    let r = corner_radius * w.min(h);
    let (hx, hy) = (0.5 * w - r, 0.5 * h - r);
    let centers = [Point2::new(hx, -hy), Point2::new(hx, hy), Point2::new(-hx, hy), Point2::new(-hx, -hy)];
    let arc = 16;
    let mut pts = Vec::new();
    let mut corners = Vec::new();
    for (k, c) in centers.iter().enumerate() {
        let a0 = -0.5 * PI + 0.5 * PI * k as f64;
        corners.push(*c + polar(r, a0 + 0.25 * PI));
        if r > 1e-9 {
            for s in 0..=arc {
                pts.push(*c + polar(r, a0 + 0.5 * PI * s as f64 / arc as f64));
            }
        } else {
            pts.push(*c);
        }
        // Straight run to the next arc.
        let next = centers[(k + 1) % 4] + polar(r, a0 + 0.5 * PI);
        let last = *pts.last().unwrap();
        let steps = (last.distance(next) / 4.0).ceil().max(1.0) as usize;
        for s in 1..steps {
            pts.push(last.lerp(next, s as f64 / steps as f64));
        }
    }
    Ok((pts, corners))
}

fn place(points: &[Point2], spec: &ShapeSpec) -> Vec<Point2> {
    let (s, c) = spec.rotation.sin_cos();
    points.iter().map(|p| spec.center + Point2::new(c * p.x - s * p.y, s * p.x + c * p.y)).collect()
}

fn ring(points: Vec<Point2>, orientation: Orientation) -> Result<Polygon, HarnessError> {
    Ok(Polygon::new(points)?.with_orientation(orientation))
}

fn simple(p: &Polygon) -> bool {
    self_intersection_count(p) == 0
}

/// Builds a valid simple ground-truth shape.
pub fn gen_shape(spec: &ShapeSpec) -> Result<SyntheticShape, HarnessError> {
    check(spec.scale.is_finite() && spec.scale > 0.0, "scale must be > 0")?;
    let shape = match &spec.kind {
        ShapeKind::Star { points, ratio } => {
            let (pts, corners) = star(*points, *ratio, spec.scale)?;
            let outer = ring(place(&pts, spec), Orientation::Ccw)?;
            SyntheticShape { region: Region::new(vec![outer]), corners: place(&corners, spec), convex: false }
        }
        ShapeKind::Blob { amplitudes, phases } => {
            check(amplitudes.len() == phases.len(), "blob needs one phase per amplitude")?;
            check(amplitudes.iter().map(|a| a.abs()).sum::<f64>() < 0.9, "blob amplitudes must sum below 0.9")?;
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let mut phases = phases.clone();
            let mut attempt = 0;
            loop {
                let outer = ring(place(&blob(amplitudes, &phases, spec.scale), spec), Orientation::Ccw)?;
                if simple(&outer) {
                    let convex = amplitudes.iter().all(|a| *a == 0.0);
                    break SyntheticShape { region: Region::new(vec![outer]), corners: Vec::new(), convex };
                }
                attempt += 1;
                if attempt > MAX_RESEEDS {
                    return Err(HarnessError::SelfIntersecting(MAX_RESEEDS));
                }
                phases = phases.iter().map(|_| rng.random_range(0.0..TAU)).collect();
            }
        }
        ShapeKind::RoundedRect { aspect, corner_radius } => {
            let (pts, corners) = rounded_rect(*aspect, *corner_radius, spec.scale)?;
            let outer = ring(place(&pts, spec), Orientation::Ccw)?;
            SyntheticShape { region: Region::new(vec![outer]), corners: place(&corners, spec), convex: true }
        }
        ShapeKind::Annulus { ratio } => {
            check(*ratio > 0.0 && *ratio < 1.0, "annulus ratio must be in (0, 1)")?;
            let circle = |r: f64| (0..CURVE_VERTICES).map(|k| polar(r, TAU * k as f64 / CURVE_VERTICES as f64)).collect::<Vec<_>>();
            let outer = ring(place(&circle(0.5 * spec.scale), spec), Orientation::Ccw)?;
            let hole = ring(place(&circle(0.5 * spec.scale * ratio), spec), Orientation::Cw)?;
            SyntheticShape { region: Region::new(vec![outer, hole]), corners: Vec::new(), convex: false }
        }
    };
    for r in shape.region.rings() {
        if !simple(r) {
            return Err(HarnessError::SelfIntersecting(0));
        }
    }
    Ok(shape)
}

/// One shape of a corpus placed on its own canvas.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusItem {
    pub name: String,
    pub spec: ShapeSpec,
    pub shape: SyntheticShape,
    pub width: usize,
    pub height: usize,
}

impl CorpusItem {
    /// Square canvas with a margin of 15% of the scale plus 8 px, and the
    /// shape centered on it.
    pub fn new(name: String, mut spec: ShapeSpec) -> Result<Self, HarnessError> {
        let side = (spec.scale * 1.3 + 16.0).ceil() as usize;
        spec.center = Point2::new(0.5 * side as f64, -0.5 * side as f64);
        let shape = gen_shape(&spec)?;
        Ok(Self { name, spec, shape, width: side, height: side })
    }

    pub fn kind(&self) -> &'static str {
        self.spec.kind.name()
    }

    /// Area of the ground-truth bounding box.
    pub fn box_area(&self) -> f64 {
        self.shape.region.bbox().area()
    }
}

/// 20 blobs, 15 stars, 10 rounded rectangles and 5 annuli with scales
/// drawn from 100 to 300 px.
pub fn standard_corpus(seed: u64) -> Result<Vec<CorpusItem>, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(50);
    let push = |out: &mut Vec<CorpusItem>, kind: ShapeKind, rng: &mut ChaCha8Rng| -> Result<(), HarnessError> {
        let name = format!("{}_{:02}", kind.name(), out.iter().filter(|i: &&CorpusItem| i.kind() == kind.name()).count());
        let spec = ShapeSpec { kind, scale: rng.random_range(100.0..=300.0), center: Point2::ZERO, rotation: rng.random_range(0.0..TAU), seed: rng.random() };
        out.push(CorpusItem::new(name, spec)?);
        Ok(())
    };
    for _ in 0..20 {
        let amplitudes: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..0.08)).collect();
        let phases = (0..4).map(|_| rng.random_range(0.0..TAU)).collect();
        push(&mut out, ShapeKind::Blob { amplitudes, phases }, &mut rng)?;
    }
    for _ in 0..15 {
        let kind = ShapeKind::Star { points: rng.random_range(5..=8), ratio: rng.random_range(0.45..0.65) };
        push(&mut out, kind, &mut rng)?;
    }
    for _ in 0..10 {
        let kind = ShapeKind::RoundedRect { aspect: rng.random_range(0.5..2.0), corner_radius: rng.random_range(0.08..0.25) };
        push(&mut out, kind, &mut rng)?;
    }
    for _ in 0..5 {
        push(&mut out, ShapeKind::Annulus { ratio: rng.random_range(0.35..0.6) }, &mut rng)?;
    }
    Ok(out)
}

/// The star subset of the standard corpus.
pub fn star_subset(corpus: &[CorpusItem]) -> Vec<CorpusItem> {
    corpus.iter().filter(|i| i.kind() == "star").cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: ShapeKind, scale: f64) -> ShapeSpec {
        ShapeSpec { kind, scale, center: Point2::ZERO, rotation: 0.0, seed: 1 }
    }

    #[test]
    fn star_construction() {
        let s = gen_shape(&spec(ShapeKind::Star { points: 5, ratio: 0.45 }, 100.0)).unwrap();
        assert_eq!(s.corners.len(), 10);
        let tips: Vec<_> = s.corners.iter().step_by(2).collect();
        assert_eq!(tips.len(), 5);
        for t in tips {
            assert!((t.norm() - 50.0).abs() < 1e-9);
        }
        assert!(s.region.outer().len() >= MIN_SHAPE_VERTICES);
        for c in &s.corners {
            assert!(s.region.boundary_distance(*c) < 1e-9);
        }
    }

    #[test]
    fn zero_blob_is_circle() {
        let s = gen_shape(&spec(ShapeKind::Blob { amplitudes: vec![0.0; 3], phases: vec![0.3; 3] }, 120.0)).unwrap();
        for v in s.region.outer().vertices() {
            assert!((v.norm() - 60.0).abs() < 1e-9);
        }
        assert!(s.convex);
    }

    #[test]
    fn generation_is_deterministic_and_simple() {
        let corpus = standard_corpus(STANDARD_SEED).unwrap();
        assert_eq!(corpus.len(), 50);
        let again = standard_corpus(STANDARD_SEED).unwrap();
        assert_eq!(corpus, again);
        let count = |k: &str| corpus.iter().filter(|i| i.kind() == k).count();
        assert_eq!((count("blob"), count("star"), count("rounded_rect"), count("annulus")), (20, 15, 10, 5));
        for item in &corpus {
            assert!((100.0..=300.0).contains(&item.spec.scale));
            for r in item.shape.region.rings() {
                assert_eq!(self_intersection_count(r), 0, "{}", item.name);
                assert!(r.len() >= MIN_SHAPE_VERTICES);
            }
            assert_eq!(item.shape.region.outer().orientation(), Orientation::Ccw);
            let b = item.shape.region.bbox();
            assert!(b.min.x > 0.0 && b.max.x < item.width as f64 && b.max.y < 0.0 && b.min.y > -(item.height as f64));
        }
    }

    #[test]
    fn annulus_has_cw_hole() {
        let s = gen_shape(&spec(ShapeKind::Annulus { ratio: 0.5 }, 100.0)).unwrap();
        assert_eq!(s.region.rings().len(), 2);
        assert_eq!(s.region.rings()[1].orientation(), Orientation::Cw);
        assert!(!s.region.contains(Point2::ZERO));
        assert!(s.region.contains(Point2::new(37.0, 0.0)));
    }

    #[test]
    fn invalid_specs_error() {
        assert!(gen_shape(&spec(ShapeKind::Star { points: 2, ratio: 0.5 }, 100.0)).is_err());
        assert!(gen_shape(&spec(ShapeKind::Blob { amplitudes: vec![0.6, 0.5], phases: vec![0.0, 0.0] }, 100.0)).is_err());
        assert!(gen_shape(&spec(ShapeKind::Annulus { ratio: 1.0 }, 100.0)).is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        let s = spec(ShapeKind::RoundedRect { aspect: 1.5, corner_radius: 0.1 }, 200.0);
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.contains(r#""kind":"rounded_rect""#));
        assert_eq!(serde_json::from_str::<ShapeSpec>(&text).unwrap(), s);
    }
}
