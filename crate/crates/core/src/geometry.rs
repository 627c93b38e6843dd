//! Closed-polygon primitives.
//!
//! All coordinates are continuous pixel coordinates in a math frame (y up).
//! Raster and file I/O convert from image coordinates (y down) by negating y,
//! see [`Point2::from_image`].

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Vertices closer than this are considered coincident.
pub const COINCIDENT_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("non-finite vertex at index {0}")]
    NonFinite(usize),
    #[error("consecutive vertices {0} and {1} coincide")]
    CoincidentVertices(usize, usize),
    #[error("degenerate polygon")]
    Degenerate,
    #[error("undefined normal at vertex {0}")]
    UndefinedNormal(usize),
    #[error("vertex index {index} out of range for {len} vertices")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("resample count must be at least 3, got {0}")]
    BadResampleCount(usize),
}

/// A point (or vector) in continuous pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ZERO: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Converts an image-frame point (y down) into the math frame.
    pub fn from_image(x: f64, y: f64) -> Self {
        Self { x, y: -y }
    }

    /// Image-frame coordinates `(x, y_down)` of this point.
    pub fn to_image(self) -> (f64, f64) {
        (self.x, -self.y)
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Point2) -> f64 {
        (self - o).norm()
    }

    pub fn normalized(self) -> Option<Point2> {
        let n = self.norm();
        if n > 0.0 && n.is_finite() {
            Some(Point2::new(self.x / n, self.y / n))
        } else {
            None
        }
    }

    /// Rotates by -90 degrees: the right-hand side of a travel direction.
    pub fn perp_right(self) -> Point2 {
        Point2::new(self.y, -self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn lerp(self, o: Point2, t: f64) -> Point2 {
        Point2::new(self.x + (o.x - self.x) * t, self.y + (o.y - self.y) * t)
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Point2 {
    fn add_assign(&mut self, o: Point2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, k: f64) -> Point2 {
        Point2::new(self.x * k, self.y * k)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

impl From<(f64, f64)> for Point2 {
    fn from((x, y): (f64, f64)) -> Self {
        Point2::new(x, y)
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub min: Point2,
    pub max: Point2,
}

impl BBox {
    /// Tight box around a non-empty point set.
    pub fn from_points<I: IntoIterator<Item = Point2>>(points: I) -> Option<BBox> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut b = BBox { min: first, max: first };
        for p in it {
            b.min.x = b.min.x.min(p.x);
            b.min.y = b.min.y.min(p.y);
            b.max.x = b.max.x.max(p.x);
            b.max.y = b.max.y.max(p.y);
        }
        Some(b)
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn center(&self) -> Point2 {
        self.min.lerp(self.max, 0.5)
    }

    pub fn union(&self, o: &BBox) -> BBox {
        BBox {
            min: Point2::new(self.min.x.min(o.min.x), self.min.y.min(o.min.y)),
            max: Point2::new(self.max.x.max(o.max.x), self.max.y.max(o.max.y)),
        }
    }

    pub fn expanded(&self, margin: f64) -> BBox {
        BBox {
            min: self.min - Point2::new(margin, margin),
            max: self.max + Point2::new(margin, margin),
        }
    }

    pub fn translated(&self, d: Point2) -> BBox {
        BBox { min: self.min + d, max: self.max + d }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    Ccw,
    Cw,
}

impl Orientation {
    pub fn flipped(self) -> Self {
        match self {
            Orientation::Ccw => Orientation::Cw,
            Orientation::Cw => Orientation::Ccw,
        }
    }
}

/// Closed, oriented vertex ring. The last vertex connects back to the first.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Point2>,
    orientation: Orientation,
}

fn shoelace(vertices: &[Point2]) -> f64 {
    let n = vertices.len();
    let mut acc = 0.0;
    for i in 0..n {
        acc += vertices[i].cross(vertices[(i + 1) % n]);
    }
    0.5 * acc
}

/// Squared distance from `q` to segment `a`-`b`.
pub fn segment_distance_sq(q: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b - a;
    let len_sq = ab.dot(ab);
    let t = if len_sq > 0.0 { ((q - a).dot(ab) / len_sq).clamp(0.0, 1.0) } else { 0.0 };
    let d = q - (a + ab * t);
    d.dot(d)
}

/// Closest point to `q` on segment `a`-`b`.
pub fn segment_closest_point(q: Point2, a: Point2, b: Point2) -> Point2 {
    let ab = b - a;
    let len_sq = ab.dot(ab);
    let t = if len_sq > 0.0 { ((q - a).dot(ab) / len_sq).clamp(0.0, 1.0) } else { 0.0 };
    a + ab * t
}

impl Polygon {
    /// Validating constructor; orientation is taken from the shoelace sign.
    pub fn new(vertices: Vec<Point2>) -> Result<Self, GeometryError> {
        let n = vertices.len();
        if n < 3 {
            return Err(GeometryError::TooFewVertices(n));
        }
        if let Some(i) = vertices.iter().position(|p| !p.is_finite()) {
            return Err(GeometryError::NonFinite(i));
        }
        for i in 0..n {
            let j = (i + 1) % n;
            if vertices[i].distance(vertices[j]) <= COINCIDENT_EPS {
                return Err(GeometryError::CoincidentVertices(i, j));
            }
        }
        let area = shoelace(&vertices);
        if area == 0.0 {
            return Err(GeometryError::Degenerate);
        }
        let orientation = if area > 0.0 { Orientation::Ccw } else { Orientation::Cw };
        Ok(Self { vertices, orientation })
    }

    /// Builds a ring from evolved vertices without rejecting coincident
    /// neighbours. The orientation follows the shoelace sign, falling back to
    /// `hint` for zero-area rings.
    pub(crate) fn from_evolved(vertices: Vec<Point2>, hint: Orientation) -> Self {
        let area = shoelace(&vertices);
        let orientation = if area > 0.0 {
            Orientation::Ccw
        } else if area < 0.0 {
            Orientation::Cw
        } else {
            hint
        };
        Self { vertices, orientation }
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn into_vertices(self) -> Vec<Point2> {
        self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn signed_area(&self) -> f64 {
        shoelace(&self.vertices)
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    /// Iterator over `(start, end)` of every edge, including the closing one.
    pub fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| a.distance(b)).sum()
    }

    pub fn reversed(&self) -> Polygon {
        let mut v = self.vertices.clone();
        v.reverse();
        Polygon { vertices: v, orientation: self.orientation.flipped() }
    }

    /// Returns this ring with the requested orientation, reversing if needed.
    pub fn with_orientation(self, o: Orientation) -> Polygon {
        if self.orientation == o {
            self
        } else {
            self.reversed()
        }
    }

    pub fn translated(&self, d: Point2) -> Polygon {
        Polygon {
            vertices: self.vertices.iter().map(|&p| p + d).collect(),
            orientation: self.orientation,
        }
    }

    /// Area centroid.
    pub fn centroid(&self) -> Point2 {
        let n = self.vertices.len();
        let (mut cx, mut cy, mut a2) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            let c = p.cross(q);
            a2 += c;
            cx += (p.x + q.x) * c;
            cy += (p.y + q.y) * c;
        }
        Point2::new(cx / (3.0 * a2), cy / (3.0 * a2))
    }

    pub fn bbox(&self) -> BBox {
        BBox::from_points(self.vertices.iter().copied()).expect("polygon has vertices")
    }

    /// Uniform arc-length resampling to `n` vertices, starting at vertex 0.
    pub fn resample(&self, n: usize) -> Result<Polygon, GeometryError> {
        if n < 3 {
            return Err(GeometryError::BadResampleCount(n));
        }
        let m = self.vertices.len();
        let mut cumulative = Vec::with_capacity(m + 1);
        cumulative.push(0.0);
        for (a, b) in self.edges() {
            let last = *cumulative.last().unwrap();
            cumulative.push(last + a.distance(b));
        }
        let perimeter = cumulative[m];
        if perimeter < 1e-6 {
            return Err(GeometryError::Degenerate);
        }
        let mut out = Vec::with_capacity(n);
        let mut seg = 0usize;
        for k in 0..n {
            let t = perimeter * (k as f64) / (n as f64);
            while seg + 1 < m && cumulative[seg + 1] <= t {
                seg += 1;
            }
            let a = self.vertices[seg];
            let b = self.vertices[(seg + 1) % m];
            let len = cumulative[seg + 1] - cumulative[seg];
            let frac = if len > 0.0 { (t - cumulative[seg]) / len } else { 0.0 };
            out.push(if frac == 0.0 { a } else { a.lerp(b, frac) });
        }
        Ok(Polygon::from_evolved(out, self.orientation))
    }

    /// Unit normal at vertex `i`, pointing away from the enclosed region for
    /// CCW rings and into the hole for CW rings.
    ///
    /// Perpendicular of the central-difference tangent `x[i+1] - x[i-1]`.
    /// This matches the angle bisector when the incident edges have equal
    /// length and, unlike the bisector, stays stable on near-cusps of noisy
    /// contours. Zero-length edges are skipped in favour of the nearest
    /// distinct neighbours.
    pub fn vertex_normal(&self, i: usize) -> Result<Point2, GeometryError> {
        let n = self.vertices.len();
        if i >= n {
            return Err(GeometryError::IndexOutOfRange { index: i, len: n });
        }
        let x = self.vertices[i];
        let distinct = |p: &Point2| p.distance(x) > COINCIDENT_EPS;
        let prev = (1..n)
            .map(|k| self.vertices[(i + n - k) % n])
            .find(distinct)
            .ok_or(GeometryError::UndefinedNormal(i))?;
        let next = (1..n)
            .map(|k| self.vertices[(i + k) % n])
            .find(distinct)
            .ok_or(GeometryError::UndefinedNormal(i))?;
        // A full reversal has no chord direction; fall back to the outgoing edge.
        let tangent = (next - prev).normalized().or_else(|| (next - x).normalized()).ok_or(GeometryError::UndefinedNormal(i))?;
        Ok(tangent.perp_right())
    }

    /// All vertex normals; vertices whose normal is undefined get `None`.
    pub fn vertex_normals(&self) -> Vec<Option<Point2>> {
        (0..self.len()).map(|i| self.vertex_normal(i).ok()).collect()
    }

    /// Even-odd containment (half-open crossing rule).
    pub fn contains(&self, q: Point2) -> bool {
        crossing_parity(&self.vertices, q)
    }

    /// Unsigned distance from `q` to the closed polyline.
    pub fn boundary_distance(&self, q: Point2) -> f64 {
        self.edges()
            .map(|(a, b)| segment_distance_sq(q, a, b))
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }

    /// Closest point on the closed polyline.
    pub fn closest_boundary_point(&self, q: Point2) -> Point2 {
        let mut best = (f64::INFINITY, q);
        for (a, b) in self.edges() {
            let c = segment_closest_point(q, a, b);
            let d = c.distance(q);
            if d < best.0 {
                best = (d, c);
            }
        }
        best.1
    }

    /// Distance to the polyline, positive outside and negative inside.
    pub fn signed_distance(&self, q: Point2) -> f64 {
        let d = self.boundary_distance(q);
        if self.contains(q) {
            -d
        } else {
            d
        }
    }
}

fn crossing_parity(vertices: &[Point2], q: Point2) -> bool {
    let n = vertices.len();
    let mut inside = false;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        if (a.y > q.y) != (b.y > q.y) {
            let x = a.x + (q.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if q.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// A set of rings combined under the even-odd rule. By convention ring 0 is
/// the outer boundary (CCW) and any further rings are holes (CW).
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    rings: Vec<Polygon>,
}

impl Region {
    pub fn new(rings: Vec<Polygon>) -> Self {
        assert!(!rings.is_empty(), "region needs at least one ring");
        Self { rings }
    }

    /// Outer ring forced CCW, the rest forced CW.
    pub fn with_canonical_orientation(rings: Vec<Polygon>) -> Self {
        let rings = rings
            .into_iter()
            .enumerate()
            .map(|(i, r)| r.with_orientation(if i == 0 { Orientation::Ccw } else { Orientation::Cw }))
            .collect();
        Self::new(rings)
    }

    pub fn rings(&self) -> &[Polygon] {
        &self.rings
    }

    pub fn outer(&self) -> &Polygon {
        &self.rings[0]
    }

    pub fn into_rings(self) -> Vec<Polygon> {
        self.rings
    }

    pub fn contains(&self, q: Point2) -> bool {
        self.rings.iter().fold(false, |acc, r| acc ^ r.contains(q))
    }

    pub fn boundary_distance(&self, q: Point2) -> f64 {
        self.rings.iter().map(|r| r.boundary_distance(q)).fold(f64::INFINITY, f64::min)
    }

    pub fn closest_boundary_point(&self, q: Point2) -> Point2 {
        let mut best = (f64::INFINITY, q);
        for r in &self.rings {
            let c = r.closest_boundary_point(q);
            let d = c.distance(q);
            if d < best.0 {
                best = (d, c);
            }
        }
        best.1
    }

    pub fn signed_distance(&self, q: Point2) -> f64 {
        let d = self.boundary_distance(q);
        if self.contains(q) {
            -d
        } else {
            d
        }
    }

    pub fn bbox(&self) -> BBox {
        self.rings.iter().skip(1).fold(self.rings[0].bbox(), |b, r| b.union(&r.bbox()))
    }

    /// Signed area with holes subtracted.
    pub fn signed_area(&self) -> f64 {
        self.rings.iter().map(Polygon::signed_area).sum()
    }

    pub fn translated(&self, d: Point2) -> Region {
        Region { rings: self.rings.iter().map(|r| r.translated(d)).collect() }
    }
}

impl From<Polygon> for Region {
    fn from(p: Polygon) -> Self {
        Region::new(vec![p])
    }
}

/// Regular polygon (CCW) on a circle; vertex 0 sits at angle `phase`.
pub fn regular_polygon(center: Point2, radius: f64, n: usize, phase: f64) -> Polygon {
    let vertices = (0..n)
        .map(|k| {
            let a = phase + std::f64::consts::TAU * k as f64 / n as f64;
            center + Point2::new(a.cos(), a.sin()) * radius
        })
        .collect();
    Polygon::new(vertices).expect("regular polygon is valid")
}

/// Axis-aligned rectangle (CCW).
pub fn rectangle(min: Point2, max: Point2) -> Polygon {
    Polygon::new(vec![min, Point2::new(max.x, min.y), max, Point2::new(min.x, max.y)])
        .expect("rectangle is valid")
}

/// Number of properly crossing pairs of non-adjacent edges.
pub fn self_intersection_count(p: &Polygon) -> usize {
    let v = p.vertices();
    let n = v.len();
    let mut count = 0;
    for i in 0..n {
        let (a, b) = (v[i], v[(i + 1) % n]);
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (c, d) = (v[j], v[(j + 1) % n]);
            if segments_cross(a, b, c, d) {
                count += 1;
            }
        }
    }
    count
}

fn segments_cross(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let d1 = (b - a).cross(c - a);
    let d2 = (b - a).cross(d - a);
    let d3 = (d - c).cross(a - c);
    let d4 = (d - c).cross(b - c);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}
