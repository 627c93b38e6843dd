//! Polygon JSON files. Coordinates are image pixels with y pointing down.

use serde::{Deserialize, Serialize};

use crate::geometry::{BBox, Point2, Polygon, Region};
use crate::Error;

/// Coordinate convention tag written to every document.
pub const IMAGE_CONVENTION: &str = "image";
const BBOX_TOLERANCE: f64 = 1e-6;

pub type Ring = Vec<[f64; 2]>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceRecord {
    pub id: u64,
    /// `[x, y, w, h]` with `(x, y)` the top-left corner.
    pub bbox: [f64; 4],
    pub contours: Vec<Ring>,
    /// Every intermediate contour set, initial first, when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<Vec<Ring>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolygonDocument {
    pub coordinate_convention: String,
    /// Raster size the coordinates refer to, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<usize>,
    pub instances: Vec<InstanceRecord>,
}

pub fn ring_from_polygon(p: &Polygon) -> Ring {
    p.vertices()
        .iter()
        .map(|v| {
            let (x, y) = v.to_image();
            [x, y]
        })
        .collect()
}

pub fn polygon_from_ring(r: &Ring) -> Result<Polygon, Error> {
    Polygon::new(r.iter().map(|[x, y]| Point2::from_image(*x, *y)).collect()).map_err(|e| Error::Parse(e.to_string()))
}

/// `[x, y, w, h]` in image coordinates of a math-frame box.
pub fn image_bbox(b: &BBox) -> [f64; 4] {
    [b.min.x, -b.max.y, b.width(), b.height()]
}

fn ring_extent(rings: &[Ring]) -> Option<[f64; 4]> {
    let mut it = rings.iter().flatten();
    let first = it.next()?;
    let (mut x0, mut y0, mut x1, mut y1) = (first[0], first[1], first[0], first[1]);
    for p in it {
        x0 = x0.min(p[0]);
        y0 = y0.min(p[1]);
        x1 = x1.max(p[0]);
        y1 = y1.max(p[1]);
    }
    Some([x0, y0, x1 - x0, y1 - y0])
}

impl InstanceRecord {
    /// Builds a record with the box taken from the rings' extent.
    pub fn from_rings(id: u64, rings: &[Polygon]) -> Self {
        let contours: Vec<Ring> = rings.iter().map(ring_from_polygon).collect();
        let bbox = ring_extent(&contours).unwrap_or([0.0; 4]);
        Self { id, bbox, contours, trace: None }
    }

    pub fn region(&self) -> Result<Region, Error> {
        let rings = self.contours.iter().map(polygon_from_ring).collect::<Result<Vec<_>, _>>()?;
        Ok(Region::with_canonical_orientation(rings))
    }

    /// Detector box in the math frame.
    pub fn math_bbox(&self) -> BBox {
        let [x, y, w, h] = self.bbox;
        BBox { min: Point2::new(x, -(y + h)), max: Point2::new(x + w, -y) }
    }

    fn validate(&self) -> Result<(), Error> {
        if self.contours.is_empty() {
            return Err(Error::Parse(format!("instance {} has no contours", self.id)));
        }
        for r in &self.contours {
            if r.len() < 3 {
                return Err(Error::Parse(format!("instance {}: ring with {} points, need at least 3", self.id, r.len())));
            }
            if r.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::Parse(format!("instance {}: non-finite coordinate", self.id)));
            }
        }
        let ext = ring_extent(&self.contours).expect("non-empty");
        if self.bbox.iter().zip(&ext).any(|(a, b)| (a - b).abs() > BBOX_TOLERANCE) {
            return Err(Error::Parse(format!("instance {}: bbox {:?} does not match contour extent {:?}", self.id, self.bbox, ext)));
        }
        Ok(())
    }
}

impl PolygonDocument {
    pub fn new(width: Option<usize>, height: Option<usize>, instances: Vec<InstanceRecord>) -> Self {
        Self { coordinate_convention: IMAGE_CONVENTION.into(), width, height, instances }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.coordinate_convention != IMAGE_CONVENTION {
            return Err(Error::Parse(format!("unsupported coordinate_convention {:?}, expected \"image\"", self.coordinate_convention)));
        }
        self.instances.iter().try_for_each(InstanceRecord::validate)
    }

    pub fn parse(text: &str) -> Result<Self, Error> {
        let doc: Self = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        doc.validate()?;
        Ok(doc)
    }

    /// Canvas size: the declared one, else the contours' extent rounded up.
    pub fn canvas(&self) -> (usize, usize) {
        let all: Vec<Ring> = self.instances.iter().flat_map(|i| i.contours.iter().cloned()).collect();
        let ext = ring_extent(&all).unwrap_or([0.0; 4]);
        let w = self.width.unwrap_or_else(|| (ext[0] + ext[2]).ceil().max(1.0) as usize);
        let h = self.height.unwrap_or_else(|| (ext[1] + ext[3]).ceil().max(1.0) as usize);
        (w, h)
    }
}

/// Groups extracted rings into instances: each CCW ring with the CW rings
/// whose first vertex it contains. Larger outer rings claim holes first.
pub fn group_instances(rings: Vec<Polygon>) -> Vec<Vec<Polygon>> {
    let (mut outers, holes): (Vec<Polygon>, Vec<Polygon>) = rings.into_iter().partition(|r| r.signed_area() > 0.0);
    outers.sort_by(|a, b| b.area().total_cmp(&a.area()));
    // Smallest containing outer ring wins; iterate from the smallest.
    let mut groups: Vec<Vec<Polygon>> = outers.iter().map(|o| vec![o.clone()]).collect();
    for h in holes {
        let q = h.vertices()[0];
        if let Some(k) = (0..outers.len()).rev().find(|&k| outers[k].contains(q)) {
            groups[k].push(h);
        }
    }
    // Deterministic order: top-left first.
    groups.sort_by(|a, b| {
        let (ba, bb) = (a[0].bbox(), b[0].bbox());
        (-ba.max.y).total_cmp(&-bb.max.y).then(ba.min.x.total_cmp(&bb.min.x))
    });
    groups
}
