//! Two overlapping instances sharing one feature grid.
//!
//! Instance A is drawn on top of B. Each classifier is trained on its own
//! visible region, so points in the overlap are inside for A and outside
//! for B even though both see the same features there.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{derive_seed, gen_shape, HarnessError, ShapeKind, ShapeSpec};
use crate::fields::{synthetic_features, FeatureGrid, IpcParams, SyntheticFeatureConfig};
use crate::geometry::{BBox, Point2, Polygon, Region};
use crate::raster::{mask_to_contours, rasterize, MaskGrid};
use crate::training::{accuracy, fit_hypernetwork, fit_instance, sample_boundary_points, Hypernetwork, InstanceBatch, TrainConfig, TrainingSample};

/// Number of probe points drawn in the overlap.
const OVERLAP_PROBES: usize = 500;

#[derive(Debug, Clone)]
pub struct SceneInstance {
    /// Full shape before occlusion.
    pub full: Region,
    /// Visible part, the training ground truth.
    pub visible: Region,
    /// Detector box (of the visible part).
    pub bbox: BBox,
}

#[derive(Debug, Clone)]
pub struct OverlapScene {
    pub width: usize,
    pub height: usize,
    /// Background 0, A 0.5, B 1.0.
    pub label: MaskGrid,
    pub features: FeatureGrid,
    /// `[A, B]`.
    pub instances: [SceneInstance; 2],
}

fn visible_region(rings: Vec<Polygon>) -> Result<Region, HarnessError> {
    if rings.is_empty() {
        return Err(HarnessError::InvalidShape("instance is fully occluded".into()));
    }
    // Keep the largest outer ring and the holes inside it.
    let outer = rings
        .iter()
        .filter(|r| r.signed_area() > 0.0)
        .max_by(|a, b| a.area().total_cmp(&b.area()))
        .cloned()
        .ok_or_else(|| HarnessError::InvalidShape("no outer ring".into()))?;
    let mut keep = vec![outer.clone()];
    keep.extend(rings.into_iter().filter(|r| r.signed_area() < 0.0 && outer.contains(r.vertices()[0])));
    Ok(Region::new(keep))
}

/// Two blobs whose disks overlap by about a third of their diameter.
pub fn overlap_scene(seed: u64, features: &SyntheticFeatureConfig) -> Result<OverlapScene, HarnessError> {
    let (width, height) = (240usize, 180usize);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut blob = |cx: f64| -> Result<Region, HarnessError> {
        let kind = ShapeKind::Blob {
            amplitudes: (0..3).map(|_| rng.random_range(0.0..0.06)).collect(),
            phases: (0..3).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect(),
        };
        let spec = ShapeSpec { kind, scale: 110.0, center: Point2::new(cx, -90.0), rotation: 0.0, seed: rng.random() };
        Ok(gen_shape(&spec)?.region)
    };
    let a = blob(95.0)?;
    let b = blob(150.0)?;
    let ma = rasterize(a.rings(), width, height);
    let mb = rasterize(b.rings(), width, height);
    let mut label = MaskGrid::zeros(width, height)?;
    let mut b_only = MaskGrid::zeros(width, height)?;
    for r in 0..height {
        for c in 0..width {
            if ma.get(c, r) >= 0.5 {
                label.set(c, r, 0.5);
            } else if mb.get(c, r) >= 0.5 {
                label.set(c, r, 1.0);
                b_only.set(c, r, 1.0);
            }
        }
    }
    let b_visible = visible_region(mask_to_contours(&b_only))?;
    let grid = synthetic_features(&label, features, derive_seed(seed, 0, 1));
    let a_inst = SceneInstance { bbox: a.bbox(), visible: a.clone(), full: a };
    let b_inst = SceneInstance { bbox: b_visible.bbox(), visible: b_visible, full: b };
    Ok(OverlapScene { width, height, label, features: grid, instances: [a_inst, b_inst] })
}

/// Held-out accuracy per instance and the agreement of the two classifiers
/// on points of the overlap.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AwarenessReport {
    /// Held-out band accuracy of `[A, B]`.
    pub heldout_accuracy: [f64; 2],
    /// Fraction of overlap probes labelled differently by the two classifiers.
    pub opposite_fraction: f64,
    /// Fraction labelled inside by A and outside by B.
    pub correct_fraction: f64,
    pub probes: usize,
}

fn band_samples(scene: &OverlapScene, cfg: &TrainConfig, seed: u64) -> Result<[Vec<TrainingSample>; 2], HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |i: usize| {
        let inst = &scene.instances[i];
        sample_boundary_points(&inst.visible, &scene.features, &inst.bbox, cfg, i, &mut rng)
    };
    Ok([draw(0)?, draw(1)?])
}

fn overlap_probes(scene: &OverlapScene, seed: u64) -> Vec<Point2> {
    let [a, b] = &scene.instances;
    let (ba, bb) = (a.full.bbox(), b.full.bbox());
    let lo = Point2::new(ba.min.x.max(bb.min.x), ba.min.y.max(bb.min.y));
    let hi = Point2::new(ba.max.x.min(bb.max.x), ba.max.y.min(bb.max.y));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(OVERLAP_PROBES);
    if lo.x >= hi.x || lo.y >= hi.y {
        return out;
    }
    for _ in 0..OVERLAP_PROBES * 1000 {
        if out.len() == OVERLAP_PROBES {
            break;
        }
        let q = Point2::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y));
        if a.full.contains(q) && b.full.contains(q) {
            out.push(q);
        }
    }
    out
}

fn report(scene: &OverlapScene, params: &[IpcParams; 2], heldout: &[Vec<TrainingSample>; 2], seed: u64) -> Result<AwarenessReport, HarnessError> {
    let probes = overlap_probes(scene, seed);
    let (mut opposite, mut correct) = (0usize, 0usize);
    for q in &probes {
        let feature = scene.features.sample(*q);
        let out = |i: usize| -> Result<bool, HarnessError> {
            let c = crate::fields::relative_coords(*q, &scene.instances[i].bbox);
            Ok(crate::fields::ipc_forward(&params[i], &feature, c)? > 0.5)
        };
        let (a_out, b_out) = (out(0)?, out(1)?);
        opposite += usize::from(a_out != b_out);
        correct += usize::from(!a_out && b_out);
    }
    let n = probes.len().max(1) as f64;
    Ok(AwarenessReport {
        heldout_accuracy: [accuracy(&params[0], &heldout[0])?, accuracy(&params[1], &heldout[1])?],
        opposite_fraction: opposite as f64 / n,
        correct_fraction: correct as f64 / n,
        probes: probes.len(),
    })
}

/// Fits one classifier per instance and scores it.
pub fn instance_awareness(scene: &OverlapScene, cfg: &TrainConfig) -> Result<(AwarenessReport, [IpcParams; 2]), HarnessError> {
    let train = band_samples(scene, cfg, derive_seed(cfg.seed, 0, 10))?;
    let heldout = band_samples(scene, cfg, derive_seed(cfg.seed, 0, 11))?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0, 12));
    let mut fit = |i: usize| -> Result<IpcParams, HarnessError> {
        let p0 = IpcParams::random(scene.features.channels(), cfg.hidden, &mut rng);
        Ok(fit_instance(&p0, &train[i], cfg)?.0)
    };
    let params = [fit(0)?, fit(1)?];
    Ok((report(scene, &params, &heldout, derive_seed(cfg.seed, 0, 13))?, params))
}

/// Same as [`instance_awareness`] with both classifiers predicted by one
/// hypernetwork from box embeddings.
pub fn instance_awareness_hypernet(scene: &OverlapScene, cfg: &TrainConfig) -> Result<(AwarenessReport, Hypernetwork), HarnessError> {
    let train = band_samples(scene, cfg, derive_seed(cfg.seed, 0, 10))?;
    let heldout = band_samples(scene, cfg, derive_seed(cfg.seed, 0, 11))?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0, 12));
    let embeddings: Vec<Vec<f64>> = scene.instances.iter().map(|i| scene.features.box_embedding(&i.bbox)).collect();
    let h0 = Hypernetwork::random(embeddings[0].len(), Hypernetwork::DEFAULT_HIDDEN, scene.features.channels(), cfg.hidden, &mut rng);
    let batches: Vec<InstanceBatch> = embeddings.iter().zip(&train).map(|(e, s)| InstanceBatch { embedding: e.clone(), samples: s.clone() }).collect();
    let (h, _) = fit_hypernetwork(&h0, &batches, cfg)?;
    let params = [h.forward(&embeddings[0])?, h.forward(&embeddings[1])?];
    Ok((report(scene, &params, &heldout, derive_seed(cfg.seed, 0, 13))?, h))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scene_layout() {
        let s = overlap_scene(1, &SyntheticFeatureConfig::default()).unwrap();
        let [a, b] = &s.instances;
        assert!(b.visible.signed_area() < b.full.signed_area());
        assert!((a.visible.signed_area() - a.full.signed_area()).abs() < 1e-9);
        let levels: std::collections::BTreeSet<u64> = s.label.values().iter().map(|v| (v * 2.0) as u64).collect();
        assert_eq!(levels.into_iter().collect::<Vec<_>>(), vec![0, 1, 2]);
        assert!(!overlap_probes(&s, 3).is_empty());
    }
}
