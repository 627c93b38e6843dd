//! Regression-based refinement baselines.
//!
//! `Reg1` predicts the vertex-to-boundary offset directly; `Reg2` predicts a
//! signed distance along the vertex normal, clamped to the same travel range
//! as one evolution iteration. Both are applied once per vertex.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::evolution::EvolutionConfig;
use crate::fields::{relative_coords, FeatureGrid, IpcParams};
use crate::geometry::{BBox, Point2, Polygon, Region};
use crate::training::{fit_regressor, RegressionSample, Regressor, TrainConfig, TrainingLog, TrainingSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegVariant {
    /// 2-D offset to the closest ground-truth point.
    Reg1,
    /// Scalar move along the outward normal, `-sd(q)`.
    Reg2,
}

impl RegVariant {
    pub fn name(self) -> &'static str {
        match self {
            RegVariant::Reg1 => "reg1",
            RegVariant::Reg2 => "reg2",
        }
    }

    fn output_dim(self) -> usize {
        match self {
            RegVariant::Reg1 => 2,
            RegVariant::Reg2 => 1,
        }
    }

    fn target(self, gt: &Region, q: Point2) -> Vec<f64> {
        match self {
            RegVariant::Reg1 => {
                let d = gt.closest_boundary_point(q) - q;
                vec![d.x, d.y]
            }
            RegVariant::Reg2 => vec![-gt.signed_distance(q)],
        }
    }
}

/// Where the regression targets come from.
#[derive(Debug, Clone)]
pub enum RegModel {
    Trained(Regressor),
    /// Exact targets from the ground truth, the best a regressor could do.
    Oracle(Region),
}

/// Turns band samples into regression examples for `variant`.
pub fn regression_samples(variant: RegVariant, gt: &Region, samples: &[TrainingSample]) -> Vec<RegressionSample> {
    samples.iter().map(|s| RegressionSample { input: s.input(), target: variant.target(gt, s.point) }).collect()
}

/// Trains a regressor with the classifier's capacity on the same band
/// samples and optimizer budget.
pub fn train_regressor(
    variant: RegVariant,
    gt: &Region,
    samples: &[TrainingSample],
    bbox: &BBox,
    cfg: &TrainConfig,
) -> Result<(Regressor, TrainingLog), HarnessError> {
    let Some(first) = samples.first() else {
        return Err(crate::training::TrainingError::EmptyBatch.into());
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let model = Regressor::new(first.input().len(), variant.output_dim(), cfg.hidden, cfg.band_for(bbox), &mut rng);
    Ok(fit_regressor(&model, &regression_samples(variant, gt, samples), cfg)?)
}

/// One-shot regression refinement of `contour`.
///
/// `area` is the instance scale used for the `Reg2` clamp
/// `0.5 * lambda * sqrt(A) * max_steps`.
pub fn reg_baseline_refine(
    variant: RegVariant,
    contour: &Polygon,
    grid: &FeatureGrid,
    bbox: &BBox,
    model: &RegModel,
    cfg: &EvolutionConfig,
    area: f64,
) -> Result<Polygon, HarnessError> {
    let limit = 0.5 * cfg.lambda * area.sqrt() * cfg.max_steps as f64;
    let mut out = Vec::with_capacity(contour.len());
    for (i, &v) in contour.vertices().iter().enumerate() {
        let pred = match model {
            RegModel::Trained(r) => r.predict(&IpcParams::input(&grid.sample(v), relative_coords(v, bbox)))?,
            RegModel::Oracle(gt) => variant.target(gt, v),
        };
        let moved = match variant {
            RegVariant::Reg1 => v + Point2::new(pred[0], pred[1]),
            RegVariant::Reg2 => v + contour.vertex_normal(i)? * pred[0].clamp(-limit, limit),
        };
        out.push(moved);
    }
    Ok(Polygon::new(out)?)
}
