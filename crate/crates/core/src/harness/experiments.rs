//! Corpus-level refinement runs and the corner-recovery comparison.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

use super::baselines::{reg_baseline_refine, train_regressor, RegModel, RegVariant};
use super::{derive_seed, perturb, CorpusItem, HarnessError, PerturbSpec};
use crate::evolution::{evolve_rings, EvolutionConfig, EvolutionTrace};
use crate::fields::{synthetic_features, AnalyticOracle, InstanceContext, InstanceField, IpcParams, SyntheticFeatureConfig};
use crate::geometry::Polygon;
use crate::metrics::{corner_error, evaluate, EvalInput, MetricsReport};
use crate::raster::rasterize;
use crate::training::{fit_instance, sample_boundary_points, TrainConfig};

/// Vertex count of the coarse contours before perturbation.
pub const INITIAL_VERTICES: usize = 128;

/// Coarse contour rings for `item`: each ground-truth ring resampled to
/// [`INITIAL_VERTICES`] and perturbed with a per-item, per-ring seed. Jitter
/// is scaled by each ring's own box.
pub fn initial_rings(item: &CorpusItem, index: usize, spec: &PerturbSpec) -> Result<Vec<Polygon>, HarnessError> {
    item.shape
        .region
        .rings()
        .iter()
        .enumerate()
        .map(|(r, ring)| {
            let spec = spec.with_seed(derive_seed(spec.seed, index, r as u64));
            perturb(&ring.resample(INITIAL_VERTICES)?, &spec)
        })
        .collect()
}

/// Result of refining one corpus item.
#[derive(Debug, Clone)]
pub struct RefineOutcome {
    pub name: String,
    pub kind: &'static str,
    pub initial: Vec<Polygon>,
    pub traces: Vec<EvolutionTrace>,
    pub report: MetricsReport,
    /// Sum of `|sd|` over all final vertices.
    pub vertex_error_sum: f64,
    pub vertex_count: usize,
    pub frozen: usize,
}

impl RefineOutcome {
    pub fn final_rings(&self) -> Vec<Polygon> {
        self.traces.iter().map(|t| t.final_contour().clone()).collect()
    }
}

/// Refines `initial` against the analytic oracle of `item` and scores it.
/// `tau == 0` uses the hard oracle.
pub fn refine_with_oracle(item: &CorpusItem, initial: &[Polygon], cfg: &EvolutionConfig, tau: f64) -> Result<RefineOutcome, HarnessError> {
    let gt = &item.shape.region;
    let oracle = if tau > 0.0 { AnalyticOracle::new(gt.clone(), tau) } else { AnalyticOracle::hard(gt.clone()) };
    let start = Instant::now();
    let traces = evolve_rings(initial, &oracle, cfg)?;
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    let finals: Vec<Polygon> = traces.iter().map(|t| t.final_contour().clone()).collect();
    let mut err = 0.0;
    let mut count = 0;
    for v in finals.iter().flat_map(|p| p.vertices()) {
        err += gt.signed_distance(*v).abs();
        count += 1;
    }
    let frozen: usize = traces.iter().map(EvolutionTrace::frozen_count).sum();
    let report = evaluate(EvalInput {
        pred: &finals,
        gt: gt.rings(),
        corners: &item.shape.corners,
        width: item.width,
        height: item.height,
        frozen_fraction: frozen as f64 / count.max(1) as f64,
        runtime_ms,
    })?;
    Ok(RefineOutcome {
        name: item.name.clone(),
        kind: item.kind(),
        initial: initial.to_vec(),
        traces,
        report,
        vertex_error_sum: err,
        vertex_count: count,
        frozen,
    })
}

/// Perturbs and refines every item. Results are in corpus order.
pub fn refine_corpus_with_oracle(corpus: &[CorpusItem], spec: &PerturbSpec, cfg: &EvolutionConfig, tau: f64) -> Result<Vec<RefineOutcome>, HarnessError> {
    cfg.validate()?;
    corpus
        .par_iter()
        .enumerate()
        .map(|(i, item)| {
            let init = initial_rings(item, i, spec)?;
            refine_with_oracle(item, &init, cfg, tau)
        })
        .collect()
}

/// Corpus aggregates of a set of outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    /// Mean `|sd|` over all final vertices of the corpus.
    pub mean_vertex_error: f64,
    /// Frozen vertices over all vertices.
    pub frozen_fraction: f64,
    /// Mean over shapes of the per-shape mean boundary distance.
    pub mean_distance: f64,
    pub mean_boundary_iou: f64,
    pub runtime_ms: f64,
}

pub fn summarize(outcomes: &[RefineOutcome]) -> CorpusSummary {
    let verts: usize = outcomes.iter().map(|o| o.vertex_count).sum();
    let n = outcomes.len().max(1) as f64;
    CorpusSummary {
        mean_vertex_error: outcomes.iter().map(|o| o.vertex_error_sum).sum::<f64>() / verts.max(1) as f64,
        frozen_fraction: outcomes.iter().map(|o| o.frozen).sum::<usize>() as f64 / verts.max(1) as f64,
        mean_distance: outcomes.iter().map(|o| o.report.mean_distance).sum::<f64>() / n,
        mean_boundary_iou: outcomes.iter().map(|o| o.report.boundary_iou).sum::<f64>() / n,
        runtime_ms: outcomes.iter().map(|o| o.report.runtime_ms).sum(),
    }
}

/// Settings of [`corner_experiment`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CornerExperimentConfig {
    pub train: TrainConfig,
    pub evolution: EvolutionConfig,
    pub features: SyntheticFeatureConfig,
    /// Applied to the resampled ground truth to make the coarse contour.
    pub perturb: PerturbSpec,
    pub seed: u64,
}

impl Default for CornerExperimentConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            evolution: EvolutionConfig::default(),
            features: SyntheticFeatureConfig::default(),
            perturb: PerturbSpec::smooth(5),
            seed: 0,
        }
    }
}

/// Corner error of one method on one shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CornerRow {
    pub shape: String,
    pub method: String,
    pub corner_error_mean: f64,
    pub corner_error_max: f64,
    pub mean_distance: f64,
}

/// Learned refinement vs the regression baselines on shapes with corners.
///
/// Per shape, features are synthesized from the rasterized ground truth and
/// one set of band samples trains three models with the same capacity and
/// optimizer budget: the point classifier (refined by evolution) and the
/// `Reg1`/`Reg2` regressors (applied once). The unrefined contour is
/// reported as method `initial`.
pub fn corner_experiment(items: &[CorpusItem], cfg: &CornerExperimentConfig) -> Result<Vec<CornerRow>, HarnessError> {
    let per_shape: Vec<Vec<CornerRow>> = items
        .par_iter()
        .enumerate()
        .map(|(i, item)| corner_rows(item, i, cfg))
        .collect::<Result<_, _>>()?;
    Ok(per_shape.into_iter().flatten().collect())
}

fn corner_rows(item: &CorpusItem, index: usize, cfg: &CornerExperimentConfig) -> Result<Vec<CornerRow>, HarnessError> {
    let gt = &item.shape.region;
    let corners = &item.shape.corners;
    let bbox = gt.bbox();
    let seed = derive_seed(cfg.seed, index, 0);
    let grid = synthetic_features(&rasterize(gt.rings(), item.width, item.height), &cfg.features, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = sample_boundary_points(gt, &grid, &bbox, &cfg.train, index, &mut rng)?;
    let train = TrainConfig { seed, ..cfg.train.clone() };

    let init = initial_rings(item, index, &cfg.perturb)?;
    let mut rows = Vec::new();
    let mut push = |method: &str, rings: &[Polygon]| -> Result<(), HarnessError> {
        let c = corner_error(rings, corners)?;
        let d = crate::metrics::boundary_distance_stats(rings, gt.rings())?;
        rows.push(CornerRow { shape: item.name.clone(), method: method.to_string(), corner_error_mean: c.mean, corner_error_max: c.max, mean_distance: d.mean });
        Ok(())
    };
    push("initial", &init)?;

    let p0 = IpcParams::random(grid.channels(), train.hidden, &mut rng);
    let (params, _) = fit_instance(&p0, &samples, &train)?;
    let ctx = InstanceContext::new(bbox, params)?;
    let field = InstanceField::new(&grid, &ctx)?;
    let traces = evolve_rings(&init, &field, &cfg.evolution)?;
    let refined: Vec<Polygon> = traces.iter().map(|t| t.final_contour().clone()).collect();
    push("sharpcontour", &refined)?;

    for variant in [RegVariant::Reg1, RegVariant::Reg2] {
        let (model, _) = train_regressor(variant, gt, &samples, &bbox, &train)?;
        let model = RegModel::Trained(model);
        let rings = init
            .iter()
            .map(|c| reg_baseline_refine(variant, c, &grid, &bbox, &model, &cfg.evolution, bbox.area()))
            .collect::<Result<Vec<_>, _>>()?;
        push(variant.name(), &rings)?;
    }
    Ok(rows)
}
