//! Cartesian parameter sweeps over a corpus with the analytic oracle.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::time::Instant;

use super::experiments::{initial_rings, refine_with_oracle, summarize, CorpusSummary, RefineOutcome};
use super::{standard_corpus, star_subset, CorpusItem, HarnessError, PerturbSpec, STANDARD_SEED};
use crate::evolution::EvolutionConfig;
use crate::geometry::Polygon;

/// A sweep: a base configuration plus value lists for the swept axes.
/// Empty lists keep the base value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// `standard` (50 shapes) or `stars` (the 15 stars).
    pub suite: String,
    pub corpus_seed: u64,
    pub base: EvolutionConfig,
    pub perturb: PerturbSpec,
    /// Oracle sharpness in px; 0 is the hard indicator.
    pub oracle_tau: f64,
    pub lambda: Vec<f64>,
    pub max_steps: Vec<usize>,
    pub resolution: Vec<usize>,
    pub iterations: Vec<usize>,
    pub adaptive_step: Vec<bool>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            suite: "standard".into(),
            corpus_seed: STANDARD_SEED,
            base: EvolutionConfig::default(),
            perturb: PerturbSpec::standard(STANDARD_SEED),
            oracle_tau: 0.0,
            lambda: Vec::new(),
            max_steps: Vec::new(),
            resolution: Vec::new(),
            iterations: Vec::new(),
            adaptive_step: Vec::new(),
        }
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, values: &str) -> Result<Vec<T>, HarnessError> {
    values
        .split(',')
        .map(|v| v.trim().parse().map_err(|_| HarnessError::InvalidSweep(format!("bad value {v:?} for {key}"))))
        .collect()
}

impl SweepConfig {
    /// Sets one axis from `key=v1,v2,...`.
    pub fn set_axis(&mut self, arg: &str) -> Result<(), HarnessError> {
        let (key, values) = arg.split_once('=').ok_or_else(|| HarnessError::InvalidSweep(format!("expected key=v1,v2,... got {arg:?}")))?;
        match key.trim() {
            "lambda" => self.lambda = parse_list(key, values)?,
            "max_steps" | "M" => self.max_steps = parse_list(key, values)?,
            "resolution" | "N" => self.resolution = parse_list(key, values)?,
            "iterations" | "n" => self.iterations = parse_list(key, values)?,
            "adaptive_step" => self.adaptive_step = parse_list(key, values)?,
            other => return Err(HarnessError::InvalidSweep(format!("unknown sweep axis {other:?}"))),
        }
        Ok(())
    }

    pub fn corpus(&self) -> Result<Vec<CorpusItem>, HarnessError> {
        let all = standard_corpus(self.corpus_seed)?;
        match self.suite.as_str() {
            "standard" => Ok(all),
            "stars" => Ok(star_subset(&all)),
            other => Err(HarnessError::InvalidSweep(format!("unknown suite {other:?}"))),
        }
    }

    /// Every combination, axes varying slowest to fastest in the order
    /// lambda, max_steps, resolution, iterations, adaptive_step.
    pub fn configs(&self) -> Result<Vec<EvolutionConfig>, HarnessError> {
        fn or<T: Clone>(v: &[T], base: T) -> Vec<T> {
            if v.is_empty() {
                vec![base]
            } else {
                v.to_vec()
            }
        }
        if !(self.oracle_tau >= 0.0 && self.oracle_tau.is_finite()) {
            return Err(HarnessError::InvalidSweep("oracle_tau must be >= 0".into()));
        }
        self.perturb.validate()?;
        let b = &self.base;
        let mut out = Vec::new();
        for &lambda in &or(&self.lambda, b.lambda) {
            for &max_steps in &or(&self.max_steps, b.max_steps) {
                for &resolution in &or(&self.resolution, b.resolution) {
                    for &iterations in &or(&self.iterations, b.iterations) {
                        for &adaptive_step in &or(&self.adaptive_step, b.adaptive_step) {
                            let c = EvolutionConfig { lambda, max_steps, resolution, iterations, adaptive_step, ..b.clone() };
                            c.validate()?;
                            out.push(c);
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Serialize)]
struct HashedCell<'a> {
    evolution: &'a EvolutionConfig,
    perturb: &'a PerturbSpec,
    oracle_tau: f64,
}

/// First 16 hex digits of the SHA-256 of the cell's canonical JSON.
pub fn config_hash(evolution: &EvolutionConfig, perturb: &PerturbSpec, oracle_tau: f64) -> String {
    let json = serde_json::to_vec(&HashedCell { evolution, perturb, oracle_tau }).expect("plain data serializes");
    hex::encode(Sha256::digest(&json))[..16].to_string()
}

/// Metrics of one (shape, config) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub shape: String,
    pub kind: String,
    pub method: String,
    pub config_hash: String,
    pub lambda: f64,
    pub max_steps: usize,
    pub resolution: usize,
    pub iterations: usize,
    pub adaptive_step: bool,
    pub oracle_tau: f64,
    pub mask_iou: f64,
    pub boundary_iou: f64,
    pub mean_distance: f64,
    pub median_distance: f64,
    pub max_distance: f64,
    pub hausdorff: f64,
    pub corner_error_mean: Option<f64>,
    pub corner_error_max: Option<f64>,
    pub vertex_error: f64,
    pub frozen_fraction: f64,
    pub self_intersections: usize,
}

/// Wall-clock time of one config over the whole corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub config_hash: String,
    pub lambda: f64,
    pub max_steps: usize,
    pub resolution: usize,
    pub iterations: usize,
    pub adaptive_step: bool,
    pub shapes: usize,
    pub runtime_ms: f64,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub configs: Vec<EvolutionConfig>,
    /// Per-config summaries, aligned with `configs`.
    pub summaries: Vec<CorpusSummary>,
    /// Config-major, shapes in corpus order.
    pub rows: Vec<SweepRow>,
    pub timings: Vec<TimingRow>,
}

impl SweepReport {
    pub fn summary_for(&self, pred: impl Fn(&EvolutionConfig) -> bool) -> Option<CorpusSummary> {
        self.configs.iter().position(pred).map(|i| self.summaries[i])
    }
}

fn row(o: &RefineOutcome, cfg: &EvolutionConfig, hash: &str, tau: f64) -> SweepRow {
    let r = &o.report;
    SweepRow {
        shape: o.name.clone(),
        kind: o.kind.to_string(),
        method: "sharpcontour".into(),
        config_hash: hash.to_string(),
        lambda: cfg.lambda,
        max_steps: cfg.max_steps,
        resolution: cfg.resolution,
        iterations: cfg.iterations,
        adaptive_step: cfg.adaptive_step,
        oracle_tau: tau,
        mask_iou: r.mask_iou,
        boundary_iou: r.boundary_iou,
        mean_distance: r.mean_distance,
        median_distance: r.median_distance,
        max_distance: r.max_distance,
        hausdorff: r.hausdorff,
        corner_error_mean: r.corner_error_mean,
        corner_error_max: r.corner_error_max,
        vertex_error: o.vertex_error_sum / o.vertex_count.max(1) as f64,
        frozen_fraction: r.frozen_fraction,
        self_intersections: r.self_intersections,
    }
}

/// Runs every config over `corpus`. Shapes run in parallel; rows come out
/// in a fixed order. A failing cell aborts the sweep and names the shape
/// and config.
pub fn run_sweep(corpus: &[CorpusItem], sweep: &SweepConfig) -> Result<SweepReport, HarnessError> {
    let configs = sweep.configs()?;
    let initial: Vec<Vec<Polygon>> = corpus
        .iter()
        .enumerate()
        .map(|(i, item)| initial_rings(item, i, &sweep.perturb))
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::with_capacity(configs.len() * corpus.len());
    let mut timings = Vec::with_capacity(configs.len());
    let mut summaries = Vec::with_capacity(configs.len());
    for cfg in &configs {
        let hash = config_hash(cfg, &sweep.perturb, sweep.oracle_tau);
        let start = Instant::now();
        let outcomes: Vec<RefineOutcome> = corpus
            .par_iter()
            .zip(&initial)
            .map(|(item, init)| {
                refine_with_oracle(item, init, cfg, sweep.oracle_tau).map_err(|e| HarnessError::Cell {
                    shape: item.name.clone(),
                    config: hash.clone(),
                    message: e.to_string(),
                })
            })
            .collect::<Result<_, _>>()?;
        let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
        rows.extend(outcomes.iter().map(|o| row(o, cfg, &hash, sweep.oracle_tau)));
        summaries.push(summarize(&outcomes));
        timings.push(TimingRow {
            config_hash: hash,
            lambda: cfg.lambda,
            max_steps: cfg.max_steps,
            resolution: cfg.resolution,
            iterations: cfg.iterations,
            adaptive_step: cfg.adaptive_step,
            shapes: corpus.len(),
            runtime_ms,
        });
    }
    Ok(SweepReport { configs, summaries, rows, timings })
}

fn to_csv<T: Serialize>(rows: &[T]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory csv write");
    }
    w.into_inner().expect("in-memory csv flush")
}

pub fn rows_to_csv(rows: &[SweepRow]) -> Vec<u8> {
    to_csv(rows)
}

pub fn timings_to_csv(rows: &[TimingRow]) -> Vec<u8> {
    to_csv(rows)
}
