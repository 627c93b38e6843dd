//! Discrete contour evolution.
//!
//! Every vertex of the contour marches along its normal in fixed steps and
//! stops at the first probe where the field's inside/outside decision
//! reverses (the flipping point), or after `max_steps` probes. The step size
//! is `lambda * sqrt(A) * |phi(x) - 0.5|`, computed once per vertex per
//! iteration from the field value at the iteration-start position. Vertices
//! that reach a flipping point are frozen and never move again.
//!
//! Within one pass all normals come from the input contour and each vertex
//! only writes its own output slot, so the result does not depend on the
//! order in which vertices are processed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::ProbabilityField;
use crate::geometry::{GeometryError, Point2, Polygon};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvolutionError {
    #[error("invalid evolution config: {0}")]
    InvalidConfig(String),
    #[error("bounding-box area must be positive, got {0}")]
    NonPositiveArea(f64),
    #[error("probability {0} is outside [0, 1]")]
    BadProbability(f64),
    #[error("non-finite normal at vertex {0}")]
    NonFiniteNormal(usize),
    #[error("contour has {contour} vertices but {statuses} statuses")]
    StatusMismatch { contour: usize, statuses: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionConfig {
    /// Deformation ratio scaling the step by `sqrt(A)`.
    pub lambda: f64,
    /// Probe budget per vertex per iteration.
    pub max_steps: usize,
    /// Number of contour vertices after resampling.
    pub resolution: usize,
    pub iterations: usize,
    /// Scale the step by the classifier's uncertainty. When off the factor
    /// `|phi - 0.5|` is replaced by the constant 0.5.
    pub adaptive_step: bool,
    /// Vertices whose step is below this (px) freeze in place.
    pub freeze_epsilon: f64,
    /// Place flipped vertices halfway between the last two probes instead of
    /// at the flipped probe.
    pub midpoint_refine: bool,
    pub seed: u64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            lambda: 0.003,
            max_steps: 10,
            resolution: 128,
            iterations: 3,
            adaptive_step: true,
            freeze_epsilon: 1e-4,
            midpoint_refine: false,
            seed: 0,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<(), EvolutionError> {
        let bad = |m: &str| Err(EvolutionError::InvalidConfig(m.to_string()));
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be > 0");
        }
        if self.max_steps < 1 {
            return bad("max_steps must be >= 1");
        }
        if self.resolution < 3 {
            return bad("resolution must be >= 3");
        }
        if self.iterations < 1 {
            return bad("iterations must be >= 1");
        }
        if !(self.freeze_epsilon >= 0.0 && self.freeze_epsilon.is_finite()) {
            return bad("freeze_epsilon must be >= 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VertexState {
    Active,
    /// Used the whole probe budget without finding a flipping point.
    Exhausted,
    /// Reached a flipping point (or had nothing to do); never moves again.
    Frozen,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VertexStatus {
    pub state: VertexState,
    pub steps_taken: usize,
    pub step_size: f64,
}

impl VertexStatus {
    pub const ACTIVE: VertexStatus = VertexStatus { state: VertexState::Active, steps_taken: 0, step_size: 0.0 };

    fn frozen(steps: usize, s: f64) -> Self {
        Self { state: VertexState::Frozen, steps_taken: steps, step_size: s }
    }

    pub fn is_frozen(&self) -> bool {
        self.state == VertexState::Frozen
    }
}

/// The sequence of contours produced by [`evolve`], starting with the
/// resampled input.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionTrace {
    pub contours: Vec<Polygon>,
    /// `statuses[k]` holds the per-vertex status after iteration `k + 1`.
    pub statuses: Vec<Vec<VertexStatus>>,
    /// Area used for the step scale.
    pub area: f64,
    /// Iterations actually computed; later entries repeat the last contour.
    pub iterations_run: usize,
}

impl EvolutionTrace {
    pub fn initial(&self) -> &Polygon {
        &self.contours[0]
    }

    pub fn final_contour(&self) -> &Polygon {
        self.contours.last().expect("trace holds the initial contour")
    }

    pub fn final_statuses(&self) -> &[VertexStatus] {
        self.statuses.last().map_or(&[], Vec::as_slice)
    }

    pub fn frozen_count(&self) -> usize {
        self.final_statuses().iter().filter(|s| s.is_frozen()).count()
    }

    pub fn frozen_fraction(&self) -> f64 {
        let n = self.final_statuses().len();
        if n == 0 {
            0.0
        } else {
            self.frozen_count() as f64 / n as f64
        }
    }
}

/// Step length for a vertex with field value `p`.
pub fn step_size(area: f64, p: f64, cfg: &EvolutionConfig) -> Result<f64, EvolutionError> {
    if !(area > 0.0) {
        return Err(EvolutionError::NonPositiveArea(area));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(EvolutionError::BadProbability(p));
    }
    let uncertainty = if cfg.adaptive_step { (p - 0.5).abs() } else { 0.5 };
    Ok(cfg.lambda * area.sqrt() * uncertainty)
}

fn side(p: f64) -> i8 {
    if p > 0.5 {
        1
    } else if p < 0.5 {
        -1
    } else {
        0
    }
}

/// Marches one vertex from `x` and returns its new position and status.
///
/// Outside vertices (field above 0.5) move along `-normal`, inside vertices
/// along `+normal`. Probes `x + k * s * d` for `k = 1..=max_steps` are taken
/// in order; the first whose side is strictly opposite to the start flips.
/// A probe landing exactly on 0.5 is not a flip.
pub fn march_vertex<F: ProbabilityField + ?Sized>(
    field: &F,
    x: Point2,
    normal: Point2,
    s: f64,
    cfg: &EvolutionConfig,
) -> Result<(Point2, VertexStatus), EvolutionError> {
    if !normal.is_finite() {
        return Err(EvolutionError::NonFiniteNormal(0));
    }
    Ok(march_from(field, x, field.evaluate(x), normal, s, cfg))
}

fn march_from<F: ProbabilityField + ?Sized>(
    field: &F,
    x: Point2,
    phi0: f64,
    normal: Point2,
    s: f64,
    cfg: &EvolutionConfig,
) -> (Point2, VertexStatus) {
    let start = side(phi0);
    if start == 0 || s < cfg.freeze_epsilon {
        return (x, VertexStatus::frozen(0, s));
    }
    let dir = if start > 0 { -normal } else { normal };
    let mut prev = x;
    for k in 1..=cfg.max_steps {
        let probe = x + dir * (k as f64 * s);
        if side(field.evaluate(probe)) == -start {
            let placed = if cfg.midpoint_refine { prev.lerp(probe, 0.5) } else { probe };
            return (placed, VertexStatus::frozen(k, s));
        }
        prev = probe;
    }
    (prev, VertexStatus { state: VertexState::Exhausted, steps_taken: cfg.max_steps, step_size: s })
}

/// Evolution of vertex `i` given precomputed input normals.
fn evolve_vertex<F: ProbabilityField + ?Sized>(
    i: usize,
    contour: &Polygon,
    normals: &[Point2],
    field: &F,
    area: f64,
    cfg: &EvolutionConfig,
    status: VertexStatus,
) -> Result<(Point2, VertexStatus), EvolutionError> {
    let x = contour.vertices()[i];
    if status.is_frozen() {
        return Ok((x, status));
    }
    let n = normals[i];
    if !n.is_finite() {
        return Err(EvolutionError::NonFiniteNormal(i));
    }
    let phi = field.evaluate(x);
    let s = step_size(area, phi, cfg)?;
    Ok(march_from(field, x, phi, n, s, cfg))
}

fn input_normals(contour: &Polygon) -> Result<Vec<Point2>, EvolutionError> {
    (0..contour.len()).map(|i| contour.vertex_normal(i).map_err(EvolutionError::from)).collect()
}

/// One evolution pass over every non-frozen vertex.
pub fn evolve_once<F: ProbabilityField + ?Sized>(
    contour: &Polygon,
    field: &F,
    area: f64,
    cfg: &EvolutionConfig,
    statuses: &[VertexStatus],
) -> Result<(Polygon, Vec<VertexStatus>), EvolutionError> {
    if statuses.len() != contour.len() {
        return Err(EvolutionError::StatusMismatch { contour: contour.len(), statuses: statuses.len() });
    }
    if !(area > 0.0) {
        return Err(EvolutionError::NonPositiveArea(area));
    }
    if statuses.iter().all(VertexStatus::is_frozen) {
        return Ok((contour.clone(), statuses.to_vec()));
    }
    let normals = input_normals(contour)?;
    let mut positions = Vec::with_capacity(contour.len());
    let mut next = Vec::with_capacity(contour.len());
    for (i, &st) in statuses.iter().enumerate() {
        let (p, s) = evolve_vertex(i, contour, &normals, field, area, cfg, st)?;
        positions.push(p);
        next.push(s);
    }
    Ok((Polygon::from_evolved(positions, contour.orientation()), next))
}

/// Resamples `c0` to `cfg.resolution` vertices and runs `cfg.iterations`
/// passes with `A` fixed to the resampled contour's bounding-box area.
pub fn evolve<F: ProbabilityField + ?Sized>(
    c0: &Polygon,
    field: &F,
    cfg: &EvolutionConfig,
) -> Result<EvolutionTrace, EvolutionError> {
    cfg.validate()?;
    let start = c0.resample(cfg.resolution)?;
    let area = start.bbox().area();
    evolve_resampled(start, field, area, cfg)
}

/// Like [`evolve`] with an externally supplied step-scale area, e.g. the
/// instance box shared by an outer ring and its holes.
pub fn evolve_with_area<F: ProbabilityField + ?Sized>(
    c0: &Polygon,
    field: &F,
    area: f64,
    cfg: &EvolutionConfig,
) -> Result<EvolutionTrace, EvolutionError> {
    cfg.validate()?;
    let start = c0.resample(cfg.resolution)?;
    evolve_resampled(start, field, area, cfg)
}

fn evolve_resampled<F: ProbabilityField + ?Sized>(
    start: Polygon,
    field: &F,
    area: f64,
    cfg: &EvolutionConfig,
) -> Result<EvolutionTrace, EvolutionError> {
    if !(area > 0.0) {
        return Err(EvolutionError::NonPositiveArea(area));
    }
    let mut statuses = vec![VertexStatus::ACTIVE; start.len()];
    let mut trace = EvolutionTrace { contours: vec![start], statuses: Vec::new(), area, iterations_run: 0 };
    for _ in 0..cfg.iterations {
        let current = trace.final_contour().clone();
        if statuses.iter().all(VertexStatus::is_frozen) {
            trace.contours.push(current);
            trace.statuses.push(statuses.clone());
            continue;
        }
        let (next, st) = evolve_once(&current, field, area, cfg, &statuses)?;
        trace.iterations_run += 1;
        statuses = st;
        trace.contours.push(next);
        trace.statuses.push(statuses.clone());
    }
    Ok(trace)
}

/// Evolves every ring of an instance with the outer ring's (resampled)
/// bounding-box area as the common step scale.
pub fn evolve_rings<F: ProbabilityField + ?Sized>(
    rings: &[Polygon],
    field: &F,
    cfg: &EvolutionConfig,
) -> Result<Vec<EvolutionTrace>, EvolutionError> {
    cfg.validate()?;
    let Some(outer) = rings.first() else { return Ok(Vec::new()) };
    let area = outer.resample(cfg.resolution)?.bbox().area();
    rings.iter().map(|r| evolve_with_area(r, field, area, cfg)).collect()
}
