//! Coarse-contour simulation: jitter, over-smoothing and offsets.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::geometry::{Point2, Polygon};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PerturbOp {
    /// Move every vertex along its normal by `N(0, (sigma * sqrt(A))^2)`.
    VertexJitter { sigma: f64 },
    /// `passes` rounds of `0.25 v[i-1] + 0.5 v[i] + 0.25 v[i+1]`.
    LaplacianSmooth { passes: usize },
    /// Move every vertex along its normal by `offset` px.
    UniformOffset { offset: f64 },
}

/// Operations applied in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct PerturbSpec {
    pub ops: Vec<PerturbOp>,
    pub seed: u64,
}

impl PerturbSpec {
    pub fn identity() -> Self {
        Self::default()
    }

    /// Three smoothing passes followed by jitter with sigma `0.02 sqrt(A)`.
    pub fn standard(seed: u64) -> Self {
        Self { ops: vec![PerturbOp::LaplacianSmooth { passes: 3 }, PerturbOp::VertexJitter { sigma: 0.02 }], seed }
    }

    pub fn smooth(passes: usize) -> Self {
        Self { ops: vec![PerturbOp::LaplacianSmooth { passes }], seed: 0 }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        for op in &self.ops {
            match *op {
                PerturbOp::VertexJitter { sigma } if !(sigma >= 0.0 && sigma.is_finite()) => {
                    return Err(HarnessError::InvalidPerturb("sigma must be >= 0".into()));
                }
                PerturbOp::UniformOffset { offset } if !offset.is_finite() => {
                    return Err(HarnessError::InvalidPerturb("offset must be finite".into()));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

fn normals(p: &Polygon) -> Result<Vec<Point2>, HarnessError> {
    (0..p.len()).map(|i| p.vertex_normal(i).map_err(HarnessError::from)).collect()
}

/// Applies `spec` with `A` taken from `p`'s own bounding box.
pub fn perturb(p: &Polygon, spec: &PerturbSpec) -> Result<Polygon, HarnessError> {
    perturb_with_area(p, spec, p.bbox().area())
}

/// Applies `spec` with an explicit jitter scale area, e.g. the instance box
/// for hole rings.
pub fn perturb_with_area(p: &Polygon, spec: &PerturbSpec, area: f64) -> Result<Polygon, HarnessError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut cur = p.clone();
    for op in &spec.ops {
        let v = cur.vertices();
        let n = v.len();
        let next: Vec<Point2> = match *op {
            PerturbOp::VertexJitter { sigma } => {
                if sigma == 0.0 {
                    continue;
                }
                let dist = Normal::new(0.0, sigma * area.sqrt()).map_err(|e| HarnessError::InvalidPerturb(e.to_string()))?;
                let ns = normals(&cur)?;
                v.iter().zip(&ns).map(|(p, nrm)| *p + *nrm * dist.sample(&mut rng)).collect()
            }
            PerturbOp::LaplacianSmooth { passes } => {
                let mut w = v.to_vec();
                for _ in 0..passes {
                    w = (0..n).map(|i| w[(i + n - 1) % n] * 0.25 + w[i] * 0.5 + w[(i + 1) % n] * 0.25).collect();
                }
                w
            }
            PerturbOp::UniformOffset { offset } => {
                let ns = normals(&cur)?;
                v.iter().zip(&ns).map(|(p, nrm)| *p + *nrm * offset).collect()
            }
        };
        cur = Polygon::new(next)?;
    }
    Ok(cur)
}
