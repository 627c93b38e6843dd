//! Synthetic experiments: shapes, coarse-contour perturbation, regression
//! baselines, the instance-awareness scene and parameter sweeps.

mod baselines;
mod experiments;
mod perturb;
mod scene;
mod shapes;
mod sweep;

pub use baselines::{reg_baseline_refine, regression_samples, train_regressor, RegModel, RegVariant};
pub use experiments::{
    corner_experiment, initial_rings, refine_corpus_with_oracle, refine_with_oracle, summarize, CornerExperimentConfig, CornerRow,
    CorpusSummary, RefineOutcome, INITIAL_VERTICES,
};
pub use perturb::{perturb, perturb_with_area, PerturbOp, PerturbSpec};
pub use scene::{instance_awareness, instance_awareness_hypernet, overlap_scene, AwarenessReport, OverlapScene, SceneInstance};
pub use shapes::{gen_shape, standard_corpus, star_subset, CorpusItem, ShapeKind, ShapeSpec, SyntheticShape, MIN_SHAPE_VERTICES, STANDARD_SEED};
pub use sweep::{config_hash, rows_to_csv, run_sweep, timings_to_csv, SweepConfig, SweepReport, SweepRow, TimingRow};

use thiserror::Error;

use crate::evolution::EvolutionError;
use crate::geometry::GeometryError;
use crate::metrics::MetricsError;
use crate::nn::NetworkError;
use crate::raster::RasterError;
use crate::training::TrainingError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid shape spec: {0}")]
    InvalidShape(String),
    #[error("shape still self-intersects after {0} reseeds")]
    SelfIntersecting(u64),
    #[error("invalid perturbation: {0}")]
    InvalidPerturb(String),
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error("shape {shape}, config {config}: {message}")]
    Cell { shape: String, config: String, message: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
    #[error(transparent)]
    Training(#[from] TrainingError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

impl From<HarnessError> for crate::Error {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Evolution(e) => e.into(),
            HarnessError::Training(e) => e.into(),
            HarnessError::InvalidSweep(m) | HarnessError::InvalidPerturb(m) | HarnessError::InvalidShape(m) => crate::Error::Config(m),
            other => crate::Error::Runtime(other.to_string()),
        }
    }
}

/// Per-item seed derived from a master seed.
pub(crate) fn derive_seed(master: u64, index: usize, salt: u64) -> u64 {
    let mut z = master ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
