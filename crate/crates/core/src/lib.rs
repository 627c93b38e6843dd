//! Contour refinement by discrete per-vertex evolution.
//!
//! A coarse instance contour is resampled to a fixed number of vertices and
//! each vertex marches along its normal until a point classifier changes
//! its inside/outside decision. The classifier is a small MLP whose weights
//! are specific to one instance, fed with interpolated features and
//! coordinates relative to the instance box.
//!
//! Modules, bottom up:
//!
//! - [`geometry`]: polygons, normals, resampling, signed distance.
//! - [`fields`]: probability fields (analytic oracle, raster, classifier).
//! - [`evolution`]: the marching step and the iterative evolution.
//! - [`training`]: band sampling, focal loss, per-instance fitting, the
//!   hypernetwork and the regression baselines' fitting.
//! - [`raster`]: masks, PGM files, contour extraction, rasterization.
//! - [`metrics`]: mask and boundary IoU, distance and corner statistics.
//! - [`harness`]: synthetic shapes, perturbations, baselines, sweeps.
//! - [`cli`]: the `sharpcontour` command line.
//!
//! The `examples/` directory holds one runnable program per capability.

pub mod cli;
pub mod evolution;
pub mod fields;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod metrics;
pub mod nn;
pub mod raster;
pub mod training;

pub use evolution::{evolve, evolve_once, march_vertex, step_size, EvolutionConfig, EvolutionTrace, VertexState, VertexStatus};
pub use fields::{AnalyticOracle, GridField, InstanceContext, InstanceField, IpcParams, ProbabilityField};
pub use geometry::{BBox, Orientation, Point2, Polygon, Region};
pub use raster::MaskGrid;

use thiserror::Error;

/// Errors surfaced at the crate boundary, grouped by exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl Error {
    /// 2 for parse errors, 3 for invalid configuration, 4 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) => 2,
            Error::Config(_) => 3,
            Error::Io { .. } | Error::Runtime(_) => 4,
        }
    }
}

impl From<evolution::EvolutionError> for Error {
    fn from(e: evolution::EvolutionError) -> Self {
        match e {
            evolution::EvolutionError::InvalidConfig(m) => Error::Config(m),
            other => Error::Runtime(other.to_string()),
        }
    }
}

impl From<training::TrainingError> for Error {
    fn from(e: training::TrainingError) -> Self {
        match e {
            training::TrainingError::InvalidConfig(m) => Error::Config(m),
            other => Error::Runtime(other.to_string()),
        }
    }
}

impl From<raster::PgmError> for Error {
    fn from(e: raster::PgmError) -> Self {
        match e {
            raster::PgmError::Io(e) => Error::Io { path: String::new(), source: e },
            other => Error::Parse(other.to_string()),
        }
    }
}

macro_rules! runtime_from {
    ($($t:ty),*) => {$(
        impl From<$t> for Error {
            fn from(e: $t) -> Self {
                Error::Runtime(e.to_string())
            }
        }
    )*};
}

runtime_from!(geometry::GeometryError, nn::NetworkError, raster::RasterError, metrics::MetricsError, fields::FeatureGridError);

pub type Result<T, E = Error> = std::result::Result<T, E>;
