//! Instance-aware point classifier.
//!
//! The classifier input for a point is its interpolated feature vector
//! concatenated with its coordinates relative to the instance box, where the
//! box corners map to (0, 0) and (1, 1). Coordinates are not clipped, so
//! points outside the box get values outside `[0, 1]`.

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{FeatureGrid, ProbabilityField};
use crate::geometry::{BBox, Point2};
use crate::nn::{Dense, Head, Mlp, NetworkError};

/// Hidden width of each of the three hidden layers.
pub const DEFAULT_HIDDEN: usize = 16;

/// Per-instance classifier weights: `[F + 2] -> H -> H -> H -> 1`, ReLU
/// hidden activations and a sigmoid head.
#[derive(Debug, Clone, PartialEq)]
pub struct IpcParams(Mlp);

impl IpcParams {
    pub fn zeros(feature_dim: usize, hidden: usize) -> Self {
        Self(Mlp::zeros(&Self::dims_for(feature_dim, hidden), Head::Sigmoid))
    }

    pub fn random<R: Rng + ?Sized>(feature_dim: usize, hidden: usize, rng: &mut R) -> Self {
        Self(Mlp::random(&Self::dims_for(feature_dim, hidden), Head::Sigmoid, rng))
    }

    pub fn dims_for(feature_dim: usize, hidden: usize) -> [usize; 5] {
        [feature_dim + 2, hidden, hidden, hidden, 1]
    }

    /// Wraps a network; it must have a sigmoid head, a single output and at
    /// least two inputs.
    pub fn from_network(net: Mlp) -> Result<Self, NetworkError> {
        if net.head() != Head::Sigmoid {
            return Err(NetworkError::Shape("classifier needs a sigmoid head".into()));
        }
        if net.output_dim() != 1 {
            return Err(NetworkError::Shape(format!("classifier must have one output, has {}", net.output_dim())));
        }
        if net.input_dim() < 2 {
            return Err(NetworkError::Shape("classifier input must include the two relative coordinates".into()));
        }
        Ok(Self(net))
    }

    pub fn network(&self) -> &Mlp {
        &self.0
    }

    pub fn feature_dim(&self) -> usize {
        self.0.input_dim() - 2
    }

    pub fn param_count(&self) -> usize {
        self.0.param_count()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.0.flatten()
    }

    /// Same architecture with new flat parameters.
    pub fn with_params(&self, params: &[f64]) -> Result<Self, NetworkError> {
        Ok(Self(self.0.with_params(params)?))
    }

    /// `[feature; c]`, the classifier input vector.
    pub fn input(feature: &[f64], c: [f64; 2]) -> Vec<f64> {
        let mut x = Vec::with_capacity(feature.len() + 2);
        x.extend_from_slice(feature);
        x.extend_from_slice(&c);
        x
    }
}

/// Outside-probability for one point. A value above 0.5 labels the point
/// outside.
pub fn ipc_forward(params: &IpcParams, feature: &[f64], c: [f64; 2]) -> Result<f64, NetworkError> {
    if feature.len() != params.feature_dim() {
        return Err(NetworkError::InputDimension { expected: params.feature_dim() + 2, got: feature.len() + 2 });
    }
    Ok(params.0.forward(&IpcParams::input(feature, c))?[0])
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IpcParamsJson {
    dims: Vec<usize>,
    layers: Vec<Dense>,
}

impl Serialize for IpcParams {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        IpcParamsJson { dims: self.0.dims(), layers: self.0.layers().to_vec() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for IpcParams {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let raw = IpcParamsJson::deserialize(d)?;
        let net = Mlp::from_layers(raw.layers, Head::Sigmoid).map_err(D::Error::custom)?;
        if net.dims() != raw.dims {
            return Err(D::Error::custom(format!("dims {:?} do not match layer shapes {:?}", raw.dims, net.dims())));
        }
        IpcParams::from_network(net).map_err(D::Error::custom)
    }
}

/// Instance box plus its classifier weights.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceContext {
    pub bbox: BBox,
    pub params: IpcParams,
}

impl InstanceContext {
    pub fn new(bbox: BBox, params: IpcParams) -> Result<Self, NetworkError> {
        if !(bbox.area() > 0.0) {
            return Err(NetworkError::Shape(format!("instance box must have positive area, got {}", bbox.area())));
        }
        Ok(Self { bbox, params })
    }
}

/// Position relative to the box, corners mapped to (0,0) and (1,1).
pub fn relative_coords(q: Point2, bbox: &BBox) -> [f64; 2] {
    [(q.x - bbox.min.x) / bbox.width(), (q.y - bbox.min.y) / bbox.height()]
}

/// The classifier of one instance evaluated over a shared feature grid.
#[derive(Debug, Clone)]
pub struct InstanceField<'a> {
    grid: &'a FeatureGrid,
    ctx: &'a InstanceContext,
}

impl<'a> InstanceField<'a> {
    pub fn new(grid: &'a FeatureGrid, ctx: &'a InstanceContext) -> Result<Self, NetworkError> {
        if grid.channels() != ctx.params.feature_dim() {
            return Err(NetworkError::InputDimension { expected: ctx.params.feature_dim() + 2, got: grid.channels() + 2 });
        }
        Ok(Self { grid, ctx })
    }

    pub fn input_at(&self, q: Point2) -> Vec<f64> {
        IpcParams::input(&self.grid.sample(q), relative_coords(q, &self.ctx.bbox))
    }
}

impl ProbabilityField for InstanceField<'_> {
    fn evaluate(&self, q: Point2) -> f64 {
        let x = self.input_at(q);
        self.ctx.params.0.forward(&x).map(|o| o[0]).unwrap_or(0.5)
    }
}
