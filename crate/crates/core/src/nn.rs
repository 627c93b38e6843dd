//! Minimal dense multilayer perceptron with ReLU hidden layers.
//!
//! Used for the point classifier (sigmoid head), the regression baselines,
//! and the hypernetwork (linear heads). Parameters flatten layer by layer,
//! weights row-major (`w[out][in]`) followed by biases.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("input has {got} entries, network expects {expected}")]
    InputDimension { expected: usize, got: usize },
    #[error("inconsistent layer shapes: {0}")]
    Shape(String),
    #[error("parameter vector has {got} entries, network expects {expected}")]
    ParamCount { expected: usize, got: usize },
    #[error("non-finite parameter in layer {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Head {
    Sigmoid,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { w: vec![vec![0.0; inputs]; outputs], b: vec![0.0; outputs] }
    }

    pub fn inputs(&self) -> usize {
        self.w.first().map_or(0, Vec::len)
    }

    pub fn outputs(&self) -> usize {
        self.b.len()
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.w.iter().zip(&self.b).map(|(row, b)| {
            row.iter().zip(x).fold(*b, |acc, (w, xi)| acc + w * xi)
        }));
    }
}

/// Dense network: all layers but the last use ReLU.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mlp {
    layers: Vec<Dense>,
    head: Head,
}

impl<'de> Deserialize<'de> for Mlp {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            layers: Vec<Dense>,
            head: Head,
        }
        let r = Raw::deserialize(d)?;
        Mlp::from_layers(r.layers, r.head).map_err(serde::de::Error::custom)
    }
}

/// Per-layer activations retained for backpropagation.
#[derive(Debug, Clone)]
pub struct Activations {
    /// `values[0]` is the input, `values[k]` the output of layer `k - 1`
    /// after its nonlinearity.
    pub values: Vec<Vec<f64>>,
}

impl Activations {
    pub fn output(&self) -> &[f64] {
        self.values.last().expect("at least the input")
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Mlp {
    pub fn zeros(dims: &[usize], head: Head) -> Self {
        assert!(dims.len() >= 2, "need at least input and output dims");
        let layers = dims.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect();
        Self { layers, head }
    }

    /// He-normal weights for ReLU layers, zero biases.
    pub fn random<R: Rng + ?Sized>(dims: &[usize], head: Head, rng: &mut R) -> Self {
        let mut net = Self::zeros(dims, head);
        for layer in &mut net.layers {
            let std = (2.0 / layer.inputs().max(1) as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("valid std");
            for row in &mut layer.w {
                for w in row.iter_mut() {
                    *w = normal.sample(rng);
                }
            }
        }
        net
    }

    pub fn from_layers(layers: Vec<Dense>, head: Head) -> Result<Self, NetworkError> {
        if layers.is_empty() {
            return Err(NetworkError::Shape("no layers".into()));
        }
        for (k, l) in layers.iter().enumerate() {
            if l.outputs() == 0 || l.w.len() != l.outputs() {
                return Err(NetworkError::Shape(format!("layer {k} has {} rows and {} biases", l.w.len(), l.b.len())));
            }
            let inputs = l.inputs();
            if inputs == 0 && k > 0 {
                return Err(NetworkError::Shape(format!("layer {k} has no inputs")));
            }
            if l.w.iter().any(|row| row.len() != inputs) {
                return Err(NetworkError::Shape(format!("layer {k} has ragged rows")));
            }
            if k > 0 && layers[k - 1].outputs() != inputs {
                return Err(NetworkError::Shape(format!(
                    "layer {} outputs {} but layer {k} takes {inputs}",
                    k - 1,
                    layers[k - 1].outputs()
                )));
            }
            let finite = l.b.iter().chain(l.w.iter().flatten()).all(|v| v.is_finite());
            if !finite {
                return Err(NetworkError::NonFinite(k));
            }
        }
        Ok(Self { layers, head })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.layers[0].inputs()];
        d.extend(self.layers.iter().map(Dense::outputs));
        d
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().outputs()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.outputs() * (l.inputs() + 1)).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            for row in &l.w {
                out.extend_from_slice(row);
            }
            out.extend_from_slice(&l.b);
        }
        out
    }

    /// Overwrites all parameters from a flat vector in [`Mlp::flatten`] order.
    pub fn assign(&mut self, params: &[f64]) -> Result<(), NetworkError> {
        if params.len() != self.param_count() {
            return Err(NetworkError::ParamCount { expected: self.param_count(), got: params.len() });
        }
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            for row in &mut l.w {
                for w in row.iter_mut() {
                    *w = it.next().unwrap();
                }
            }
            for b in &mut l.b {
                *b = it.next().unwrap();
            }
        }
        Ok(())
    }

    pub fn with_params(&self, params: &[f64]) -> Result<Mlp, NetworkError> {
        let mut m = self.clone();
        m.assign(params)?;
        Ok(m)
    }

    /// Forward pass keeping every intermediate activation.
    pub fn forward_trace(&self, input: &[f64]) -> Result<Activations, NetworkError> {
        if input.len() != self.input_dim() {
            return Err(NetworkError::InputDimension { expected: self.input_dim(), got: input.len() });
        }
        let last = self.layers.len() - 1;
        let mut values = Vec::with_capacity(self.layers.len() + 1);
        values.push(input.to_vec());
        for (k, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.outputs());
            layer.apply(values.last().unwrap(), &mut out);
            if k < last {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            } else if self.head == Head::Sigmoid {
                out.iter_mut().for_each(|v| *v = sigmoid(*v));
            }
            values.push(out);
        }
        Ok(Activations { values })
    }

    /// Forward pass without retaining activations.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NetworkError> {
        if input.len() != self.input_dim() {
            return Err(NetworkError::InputDimension { expected: self.input_dim(), got: input.len() });
        }
        let last = self.layers.len() - 1;
        let mut cur = input.to_vec();
        let mut next = Vec::new();
        for (k, layer) in self.layers.iter().enumerate() {
            layer.apply(&cur, &mut next);
            if k < last {
                next.iter_mut().for_each(|v| *v = v.max(0.0));
            } else if self.head == Head::Sigmoid {
                next.iter_mut().for_each(|v| *v = sigmoid(*v));
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// Accumulates `d(loss)/d(params)` into `grad` given `d(loss)/d(pre-head)`,
    /// i.e. the gradient with respect to the last layer's affine output.
    /// Returns `d(loss)/d(input)`.
    pub fn backward(&self, acts: &Activations, output_grad: &[f64], grad: &mut [f64]) -> Vec<f64> {
        debug_assert_eq!(grad.len(), self.param_count());
        let offsets = self.layer_offsets();
        let mut delta = output_grad.to_vec();
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let input = &acts.values[k];
            let (ins, outs) = (layer.inputs(), layer.outputs());
            let base = offsets[k];
            for o in 0..outs {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = &mut grad[base + o * ins..base + (o + 1) * ins];
                for (g, x) in row.iter_mut().zip(input) {
                    *g += d * x;
                }
                grad[base + outs * ins + o] += d;
            }
            let mut prev = vec![0.0; ins];
            for (o, row) in layer.w.iter().enumerate() {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                for (p, w) in prev.iter_mut().zip(row) {
                    *p += d * w;
                }
            }
            if k > 0 {
                // ReLU derivative on the previous layer's output.
                for (p, a) in prev.iter_mut().zip(input) {
                    if *a <= 0.0 {
                        *p = 0.0;
                    }
                }
            }
            delta = prev;
        }
        delta
    }

    fn layer_offsets(&self) -> Vec<usize> {
        let mut offs = Vec::with_capacity(self.layers.len());
        let mut acc = 0;
        for l in &self.layers {
            offs.push(acc);
            acc += l.outputs() * (l.inputs() + 1);
        }
        offs
    }

    /// Upper bound on the Lipschitz constant of the forward map (Frobenius
    /// norms of the weight matrices; sigmoid contributes 1/4).
    pub fn lipschitz_bound(&self) -> f64 {
        let prod: f64 = self
            .layers
            .iter()
            .map(|l| l.w.iter().flatten().map(|w| w * w).sum::<f64>().sqrt())
            .product();
        match self.head {
            Head::Sigmoid => 0.25 * prod,
            Head::Linear => prod,
        }
    }
}
