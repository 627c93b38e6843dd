//! Training of the point classifier.
//!
//! Samples are drawn uniformly from a band around the ground-truth boundary
//! and labelled by signed distance. The classifier is fit with a focal loss
//! whose class weight comes from the label balance of the batch. The
//! optimizer is gradient descent with momentum; an epoch that raises the loss
//! is undone and the learning rate halved, so the recorded loss never rises.
//!
//! The same optimizer drives a small hypernetwork that predicts classifier
//! weights from an instance embedding, and the L1 regressors used as
//! baselines.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{relative_coords, FeatureGrid, IpcParams, DEFAULT_HIDDEN};
use crate::geometry::{BBox, Point2, Region};
use crate::nn::{Head, Mlp, NetworkError};

/// Points closer than this to the boundary are redrawn.
pub const ON_BOUNDARY_EPS: f64 = 1e-9;
/// Consecutive rejected draws before sampling gives up.
pub const MAX_SAMPLE_TRIES: usize = 10_000;
/// A step is accepted when the loss rises by at most this much.
pub const LOSS_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainingError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("no valid band point found in {0} tries")]
    BandTooThin(usize),
    #[error("need at least 2 samples of each label, got {inside} inside and {outside} outside")]
    InsufficientSamples { inside: usize, outside: usize },
    #[error("diverged")]
    Diverged,
    #[error("empty batch")]
    EmptyBatch,
    #[error("regressor has not been trained")]
    Untrained,
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// A labelled band point. `label` is 1 outside the object and 0 inside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub point: Point2,
    pub feature: Vec<f64>,
    pub c: [f64; 2],
    pub label: u8,
    pub instance_id: usize,
}

impl TrainingSample {
    pub fn input(&self) -> Vec<f64> {
        IpcParams::input(&self.feature, self.c)
    }
}

/// Which class fraction weights the positive (outside) term of the loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AlphaMode {
    /// `alpha = n_inside / n`, up-weighting the minority class.
    #[default]
    NegativeFraction,
    /// `alpha = n_outside / n`.
    PositiveFraction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub gamma: f64,
    /// Band half-width in px; `None` means `0.05 * sqrt(A)` of the instance box.
    pub band_half_width: Option<f64>,
    pub samples_per_instance: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    /// `None` trains full-batch.
    pub batch_size: Option<usize>,
    pub prob_clamp: f64,
    pub alpha_mode: AlphaMode,
    pub hidden: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 2.0,
            band_half_width: None,
            samples_per_instance: 512,
            learning_rate: 0.5,
            momentum: 0.9,
            epochs: 300,
            batch_size: None,
            prob_clamp: 1e-7,
            alpha_mode: AlphaMode::NegativeFraction,
            hidden: DEFAULT_HIDDEN,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainingError> {
        let bad = |m: &str| Err(TrainingError::InvalidConfig(m.to_string()));
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad("gamma must be >= 0");
        }
        if !(self.prob_clamp > 0.0 && self.prob_clamp < 0.5) {
            return bad("prob_clamp must be in (0, 0.5)");
        }
        if let Some(b) = self.band_half_width {
            if !(b > 0.0 && b.is_finite()) {
                return bad("band_half_width must be > 0");
            }
        }
        if self.samples_per_instance == 0 {
            return bad("samples_per_instance must be >= 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be > 0");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must be in [0, 1)");
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        if self.batch_size == Some(0) {
            return bad("batch_size must be >= 1");
        }
        if self.hidden == 0 {
            return bad("hidden must be >= 1");
        }
        Ok(())
    }

    pub fn band_for(&self, bbox: &BBox) -> f64 {
        self.band_half_width.unwrap_or_else(|| 0.05 * bbox.area().sqrt())
    }
}

/// Draws `cfg.samples_per_instance` points uniformly from the band
/// `|sd(gt, q)| <= band` by rejection from the band-expanded bounding box.
///
/// `bbox` is the instance box used for the relative coordinates.
pub fn sample_boundary_points<R: Rng + ?Sized>(
    gt: &Region,
    grid: &FeatureGrid,
    bbox: &BBox,
    cfg: &TrainConfig,
    instance_id: usize,
    rng: &mut R,
) -> Result<Vec<TrainingSample>, TrainingError> {
    cfg.validate()?;
    let band = cfg.band_for(bbox);
    let region = gt.bbox().expanded(band);
    let mut out = Vec::with_capacity(cfg.samples_per_instance);
    while out.len() < cfg.samples_per_instance {
        let mut tries = 0;
        let (q, sd) = loop {
            if tries == MAX_SAMPLE_TRIES {
                return Err(TrainingError::BandTooThin(MAX_SAMPLE_TRIES));
            }
            tries += 1;
            let q = Point2::new(rng.random_range(region.min.x..=region.max.x), rng.random_range(region.min.y..=region.max.y));
            let sd = gt.signed_distance(q);
            if sd.abs() <= band && sd.abs() >= ON_BOUNDARY_EPS {
                break (q, sd);
            }
        };
        out.push(TrainingSample {
            point: q,
            feature: grid.sample(q),
            c: relative_coords(q, bbox),
            label: u8::from(sd > 0.0),
            instance_id,
        });
    }
    Ok(out)
}

/// Fraction of inside samples (`n_neg / n`). Logs a warning when the batch
/// holds a single class.
pub fn dynamic_alpha(batch: &[TrainingSample]) -> Result<f64, TrainingError> {
    if batch.is_empty() {
        return Err(TrainingError::EmptyBatch);
    }
    let pos = batch.iter().filter(|s| s.label == 1).count();
    let neg = batch.len() - pos;
    if pos == 0 || neg == 0 {
        log::warn!("batch holds only {} samples; one loss term gets zero weight", if pos == 0 { "inside" } else { "outside" });
    }
    Ok(neg as f64 / batch.len() as f64)
}

fn alpha_for(labels: impl Iterator<Item = u8>, mode: AlphaMode) -> f64 {
    let (mut pos, mut n) = (0usize, 0usize);
    for l in labels {
        pos += usize::from(l == 1);
        n += 1;
    }
    if n == 0 {
        return 0.5;
    }
    match mode {
        AlphaMode::NegativeFraction => (n - pos) as f64 / n as f64,
        AlphaMode::PositiveFraction => pos as f64 / n as f64,
    }
}

/// Focal loss of one prediction, with `y_hat` clamped to `[eps, 1 - eps]`.
pub fn focal_loss(y_hat: f64, y: u8, alpha: f64, gamma: f64, eps: f64) -> f64 {
    let p = y_hat.clamp(eps, 1.0 - eps);
    if y == 1 {
        -alpha * (1.0 - p).powf(gamma) * p.ln()
    } else {
        -(1.0 - alpha) * p.powf(gamma) * (1.0 - p).ln()
    }
}

/// `d focal_loss / d z` where `y_hat = sigmoid(z)`; zero where the clamp is
/// active.
pub fn focal_loss_logit_grad(y_hat: f64, y: u8, alpha: f64, gamma: f64, eps: f64) -> f64 {
    let p = y_hat;
    if p < eps || p > 1.0 - eps {
        return 0.0;
    }
    let q = 1.0 - p;
    if y == 1 {
        alpha * (gamma * p * q.powf(gamma) * p.ln() - q.powf(gamma + 1.0))
    } else {
        (1.0 - alpha) * (p.powf(gamma + 1.0) - gamma * q * p.powf(gamma) * q.ln())
    }
}

/// Loss function settings passed to the batch helpers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocalSettings {
    pub alpha: f64,
    pub gamma: f64,
    pub eps: f64,
}

impl FocalSettings {
    pub fn for_batch(batch: &[TrainingSample], cfg: &TrainConfig) -> Self {
        Self { alpha: alpha_for(batch.iter().map(|s| s.label), cfg.alpha_mode), gamma: cfg.gamma, eps: cfg.prob_clamp }
    }
}

/// Mean focal loss over the batch.
pub fn batch_loss(params: &IpcParams, batch: &[TrainingSample], fs: FocalSettings) -> Result<f64, TrainingError> {
    if batch.is_empty() {
        return Err(TrainingError::EmptyBatch);
    }
    let mut total = 0.0;
    for s in batch {
        let p = params.network().forward(&s.input())?[0];
        total += focal_loss(p, s.label, fs.alpha, fs.gamma, fs.eps);
    }
    Ok(total / batch.len() as f64)
}

/// Gradient of [`batch_loss`] over the flat classifier parameters.
pub fn loss_gradient(params: &IpcParams, batch: &[TrainingSample], fs: FocalSettings) -> Result<Vec<f64>, TrainingError> {
    let inputs: Vec<Vec<f64>> = batch.iter().map(TrainingSample::input).collect();
    let labels: Vec<u8> = batch.iter().map(|s| s.label).collect();
    Ok(focal_eval(params.network(), &inputs, &labels, fs)?.grad)
}

struct Eval {
    loss: f64,
    grad: Vec<f64>,
    correct: usize,
}

fn focal_eval(net: &Mlp, inputs: &[Vec<f64>], labels: &[u8], fs: FocalSettings) -> Result<Eval, TrainingError> {
    if inputs.is_empty() {
        return Err(TrainingError::EmptyBatch);
    }
    let n = inputs.len() as f64;
    let mut grad = vec![0.0; net.param_count()];
    let (mut loss, mut correct) = (0.0, 0usize);
    for (x, &y) in inputs.iter().zip(labels) {
        let acts = net.forward_trace(x)?;
        let p = acts.output()[0];
        loss += focal_loss(p, y, fs.alpha, fs.gamma, fs.eps);
        correct += usize::from((p > 0.5) == (y == 1));
        let g = focal_loss_logit_grad(p, y, fs.alpha, fs.gamma, fs.eps) / n;
        if g != 0.0 {
            net.backward(&acts, &[g], &mut grad);
        }
    }
    Ok(Eval { loss: loss / n, grad, correct })
}

/// Fraction of samples whose predicted label matches.
pub fn accuracy(params: &IpcParams, samples: &[TrainingSample]) -> Result<f64, TrainingError> {
    if samples.is_empty() {
        return Err(TrainingError::EmptyBatch);
    }
    let mut correct = 0;
    for s in samples {
        let p = params.network().forward(&s.input())?[0];
        correct += usize::from((p > 0.5) == (s.label == 1));
    }
    Ok(correct as f64 / samples.len() as f64)
}

/// One row of the training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
    pub alpha: f64,
}

pub type TrainingLog = Vec<EpochRecord>;

/// Momentum descent with epoch-level rejection. `eval(theta, idx)` returns
/// loss, gradient and correct-count over the items `idx`.
fn optimize<E>(mut theta: Vec<f64>, n_items: usize, cfg: &TrainConfig, alpha: f64, mut eval: E) -> Result<(Vec<f64>, TrainingLog), TrainingError>
where
    E: FnMut(&[f64], &[usize]) -> Result<Eval, TrainingError>,
{
    let all: Vec<usize> = (0..n_items).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x0005_eed0_f7a1);
    let mut order = all.clone();
    let mut velocity = vec![0.0; theta.len()];
    let mut lr = cfg.learning_rate;
    let mut cur = eval(&theta, &all)?;
    if !cur.loss.is_finite() {
        return Err(TrainingError::Diverged);
    }
    let mut log = Vec::with_capacity(cfg.epochs);
    let step = |theta: &mut [f64], velocity: &mut [f64], grad: &[f64], lr: f64| {
        for ((t, v), g) in theta.iter_mut().zip(velocity.iter_mut()).zip(grad) {
            *v = cfg.momentum * *v - lr * g;
            *t += *v;
        }
    };
    for epoch in 1..=cfg.epochs {
        let saved = theta.clone();
        match cfg.batch_size {
            Some(b) if b < n_items => {
                order.shuffle(&mut rng);
                for chunk in order.chunks(b) {
                    let e = eval(&theta, chunk)?;
                    step(&mut theta, &mut velocity, &e.grad, lr);
                }
            }
            _ => step(&mut theta, &mut velocity, &cur.grad, lr),
        }
        let next = eval(&theta, &all)?;
        if next.loss.is_nan() || (next.loss.is_infinite() && lr < 1e-300) {
            return Err(TrainingError::Diverged);
        }
        if next.loss <= cur.loss + LOSS_TOLERANCE {
            cur = next;
            lr = (lr * 1.1).min(cfg.learning_rate);
        } else {
            theta = saved;
            velocity.iter_mut().for_each(|v| *v = 0.0);
            lr *= 0.5;
        }
        log.push(EpochRecord { epoch, loss: cur.loss, accuracy: cur.correct as f64 / n_items as f64, alpha });
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(TrainingError::Diverged);
    }
    Ok((theta, log))
}

fn label_counts(samples: &[TrainingSample]) -> (usize, usize) {
    let outside = samples.iter().filter(|s| s.label == 1).count();
    (samples.len() - outside, outside)
}

/// Fits the classifier weights of one instance to its band samples.
pub fn fit_instance(params0: &IpcParams, samples: &[TrainingSample], cfg: &TrainConfig) -> Result<(IpcParams, TrainingLog), TrainingError> {
    cfg.validate()?;
    let (inside, outside) = label_counts(samples);
    if inside < 2 || outside < 2 {
        return Err(TrainingError::InsufficientSamples { inside, outside });
    }
    let inputs: Vec<Vec<f64>> = samples.iter().map(TrainingSample::input).collect();
    let labels: Vec<u8> = samples.iter().map(|s| s.label).collect();
    let full = FocalSettings::for_batch(samples, cfg);
    let mut net = params0.network().clone();
    let (theta, log) = optimize(params0.flatten(), samples.len(), cfg, full.alpha, |theta, idx| {
        net.assign(theta)?;
        let xs: Vec<Vec<f64>> = idx.iter().map(|&i| inputs[i].clone()).collect();
        let ys: Vec<u8> = idx.iter().map(|&i| labels[i]).collect();
        let fs = FocalSettings { alpha: alpha_for(ys.iter().copied(), cfg.alpha_mode), gamma: cfg.gamma, eps: cfg.prob_clamp };
        focal_eval(&net, &xs, &ys, fs)
    })?;
    Ok((params0.with_params(&theta)?, log))
}

/// Predicts classifier weights from an instance embedding.
///
/// Three fully connected layers with ReLU between them and a linear output
/// of length `|theta|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypernetwork {
    net: Mlp,
    feature_dim: usize,
    ipc_hidden: usize,
}

impl Hypernetwork {
    pub const DEFAULT_EMBED_DIM: usize = 32;
    pub const DEFAULT_HIDDEN: usize = 32;

    fn dims(embed_dim: usize, hidden: usize, feature_dim: usize, ipc_hidden: usize) -> [usize; 4] {
        [embed_dim, hidden, hidden, IpcParams::zeros(feature_dim, ipc_hidden).param_count()]
    }

    /// All-zero weights; predicts the zero classifier for every embedding.
    pub fn zeros(embed_dim: usize, hidden: usize, feature_dim: usize, ipc_hidden: usize) -> Self {
        let net = Mlp::zeros(&Self::dims(embed_dim, hidden, feature_dim, ipc_hidden), Head::Linear);
        Self { net, feature_dim, ipc_hidden }
    }

    /// He-initialized hidden layers; the output layer starts with small
    /// weights and a bias holding a He-initialized classifier, so initial
    /// predictions are usable classifiers that differ slightly per instance.
    pub fn random<R: Rng + ?Sized>(embed_dim: usize, hidden: usize, feature_dim: usize, ipc_hidden: usize, rng: &mut R) -> Self {
        let dims = Self::dims(embed_dim, hidden, feature_dim, ipc_hidden);
        let mut net = Mlp::random(&dims, Head::Linear, rng);
        let base = IpcParams::random(feature_dim, ipc_hidden, rng).flatten();
        let mut flat = net.flatten();
        let last = net.layers().last().expect("three layers");
        let (ins, outs) = (last.inputs(), last.outputs());
        let start = flat.len() - outs * (ins + 1);
        for w in &mut flat[start..start + outs * ins] {
            *w *= 0.01;
        }
        flat[start + outs * ins..].copy_from_slice(&base);
        net.assign(&flat).expect("same shape");
        Self { net, feature_dim, ipc_hidden }
    }

    pub fn embed_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn network(&self) -> &Mlp {
        &self.net
    }

    pub fn forward(&self, embedding: &[f64]) -> Result<IpcParams, TrainingError> {
        let theta = self.net.forward(embedding)?;
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(NetworkError::NonFinite(self.net.layers().len() - 1).into());
        }
        Ok(IpcParams::zeros(self.feature_dim, self.ipc_hidden).with_params(&theta)?)
    }
}

/// Samples and embedding of one instance for joint hypernetwork training.
#[derive(Debug, Clone)]
pub struct InstanceBatch {
    pub embedding: Vec<f64>,
    pub samples: Vec<TrainingSample>,
}

/// Trains the hypernetwork full-batch on the mean of per-instance losses.
pub fn fit_hypernetwork(h0: &Hypernetwork, instances: &[InstanceBatch], cfg: &TrainConfig) -> Result<(Hypernetwork, TrainingLog), TrainingError> {
    cfg.validate()?;
    if instances.is_empty() {
        return Err(TrainingError::EmptyBatch);
    }
    for inst in instances {
        let (inside, outside) = label_counts(&inst.samples);
        if inside < 2 || outside < 2 {
            return Err(TrainingError::InsufficientSamples { inside, outside });
        }
        if inst.embedding.len() != h0.embed_dim() {
            return Err(NetworkError::InputDimension { expected: h0.embed_dim(), got: inst.embedding.len() }.into());
        }
    }
    let prepared: Vec<(Vec<Vec<f64>>, Vec<u8>, FocalSettings)> = instances
        .iter()
        .map(|inst| {
            let xs = inst.samples.iter().map(TrainingSample::input).collect();
            let ys = inst.samples.iter().map(|s| s.label).collect();
            (xs, ys, FocalSettings::for_batch(&inst.samples, cfg))
        })
        .collect();
    let total: usize = instances.iter().map(|i| i.samples.len()).sum();
    let mean_alpha = prepared.iter().map(|p| p.2.alpha).sum::<f64>() / prepared.len() as f64;
    let k = instances.len() as f64;
    let template = IpcParams::zeros(h0.feature_dim, h0.ipc_hidden);
    let mut hnet = h0.net.clone();
    let full_cfg = TrainConfig { batch_size: None, ..cfg.clone() };
    let (phi, log) = optimize(h0.net.flatten(), total, &full_cfg, mean_alpha, |phi, _| {
        hnet.assign(phi)?;
        let mut grad = vec![0.0; phi.len()];
        let (mut loss, mut correct) = (0.0, 0);
        for (inst, (xs, ys, fs)) in instances.iter().zip(&prepared) {
            let acts = hnet.forward_trace(&inst.embedding)?;
            let ipc = template.with_params(acts.output())?;
            let e = focal_eval(ipc.network(), xs, ys, *fs)?;
            loss += e.loss / k;
            correct += e.correct;
            let g_theta: Vec<f64> = e.grad.iter().map(|g| g / k).collect();
            hnet.backward(&acts, &g_theta, &mut grad);
        }
        Ok(Eval { loss, grad, correct })
    })?;
    let mut net = h0.net.clone();
    net.assign(&phi)?;
    Ok((Hypernetwork { net, feature_dim: h0.feature_dim, ipc_hidden: h0.ipc_hidden }, log))
}

/// A regression example: classifier-style input and a target vector.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSample {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

/// MLP regressor with the classifier's hidden capacity and a linear head.
/// Targets are divided by `target_scale` during training.
#[derive(Debug, Clone, PartialEq)]
pub struct Regressor {
    net: Mlp,
    target_scale: f64,
    trained: bool,
}

impl Regressor {
    /// Same hidden layout as the classifier: `[in] -> H -> H -> H -> [out]`.
    pub fn new<R: Rng + ?Sized>(input_dim: usize, output_dim: usize, hidden: usize, target_scale: f64, rng: &mut R) -> Self {
        let net = Mlp::random(&[input_dim, hidden, hidden, hidden, output_dim], Head::Linear, rng);
        Self { net, target_scale, trained: false }
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    pub fn param_count(&self) -> usize {
        self.net.param_count()
    }

    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>, TrainingError> {
        if !self.trained {
            return Err(TrainingError::Untrained);
        }
        Ok(self.net.forward(input)?.into_iter().map(|v| v * self.target_scale).collect())
    }
}

/// Fits the regressor with a mean L1 loss on scaled targets.
pub fn fit_regressor(model: &Regressor, samples: &[RegressionSample], cfg: &TrainConfig) -> Result<(Regressor, TrainingLog), TrainingError> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(TrainingError::EmptyBatch);
    }
    let out_dim = model.net.output_dim();
    if let Some(s) = samples.iter().find(|s| s.target.len() != out_dim) {
        return Err(NetworkError::Shape(format!("target has {} values, model outputs {out_dim}", s.target.len())).into());
    }
    let scale = model.target_scale;
    let mut net = model.net.clone();
    let (theta, log) = optimize(net.flatten(), samples.len(), cfg, f64::NAN, |theta, idx| {
        net.assign(theta)?;
        let mut grad = vec![0.0; theta.len()];
        let norm = (idx.len() * out_dim) as f64;
        let mut loss = 0.0;
        let mut dout = vec![0.0; out_dim];
        for &i in idx {
            let s = &samples[i];
            let acts = net.forward_trace(&s.input)?;
            for (k, (p, t)) in acts.output().iter().zip(&s.target).enumerate() {
                let r = p - t / scale;
                loss += r.abs();
                dout[k] = r.signum() * f64::from(u8::from(r != 0.0)) / norm;
            }
            net.backward(&acts, &dout, &mut grad);
        }
        Ok(Eval { loss: loss / norm, grad, correct: 0 })
    })?;
    let mut fitted = model.net.clone();
    fitted.assign(&theta)?;
    Ok((Regressor { net: fitted, target_scale: scale, trained: true }, log))
}
